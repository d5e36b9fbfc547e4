#pragma once

#include <Eigen/Dense>

#include "dpglm/model.hpp"
#include "dpglm/rng.hpp"

namespace dpglm {

// Linear predictors are clamped to this magnitude before exponentiation.
inline constexpr double kEtaClamp = 500.0;

// One value per response column of beta: a scalar for the Gaussian and
// Poisson families, K class scores for the multinomial family.
using LinearPredictor = Eigen::VectorXd;

LinearPredictor linear_predictor(const ResponseParams& theta,
                                 const Eigen::Ref<const Eigen::VectorXd>& design_row);
LinearPredictor linear_predictor(const ResponseParams& theta,
                                 const Eigen::Ref<const Eigen::VectorXd>& covariate_row,
                                 const DesignLayout& layout);

// Numerically stable softmax (max subtraction, clamped scores).
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& eta);
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

// E[Y | x, theta]: identity, exp or softmax of the linear predictor.
Eigen::VectorXd glm_expectation(Family family, const ResponseParams& theta,
                                const Eigen::Ref<const Eigen::VectorXd>& design_row);

// Log density (Gaussian) or log mass (Poisson, multinomial) of y.
double glm_logpdf(Family family, const ResponseParams& theta,
                  const Eigen::Ref<const Eigen::VectorXd>& design_row, double y);

// The same, given a precomputed linear predictor.
double glm_logpdf_eta(Family family, const Eigen::Ref<const Eigen::VectorXd>& eta, double var, double y);

double glm_sample(Family family, const ResponseParams& theta,
                  const Eigen::Ref<const Eigen::VectorXd>& design_row, Rng& rng);

}  // namespace dpglm
