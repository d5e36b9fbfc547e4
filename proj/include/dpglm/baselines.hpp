#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dpglm/gibbs.hpp"
#include "dpglm/model.hpp"
#include "dpglm/predictor.hpp"

namespace dpglm {

// Design for the parametric baselines: intercept, continuous values, and
// treatment-coded categorical levels (first level is the reference).
class BaselineDesign {
 public:
  BaselineDesign() = default;
  explicit BaselineDesign(const DataSchema& schema);
  std::size_t width() const { return width_; }
  Eigen::VectorXd row(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd matrix(const Eigen::MatrixXd& covariates) const;

 private:
  std::size_t width_ = 1;
  std::vector<int> levels_;
};

struct OlsModel {
  Eigen::VectorXd beta;
  double residual_variance = 0.0;
  Eigen::Index rank = 0;
  bool rank_deficient = false;  // minimum-norm solution returned
  BaselineDesign design;
};

OlsModel fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);
OlsModel fit_ols(const Dataset& data);
double predict_ols(const OlsModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct IrlsOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 100;
  double divergence_bound = 30.0;
  std::size_t max_halvings = 30;
};

struct PoissonGlmModel {
  Eigen::VectorXd beta;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood;  // after each accepted step
  BaselineDesign design;
};

// Maximum likelihood for the log-link Poisson GLM by iteratively
// reweighted least squares with step halving. Throws SeparationDetected
// when a coefficient leaves [-30, 30].
PoissonGlmModel fit_poisson_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const IrlsOptions& options = {});
PoissonGlmModel fit_poisson_glm(const Dataset& data, const IrlsOptions& options = {});
double poisson_log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& beta);
double predict_poisson_glm(const PoissonGlmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// Location/scale DP mixture: the same engine with the response reduced to
// an intercept, so E[Y | theta] = mu_y.
ModelSpec dpmm_spec(const ModelSpec& spec);
std::vector<PredictiveEstimate> fit_predict_dpmm(const Dataset& data, const ModelSpec& spec, const ChainConfig& config,
                                                 const Eigen::MatrixXd& queries, const PredictorConfig& predictor = {});

}  // namespace dpglm
