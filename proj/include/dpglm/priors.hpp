#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

namespace dpglm {

// Normal-Inverse-Gamma over one continuous covariate dimension:
//   var ~ InvGamma(shape, scale), mean | var ~ N(loc, var / nu).
struct NigPrior {
  double shape = 2.0;
  double scale = 1.0;
  double loc = 0.0;
  double nu = 1.0;
};

// Independent normal mean and log-normal variance (non-conjugate):
//   mean ~ N(mean_loc, mean_sd^2), log(var) ~ N(log_var_loc, log_var_sd^2).
struct LogNormalMeanVar {
  double mean_loc = 0.0;
  double mean_sd = 1.0;
  double log_var_loc = 0.0;
  double log_var_sd = 1.0;
};

// Dirichlet over the levels of one categorical covariate.
struct DirichletLevels {
  std::vector<double> concentration;
};

using CovariatePrior = std::variant<NigPrior, LogNormalMeanVar, DirichletLevels>;

// Multivariate Normal-Inverse-Gamma over the Gaussian GLM coefficients:
//   var_y ~ InvGamma(shape, scale), beta | var_y ~ N(mean, var_y * cov).
struct MvnigPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double shape = 2.0;
  double scale = 1.0;
};

// log(var) ~ N(loc, sd^2).
struct LogNormalVariance {
  double loc = 0.0;
  double sd = 1.0;
};

// Independent Gaussians on every coefficient (design slot x class), plus a
// log-normal prior on the response variance for the Gaussian family.
struct IndependentGaussianPrior {
  Eigen::MatrixXd mean;  // p x K (K = 1 for scalar families)
  Eigen::MatrixXd var;   // p x K
  std::optional<LogNormalVariance> dispersion;
};

using ResponsePrior = std::variant<MvnigPrior, IndependentGaussianPrior>;

struct BaseMeasureSpec {
  std::vector<CovariatePrior> covariates;
  ResponsePrior response;
};

inline bool is_conjugate(const CovariatePrior& prior) {
  return !std::holds_alternative<LogNormalMeanVar>(prior);
}

inline bool is_conjugate(const ResponsePrior& prior) {
  return std::holds_alternative<MvnigPrior>(prior);
}

}  // namespace dpglm
