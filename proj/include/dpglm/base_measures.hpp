#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "dpglm/model.hpp"
#include "dpglm/priors.hpp"
#include "dpglm/rng.hpp"

namespace dpglm {

// Training data in the layout the sampler reads: covariates, the GLM
// design matrix (row-major, one row per datum) and responses.
struct PreparedData {
  Eigen::MatrixXd covariates;
  DesignLayout::RowMatrix design;
  Eigen::VectorXd responses;

  PreparedData() = default;
  PreparedData(const Dataset& dataset, const DesignLayout& layout);
  std::size_t size() const { return static_cast<std::size_t>(responses.size()); }
};

struct CovariateStats {
  double n = 0.0;
  double sum = 0.0;
  double sumsq = 0.0;
  std::vector<double> counts;  // categorical dimensions only
};

struct ResponseStats {
  Eigen::MatrixXd xtx;  // design cross-product, intercept included
  Eigen::VectorXd xty;
  double yty = 0.0;
  double n = 0.0;
};

// Additive summaries of a member set. Response cross-products are kept only
// when the response prior is MVNIG.
struct SufficientStats {
  std::vector<CovariateStats> covariates;
  ResponseStats response;
  bool tracks_response = false;
  double n = 0.0;

  static SufficientStats empty(const ModelSpec& spec, const DesignLayout& layout);
  void add(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& design,
           double y, double weight = 1.0);
  void add(const PreparedData& data, std::size_t i, double weight = 1.0);
  void remove(const PreparedData& data, std::size_t i) { add(data, i, -1.0); }
  SufficientStats& operator+=(const SufficientStats& other);
};

SufficientStats stats_of(const ModelSpec& spec, const DesignLayout& layout, const PreparedData& data,
                         std::span<const std::size_t> rows);

// Closed forms for single covariate dimensions.
double nig_log_marginal(const NigPrior& prior, const CovariateStats& stats);
double nig_log_predictive(const NigPrior& prior, const CovariateStats& stats, double x);
double dirichlet_log_marginal(const DirichletLevels& prior, const CovariateStats& stats);
double dirichlet_log_predictive(const DirichletLevels& prior, const CovariateStats& stats, int level);

// Throws NonConjugateBase for LogNormalMeanVar.
double covariate_log_predictive(const CovariatePrior& prior, const CovariateStats& stats, double x);
double covariate_log_marginal(const CovariatePrior& prior, const CovariateStats& stats);

// Conjugate posterior of the Gaussian GLM under an MVNIG prior:
//   precision = cov^-1 + X'X, mean = precision^-1 (cov^-1 m0 + X'y),
//   shape_n = shape + n/2, scale_n = scale + (m0'cov^-1 m0 + y'y - mean'precision mean)/2.
// The predictive at design row x is Student-t with 2 shape_n degrees of
// freedom, location x'mean and squared scale (scale_n/shape_n)(1 + x'precision^-1 x).
struct MvnigPriorTerms {
  explicit MvnigPriorTerms(const MvnigPrior& prior);
  Eigen::MatrixXd precision;
  Eigen::VectorXd precision_mean;
  double mean_quad = 0.0;  // m0' cov^-1 m0
  double log_det_cov = 0.0;
  double shape = 0.0;
  double scale = 0.0;
};

class MvnigPosterior {
 public:
  MvnigPosterior(const MvnigPrior& prior, const ResponseStats& stats);
  MvnigPosterior(const MvnigPriorTerms& prior, const ResponseStats& stats);

  double log_predictive(const Eigen::Ref<const Eigen::VectorXd>& design_row, double y) const;
  double predictive_mean(const Eigen::Ref<const Eigen::VectorXd>& design_row) const;
  double log_marginal() const { return log_marginal_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  double shape() const { return shape_; }
  double scale() const { return scale_; }
  ResponseParams sample(Rng& rng) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> precision_llt_;
  Eigen::VectorXd mean_;
  double shape_ = 0.0;
  double scale_ = 0.0;
  double log_marginal_ = 0.0;
};

// Whole-cluster collapsed quantities. All throw NonConjugateBase when a
// needed part of the base measure is not conjugate.
double covariate_posterior_predictive_logdensity(const BaseMeasureSpec& base, const SufficientStats& stats,
                                                 const Eigen::Ref<const Eigen::VectorXd>& x);
double response_posterior_predictive_logdensity(const BaseMeasureSpec& base, const SufficientStats& stats,
                                                const Eigen::Ref<const Eigen::VectorXd>& design_row, double y);
double response_log_marginal(const BaseMeasureSpec& base, const SufficientStats& stats);
double log_marginal_likelihood(const BaseMeasureSpec& base, const SufficientStats& stats);

// Explicit densities at given parameters.
double covariate_logpdf(const CovariateParams& params, double x);
double covariates_logpdf(const std::vector<CovariateParams>& params, const Eigen::Ref<const Eigen::VectorXd>& x);

// Prior draws.
CovariateParams sample_covariate_prior(const CovariatePrior& prior, Rng& rng);
ResponseParams sample_response_prior(const ResponsePrior& prior, Rng& rng);
ClusterParams sample_prior(const BaseMeasureSpec& base, Rng& rng);

// Log prior density of explicit parameters. Log-normal variances are
// measured in log-variance coordinates, the others in (mean, variance).
double covariate_prior_logdensity(const CovariatePrior& prior, const CovariateParams& params);
double response_prior_logdensity(const ResponsePrior& prior, const ResponseParams& params);

// Exact conjugate posterior draws.
CovariateParams sample_covariate_posterior(const CovariatePrior& prior, const CovariateStats& stats, Rng& rng);

class MhKernel;

// Refreshes every part of a cluster's parameters given its members:
// conjugate parts are drawn exactly, non-conjugate parts take one
// Metropolis-Hastings pass through `mh`.
ClusterParams posterior_sample_params(const ModelSpec& spec, const PreparedData& data,
                                      std::span<const std::size_t> members, const SufficientStats& stats,
                                      const ClusterParams& current, MhKernel& mh, Rng& rng,
                                      const MvnigPosterior* response_posterior = nullptr);

}  // namespace dpglm
