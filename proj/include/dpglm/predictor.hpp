#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "dpglm/base_measures.hpp"
#include "dpglm/model.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/state.hpp"

namespace dpglm {

// How the new-cluster term alpha * E_G0[E[Y|x,theta] f_x(x|theta)] is
// evaluated. AnalyticConjugate uses closed forms where they exist (the two
// factors separate because theta_x and theta_y are independent under G0)
// and falls back to Monte Carlo per factor otherwise; MonteCarlo always
// averages over joint prior draws.
struct PriorTermEstimator {
  enum class Mode { AnalyticConjugate, MonteCarlo };
  Mode mode = Mode::AnalyticConjugate;
  std::size_t num_draws = 50;

  static PriorTermEstimator analytic(std::size_t fallback_draws = 50) { return {Mode::AnalyticConjugate, fallback_draws}; }
  static PriorTermEstimator monte_carlo(std::size_t draws = 50) { return {Mode::MonteCarlo, draws}; }
};

// ExplicitParams weighs clusters by n_c f_x(x|theta_c) and uses
// E[Y|x,theta_c]. CollapsedStats replaces both with their posterior
// predictive counterparts given the cluster's members (conjugate bases
// only), the Rao-Blackwellized form of the same estimator.
enum class ClusterTerm { ExplicitParams, CollapsedStats };

struct PredictorConfig {
  PriorTermEstimator prior;
  ClusterTerm cluster_term = ClusterTerm::ExplicitParams;
  std::uint64_t seed = 0;
};

struct Classification {
  std::size_t label = 0;
  Eigen::VectorXd probabilities;
};

class Predictor {
 public:
  Predictor(ModelSpec spec, DesignLayout layout, PredictorConfig config = {});
  Predictor(const ModelSpec& spec, const DataSchema& schema, PredictorConfig config = {});

  // E[Y | x, one posterior sample]. `stream` selects the Monte Carlo
  // stream for the prior term. Throws DegenerateWeights when every weight
  // underflows.
  Eigen::VectorXd conditional_expectation(const PosteriorSample& sample, const Eigen::Ref<const Eigen::VectorXd>& x,
                                          std::uint64_t stream = 0) const;
  // Prior-only fallback: E_G0[E[Y|x,theta_y]].
  Eigen::VectorXd prior_expectation(const Eigen::Ref<const Eigen::VectorXd>& x, std::uint64_t stream = 0) const;

  PredictiveEstimate predict(std::span<const PosteriorSample> samples, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Central empirical interval of simulated responses; level is clamped to
  // 0.999. Continuous and count families only.
  std::pair<double, double> predictive_band(std::span<const PosteriorSample> samples,
                                            const Eigen::Ref<const Eigen::VectorXd>& x, double level,
                                            std::size_t draws_per_sample, Rng& rng) const;
  std::vector<double> simulate(std::span<const PosteriorSample> samples, const Eigen::Ref<const Eigen::VectorXd>& x,
                               std::size_t draws_per_sample, Rng& rng) const;

  // Averaged class probabilities; ties go to the lowest class index.
  Classification classify(std::span<const PosteriorSample> samples, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const ModelSpec& spec() const { return spec_; }
  const DesignLayout& layout() const { return layout_; }
  const PredictorConfig& config() const { return config_; }

 private:
  struct Mixture {
    std::vector<double> log_weights;  // clusters, then the prior term
    std::vector<Eigen::VectorXd> values;
  };
  Mixture mixture(const PosteriorSample& sample, const Eigen::Ref<const Eigen::VectorXd>& x,
                  const Eigen::VectorXd& design, std::uint64_t stream) const;
  // log E_G0[f_x(x|theta_x)] and E_G0[E[Y|x,theta_y]] (analytic mode) or
  // their joint Monte Carlo counterpart.
  std::pair<double, Eigen::VectorXd> prior_term(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                const Eigen::VectorXd& design, Rng& rng) const;
  double log_prior_covariate_density(const Eigen::Ref<const Eigen::VectorXd>& x, Rng& rng) const;
  Eigen::VectorXd prior_response_mean(const Eigen::VectorXd& design, Rng& rng) const;
  ResponseParams draw_response(const SampleCluster* cluster, Rng& rng) const;

  ModelSpec spec_;
  DesignLayout layout_;
  PredictorConfig config_;
  std::optional<MvnigPriorTerms> mvnig_terms_;
  SufficientStats empty_stats_;
};

double quantile_type7(std::vector<double>& values, double p);

}  // namespace dpglm
