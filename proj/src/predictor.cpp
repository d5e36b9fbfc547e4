#include "dpglm/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dpglm/errors.hpp"
#include "dpglm/glm.hpp"

namespace dpglm {

namespace {

double log_mean_exp(const std::vector<double>& v) {
  Eigen::Map<const Eigen::VectorXd> m(v.data(), static_cast<Eigen::Index>(v.size()));
  return log_sum_exp(m) - std::log(static_cast<double>(v.size()));
}

double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
}

}  // namespace

Predictor::Predictor(ModelSpec spec, DesignLayout layout, PredictorConfig config)
    : spec_(std::move(spec)), layout_(std::move(layout)), config_(config) {
  if (config_.prior.num_draws == 0) throw ConfigError("predict.prior_draws", "must be positive");
  if (const auto* mvnig = std::get_if<MvnigPrior>(&spec_.base.response)) mvnig_terms_.emplace(*mvnig);
  empty_stats_ = SufficientStats::empty(spec_, layout_);
}

Predictor::Predictor(const ModelSpec& spec, const DataSchema& schema, PredictorConfig config)
    : Predictor(spec, DesignLayout(schema, spec.response_uses_covariates), config) {}

double Predictor::log_prior_covariate_density(const Eigen::Ref<const Eigen::VectorXd>& x, Rng& rng) const {
  double out = 0.0;
  std::vector<double> terms(config_.prior.num_draws);
  for (std::size_t j = 0; j < spec_.base.covariates.size(); ++j) {
    const CovariatePrior& prior = spec_.base.covariates[j];
    const double v = x(static_cast<Eigen::Index>(j));
    if (const auto* ln = std::get_if<LogNormalMeanVar>(&prior)) {
      for (double& t : terms) {
        const double mean = rng.normal(ln->mean_loc, ln->mean_sd);
        const double var = std::exp(rng.normal(ln->log_var_loc, ln->log_var_sd));
        t = log_normal_pdf(v, mean, var);
      }
      out += log_mean_exp(terms);
    } else {
      out += covariate_log_predictive(prior, empty_stats_.covariates[j], v);
    }
  }
  return out;
}

Eigen::VectorXd Predictor::prior_response_mean(const Eigen::VectorXd& design, Rng& rng) const {
  if (const auto* mvnig = std::get_if<MvnigPrior>(&spec_.base.response)) {
    return Eigen::VectorXd::Constant(1, mvnig->mean.dot(design));
  }
  const auto& ind = std::get<IndependentGaussianPrior>(spec_.base.response);
  switch (spec_.family) {
    case Family::GaussianLinear: return Eigen::VectorXd::Constant(1, ind.mean.col(0).dot(design));
    case Family::PoissonLog: {
      // E exp(b'x) for independent Gaussian b is lognormal.
      const double log_mean =
          ind.mean.col(0).dot(design) + 0.5 * ind.var.col(0).dot(design.cwiseProduct(design));
      return Eigen::VectorXd::Constant(1, std::exp(std::min(log_mean, kEtaClamp)));
    }
    case Family::MultinomialLogistic: {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(ind.mean.cols());
      for (std::size_t d = 0; d < config_.prior.num_draws; ++d) {
        acc += glm_expectation(spec_.family, sample_response_prior(spec_.base.response, rng), design);
      }
      return acc / static_cast<double>(config_.prior.num_draws);
    }
  }
  return {};
}

std::pair<double, Eigen::VectorXd> Predictor::prior_term(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                         const Eigen::VectorXd& design, Rng& rng) const {
  if (config_.prior.mode == PriorTermEstimator::Mode::AnalyticConjugate) {
    const double lf = log_prior_covariate_density(x, rng);
    return {lf, prior_response_mean(design, rng)};
  }
  const std::size_t draws = config_.prior.num_draws;
  std::vector<double> lf(draws);
  std::vector<Eigen::VectorXd> ey(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    const ClusterParams theta = sample_prior(spec_.base, rng);
    lf[d] = covariates_logpdf(theta.x, x);
    ey[d] = glm_expectation(spec_.family, theta.y, design);
  }
  const double total = log_mean_exp(lf);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(ey[0].size());
  const bool flat = !std::isfinite(total);
  for (std::size_t d = 0; d < draws; ++d) {
    const double w = flat ? 1.0 / static_cast<double>(draws)
                          : std::exp(lf[d] - total) / static_cast<double>(draws);
    value += w * ey[d];
  }
  return {total, value};
}

Predictor::Mixture Predictor::mixture(const PosteriorSample& sample, const Eigen::Ref<const Eigen::VectorXd>& x,
                                      const Eigen::VectorXd& design, std::uint64_t stream) const {
  Rng rng = Rng(config_.seed).split(stream);
  Mixture out;
  out.log_weights.reserve(sample.clusters.size() + 1);
  out.values.reserve(sample.clusters.size() + 1);
  const bool collapsed = config_.cluster_term == ClusterTerm::CollapsedStats;
  if (collapsed && !mvnig_terms_) throw NonConjugateBase("collapsed cluster terms need an MVNIG response prior");
  for (const SampleCluster& c : sample.clusters) {
    const double log_n = std::log(static_cast<double>(c.count));
    if (collapsed) {
      out.log_weights.push_back(log_n + covariate_posterior_predictive_logdensity(spec_.base, c.stats, x));
      out.values.push_back(
          Eigen::VectorXd::Constant(1, MvnigPosterior(*mvnig_terms_, c.stats.response).predictive_mean(design)));
    } else {
      out.log_weights.push_back(log_n + covariates_logpdf(c.params.x, x));
      out.values.push_back(glm_expectation(spec_.family, c.params.y, design));
    }
  }
  auto [lf, value] = prior_term(x, design, rng);
  out.log_weights.push_back(std::log(sample.alpha) + lf);
  out.values.push_back(std::move(value));
  return out;
}

namespace {

void check_query(const ModelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (static_cast<std::size_t>(x.size()) != spec.base.covariates.size()) {
    throw DimensionMismatch("query has " + std::to_string(x.size()) + " covariates, model expects " +
                            std::to_string(spec.base.covariates.size()));
  }
  for (std::size_t j = 0; j < spec.base.covariates.size(); ++j) {
    const double v = x(static_cast<Eigen::Index>(j));
    if (!std::isfinite(v)) throw OutOfSupport("query covariate " + std::to_string(j) + " is not finite");
    if (const auto* dir = std::get_if<DirichletLevels>(&spec.base.covariates[j])) {
      if (v < 0 || std::floor(v) != v || v >= static_cast<double>(dir->concentration.size())) {
        throw OutOfSupport("query covariate " + std::to_string(j) + " is not a declared level");
      }
    }
  }
}

}  // namespace

Eigen::VectorXd Predictor::conditional_expectation(const PosteriorSample& sample,
                                                   const Eigen::Ref<const Eigen::VectorXd>& x,
                                                   std::uint64_t stream) const {
  check_query(spec_, x);
  const Eigen::VectorXd design = layout_.row(x);
  const Mixture mix = mixture(sample, x, design, stream);
  Eigen::Map<const Eigen::VectorXd> lw(mix.log_weights.data(), static_cast<Eigen::Index>(mix.log_weights.size()));
  const double total = log_sum_exp(lw);
  if (!std::isfinite(total)) throw DegenerateWeights("every mixture weight underflows at this query point");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mix.values.back().size());
  for (std::size_t k = 0; k < mix.values.size(); ++k) out += std::exp(mix.log_weights[k] - total) * mix.values[k];
  return out;
}

Eigen::VectorXd Predictor::prior_expectation(const Eigen::Ref<const Eigen::VectorXd>& x, std::uint64_t stream) const {
  check_query(spec_, x);
  Rng rng = Rng(config_.seed).split(stream);
  return prior_response_mean(layout_.row(x), rng);
}

PredictiveEstimate Predictor::predict(std::span<const PosteriorSample> samples,
                                      const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (samples.empty()) throw EmptyInput("prediction needs at least one posterior sample");
  PredictiveEstimate out;
  out.per_sample_means.reserve(samples.size());
  std::size_t degenerate = 0;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    try {
      out.per_sample_means.push_back(conditional_expectation(samples[m], x, m));
    } catch (const DegenerateWeights&) {
      ++degenerate;
      out.per_sample_means.push_back(prior_expectation(x, m));
    }
  }
  if (degenerate == samples.size()) throw DegenerateWeights("all posterior samples give degenerate weights");
  out.mean = Eigen::VectorXd::Zero(out.per_sample_means[0].size());
  for (const Eigen::VectorXd& v : out.per_sample_means) out.mean += v;
  out.mean /= static_cast<double>(samples.size());
  return out;
}

ResponseParams Predictor::draw_response(const SampleCluster* cluster, Rng& rng) const {
  if (!cluster) return sample_response_prior(spec_.base.response, rng);
  if (config_.cluster_term == ClusterTerm::CollapsedStats) {
    return MvnigPosterior(*mvnig_terms_, cluster->stats.response).sample(rng);
  }
  return cluster->params.y;
}

std::vector<double> Predictor::simulate(std::span<const PosteriorSample> samples,
                                        const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t draws_per_sample,
                                        Rng& rng) const {
  check_query(spec_, x);
  const Eigen::VectorXd design = layout_.row(x);
  std::vector<double> out;
  out.reserve(samples.size() * draws_per_sample);
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const PosteriorSample& s = samples[m];
    Mixture mix = mixture(s, x, design, m);
    const bool degenerate = std::none_of(mix.log_weights.begin(), mix.log_weights.end(),
                                         [](double w) { return std::isfinite(w); });
    if (degenerate) {
      std::fill(mix.log_weights.begin(), mix.log_weights.end(), -INFINITY);
      mix.log_weights.back() = 0.0;
    }
    for (std::size_t d = 0; d < draws_per_sample; ++d) {
      const std::size_t k = rng.categorical_log(mix.log_weights);
      const SampleCluster* c = k < s.clusters.size() ? &s.clusters[k] : nullptr;
      out.push_back(glm_sample(spec_.family, draw_response(c, rng), design, rng));
    }
  }
  return out;
}

double quantile_type7(std::vector<double>& values, double p) {
  if (values.empty()) throw EmptyInput("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::pair<double, double> Predictor::predictive_band(std::span<const PosteriorSample> samples,
                                                     const Eigen::Ref<const Eigen::VectorXd>& x, double level,
                                                     std::size_t draws_per_sample, Rng& rng) const {
  if (spec_.family == Family::MultinomialLogistic) {
    throw ValidationError("predictive bands need a continuous or count response");
  }
  if (!(level > 0.0 && level <= 1.0)) throw ConfigError("predict.band_level", "must lie in (0, 1]");
  if (draws_per_sample == 0) throw ConfigError("predict.draws_per_sample", "must be positive");
  if (samples.empty()) throw EmptyInput("prediction needs at least one posterior sample");
  level = std::min(level, 0.999);
  std::vector<double> draws = simulate(samples, x, draws_per_sample, rng);
  const double lower = quantile_type7(draws, 0.5 * (1.0 - level));
  const double upper = quantile_type7(draws, 0.5 * (1.0 + level));
  return {lower, upper};
}

Classification Predictor::classify(std::span<const PosteriorSample> samples,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (spec_.family != Family::MultinomialLogistic) throw ValidationError("classify needs a multinomial response");
  Classification out;
  out.probabilities = predict(samples, x).mean;
  for (Eigen::Index k = 1; k < out.probabilities.size(); ++k) {
    if (out.probabilities(k) > out.probabilities(static_cast<Eigen::Index>(out.label))) {
      out.label = static_cast<std::size_t>(k);
    }
  }
  return out;
}

}  // namespace dpglm
