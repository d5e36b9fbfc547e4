#include "dpglm/gibbs.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dpglm/errors.hpp"
#include "dpglm/glm.hpp"

namespace dpglm {

void ChainConfig::check() const {
  if (thin == 0) throw ConfigError("chain.thin", "must be positive");
  if (total_iterations == 0) throw ConfigError("chain.total_iterations", "must be positive");
  if (total_iterations <= burn_in) throw ConfigError("chain.total_iterations", "must exceed burn_in");
  if (aux_count == 0) throw ConfigError("chain.aux_count", "must be positive");
  auto step_ok = [](double s) { return std::isfinite(s) && s >= 0.0; };
  if (!step_ok(mh_steps.covariate_mean) || !step_ok(mh_steps.covariate_log_var) || !step_ok(mh_steps.beta) ||
      !step_ok(mh_steps.response_log_var)) {
    throw ConfigError("chain.mh_steps", "step sizes must be finite and nonnegative");
  }
}

CrpWeights crp_prior_logweights(const GibbsState& state, std::size_t i) {
  const ClusterId own = i < state.labels.size() ? state.labels[i] : kUnassigned;
  CrpWeights out;
  double others = 0.0;
  for (const Cluster& c : state.clusters) {
    const std::size_t n = c.count - (c.id == own ? 1 : 0);
    if (n == 0) continue;
    out.existing.emplace_back(c.id, static_cast<double>(n));
    others += static_cast<double>(n);
  }
  const double log_denom = std::log(others + state.alpha);
  for (auto& [id, w] : out.existing) w = std::log(w) - log_denom;
  out.new_cluster = std::log(state.alpha) - log_denom;
  return out;
}

double AssignmentDistribution::new_cluster_prob() const {
  double p = 0.0;
  for (std::size_t k = num_existing(); k < log_probs.size(); ++k) p += std::exp(log_probs[k]);
  return p;
}

double resample_alpha(double alpha, std::size_t num_clusters, std::size_t n, const GammaAlphaPrior& prior, Rng& rng) {
  const double k = static_cast<double>(num_clusters);
  const double nn = static_cast<double>(n);
  const double eta = rng.beta(alpha + 1.0, nn);
  const double rate = prior.rate - std::log(eta);
  const double odds = (prior.shape + k - 1.0) / (nn * rate);
  const double pick_upper = odds / (1.0 + odds);
  const double shape = rng.uniform() < pick_upper ? prior.shape + k : prior.shape + k - 1.0;
  return std::max(rng.gamma(shape, rate), DBL_MIN);
}

double crp_log_partition_prob(std::span<const std::size_t> block_sizes, double alpha) {
  double n = 0.0, out = 0.0;
  for (std::size_t s : block_sizes) {
    n += static_cast<double>(s);
    out += std::log(alpha) + std::lgamma(static_cast<double>(s));
  }
  return out + std::lgamma(alpha) - std::lgamma(alpha + n);
}

GibbsSampler::GibbsSampler(ModelSpec spec, const Dataset& data, ChainConfig config)
    : GibbsSampler(spec, DesignLayout(data.schema, spec.response_uses_covariates),
                   PreparedData(data, DesignLayout(data.schema, spec.response_uses_covariates)), config) {}

GibbsSampler::GibbsSampler(ModelSpec spec, DesignLayout layout, PreparedData data, ChainConfig config)
    : config_(config),
      layout_(std::move(layout)),
      data_(std::move(data)),
      mh_(spec, layout_.width(), config.mh_steps) {
  state_.spec = std::move(spec);
  state_.alpha = state_.spec.initial_alpha();
  state_.rng = Rng(config_.seed);
  const BaseMeasureSpec& base = state_.spec.base;
  collapse_x_.resize(base.covariates.size());
  fully_collapsed_ = config_.collapse;
  for (std::size_t j = 0; j < base.covariates.size(); ++j) {
    collapse_x_[j] = config_.collapse && is_conjugate(base.covariates[j]);
    fully_collapsed_ = fully_collapsed_ && collapse_x_[j];
  }
  if (const auto* mvnig = std::get_if<MvnigPrior>(&base.response)) mvnig_terms_.emplace(*mvnig);
  collapse_y_ = config_.collapse && mvnig_terms_.has_value();
  fully_collapsed_ = fully_collapsed_ && collapse_y_;
  prepare();
}

void GibbsSampler::prepare() {
  const std::size_t n = data_.size();
  const SufficientStats empty = SufficientStats::empty(state_.spec, layout_);
  prior_log_pred_.assign(n, 0.0);
  std::optional<MvnigPosterior> prior_y;
  if (collapse_y_) prior_y.emplace(*mvnig_terms_, empty.response);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double lp = 0.0;
    for (std::size_t j = 0; j < collapse_x_.size(); ++j) {
      if (collapse_x_[j]) {
        lp += covariate_log_predictive(state_.spec.base.covariates[j], empty.covariates[j],
                                       data_.covariates(r, static_cast<Eigen::Index>(j)));
      }
    }
    if (prior_y) lp += prior_y->log_predictive(data_.design.row(r).transpose(), data_.responses(r));
    prior_log_pred_[i] = lp;
  }
}

void GibbsSampler::rebuild_stats() {
  for (Cluster& c : state_.clusters) {
    c.stats = SufficientStats::empty(state_.spec, layout_);
    c.count = 0;
    c.response_posterior.reset();
  }
  for (std::size_t i = 0; i < state_.labels.size(); ++i) {
    Cluster& c = state_.clusters.at(state_.labels[i]);
    c.stats.add(data_, i);
    ++c.count;
  }
}

const MvnigPosterior& GibbsSampler::response_posterior(const Cluster& cluster) const {
  if (!cluster.response_posterior) {
    cluster.response_posterior = std::make_shared<const MvnigPosterior>(*mvnig_terms_, cluster.stats.response);
  }
  return *cluster.response_posterior;
}

double GibbsSampler::cluster_log_likelihood(const Cluster& cluster, std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  const BaseMeasureSpec& base = state_.spec.base;
  double out = 0.0;
  for (std::size_t j = 0; j < collapse_x_.size(); ++j) {
    const double v = data_.covariates(r, static_cast<Eigen::Index>(j));
    out += collapse_x_[j] ? covariate_log_predictive(base.covariates[j], cluster.stats.covariates[j], v)
                          : covariate_logpdf(cluster.params.x[j], v);
  }
  const auto design_row = data_.design.row(r).transpose();
  if (collapse_y_) {
    out += response_posterior(cluster).log_predictive(design_row, data_.responses(r));
  } else {
    const ResponseParams& y = cluster.params.y;
    out += glm_logpdf_eta(state_.spec.family, y.beta.transpose() * design_row, y.var, data_.responses(r));
  }
  return out;
}

double GibbsSampler::new_cluster_log_likelihood(const ClusterParams& params, std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  double out = prior_log_pred_[i];
  for (std::size_t j = 0; j < collapse_x_.size(); ++j) {
    if (!collapse_x_[j]) out += covariate_logpdf(params.x[j], data_.covariates(r, static_cast<Eigen::Index>(j)));
  }
  if (!collapse_y_) {
    out += glm_logpdf_eta(state_.spec.family, params.y.beta.transpose() * data_.design.row(r).transpose(),
                          params.y.var, data_.responses(r));
  }
  return out;
}

void GibbsSampler::compute_weights(std::size_t i, ClusterId skip, const ClusterParams* vacated, Rng& rng) {
  weights_.clear();
  weight_ids_.clear();
  aux_.clear();
  for (const Cluster& c : state_.clusters) {
    if (c.id == skip || c.count == 0) continue;
    weights_.push_back(std::log(static_cast<double>(c.count)) + cluster_log_likelihood(c, i));
    weight_ids_.push_back(c.id);
  }
  const double log_alpha = std::log(state_.alpha);
  if (fully_collapsed_) {
    weights_.push_back(log_alpha + prior_log_pred_[i]);
    return;
  }
  const std::size_t m = config_.aux_count;
  const double log_share = log_alpha - std::log(static_cast<double>(m));
  for (std::size_t a = 0; a < m; ++a) {
    aux_.push_back(a == 0 && vacated ? *vacated : sample_prior(state_.spec.base, rng));
    weights_.push_back(log_share + new_cluster_log_likelihood(aux_.back(), i));
  }
}

void GibbsSampler::assign(std::size_t i) {
  const ClusterId old = state_.labels[i];
  Cluster* vacated = nullptr;
  if (old != kUnassigned) {
    Cluster& c = state_.clusters.at(old);
    --c.count;
    c.stats.remove(data_, i);
    c.response_posterior.reset();
    if (c.count == 0) vacated = &c;
  }
  compute_weights(i, vacated ? old : kUnassigned, vacated ? &vacated->params : nullptr, state_.rng);
  const std::size_t k = state_.rng.categorical_log(weights_);
  const std::size_t existing = weight_ids_.size();

  auto join = [&](Cluster& c) {
    ++c.count;
    c.stats.add(data_, i);
    c.response_posterior.reset();
    state_.labels[i] = c.id;
  };
  if (k < existing) {
    join(state_.clusters.at(weight_ids_[k]));
    if (vacated) state_.clusters.erase(old);
    return;
  }
  const std::size_t a = k - existing;
  if (vacated && (fully_collapsed_ || a == 0)) {
    join(*vacated);
    return;
  }
  if (vacated) state_.clusters.erase(old);
  Cluster fresh;
  fresh.id = state_.next_id++;
  fresh.params = fully_collapsed_ ? sample_prior(state_.spec.base, state_.rng) : std::move(aux_[a]);
  fresh.stats = SufficientStats::empty(state_.spec, layout_);
  join(state_.clusters.insert(std::move(fresh)));
}

void GibbsSampler::initialize() {
  state_.labels.assign(data_.size(), kUnassigned);
  state_.clusters.clear();
  state_.alpha = state_.spec.initial_alpha();
  for (std::size_t i = 0; i < data_.size(); ++i) assign(i);
  refresh_params();
}

void GibbsSampler::set_state(const std::vector<ClusterId>& labels, const std::vector<ClusterParams>& params,
                             double alpha) {
  if (labels.size() != data_.size()) throw LengthMismatch("labels must cover every datum");
  ClusterId k = 0;
  for (ClusterId z : labels) k = std::max(k, z + 1);
  if (!params.empty() && params.size() != k) throw LengthMismatch("one parameter set per cluster required");
  state_.labels = labels;
  state_.clusters.clear();
  for (ClusterId id = 0; id < k; ++id) {
    Cluster c;
    c.id = id;
    c.params = params.empty() ? sample_prior(state_.spec.base, state_.rng) : params[id];
    state_.clusters.insert(std::move(c));
  }
  state_.next_id = k;
  state_.alpha = alpha;
  rebuild_stats();
  for (ClusterId id = k; id-- > 0;) {
    if (state_.clusters.at(id).count == 0) state_.clusters.erase(id);
  }
}

void GibbsSampler::set_data(PreparedData data) {
  if (data.size() != data_.size()) throw LengthMismatch("replacement data must keep n");
  data_ = std::move(data);
  prepare();
  rebuild_stats();
}

AssignmentDistribution GibbsSampler::assignment_logprobs(std::size_t i, Rng& rng) {
  const ClusterId own = state_.labels[i];
  Cluster& c = state_.clusters.at(own);
  const SufficientStats saved = c.stats;
  --c.count;
  c.stats.remove(data_, i);
  c.response_posterior.reset();
  const bool singleton = c.count == 0;
  compute_weights(i, singleton ? own : kUnassigned, singleton ? &c.params : nullptr, rng);
  ++c.count;
  c.stats = saved;
  c.response_posterior.reset();

  AssignmentDistribution out;
  out.clusters = weight_ids_;
  Eigen::Map<const Eigen::VectorXd> w(weights_.data(), static_cast<Eigen::Index>(weights_.size()));
  const double total = log_sum_exp(w);
  out.log_probs.reserve(weights_.size());
  for (double v : weights_) out.log_probs.push_back(v - total);
  out.auxiliary = aux_;
  return out;
}

void GibbsSampler::update_labels() {
  for (std::size_t i = 0; i < data_.size(); ++i) assign(i);
}

std::vector<std::vector<std::size_t>> GibbsSampler::members() const {
  std::vector<std::vector<std::size_t>> out(state_.clusters.size());
  for (std::size_t i = 0; i < state_.labels.size(); ++i) out[state_.clusters.slot_of(state_.labels[i])].push_back(i);
  return out;
}

void GibbsSampler::refresh_params() {
  const auto lists = members();
  for (std::size_t s = 0; s < state_.clusters.size(); ++s) {
    Cluster& c = state_.clusters[s];
    const MvnigPosterior* post = mvnig_terms_ ? &response_posterior(c) : nullptr;
    c.params = posterior_sample_params(state_.spec, data_, lists[s], c.stats, c.params, mh_, state_.rng, post);
  }
}

void GibbsSampler::update_alpha() {
  if (const auto* prior = std::get_if<GammaAlphaPrior>(&state_.spec.alpha)) {
    state_.alpha = resample_alpha(state_.alpha, state_.clusters.size(), data_.size(), *prior, state_.rng);
  }
}

void GibbsSampler::sweep() {
  ++iteration_;
  mh_.set_iteration(iteration_);
  mh_.set_adapting(config_.adapt_during_burnin && iteration_ <= config_.burn_in);
  if (iteration_ == config_.burn_in + 1) mh_.reset_counts();
  rebuild_stats();
  update_labels();
  refresh_params();
  update_alpha();
}

double GibbsSampler::log_joint() const {
  const ModelSpec& spec = state_.spec;
  double out = 0.0;
  if (const auto* prior = std::get_if<GammaAlphaPrior>(&spec.alpha)) {
    out += prior->shape * std::log(prior->rate) - std::lgamma(prior->shape) +
           (prior->shape - 1.0) * std::log(state_.alpha) - prior->rate * state_.alpha;
  }
  std::vector<std::size_t> sizes;
  sizes.reserve(state_.clusters.size());
  for (const Cluster& c : state_.clusters) sizes.push_back(c.count);
  out += crp_log_partition_prob(sizes, state_.alpha);

  const auto lists = members();
  for (std::size_t s = 0; s < state_.clusters.size(); ++s) {
    const Cluster& c = state_.clusters[s];
    for (std::size_t j = 0; j < collapse_x_.size(); ++j) {
      const CovariatePrior& prior = spec.base.covariates[j];
      if (collapse_x_[j]) {
        out += covariate_log_marginal(prior, c.stats.covariates[j]);
        continue;
      }
      out += covariate_prior_logdensity(prior, c.params.x[j]);
      for (std::size_t i : lists[s]) {
        out += covariate_logpdf(c.params.x[j], data_.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
    }
    if (collapse_y_) {
      out += response_posterior(c).log_marginal();
      continue;
    }
    out += response_prior_logdensity(spec.base.response, c.params.y);
    for (std::size_t i : lists[s]) {
      const auto r = static_cast<Eigen::Index>(i);
      out += glm_logpdf_eta(spec.family, c.params.y.beta.transpose() * data_.design.row(r).transpose(), c.params.y.var,
                            data_.responses(r));
    }
  }
  return out;
}

PosteriorSample GibbsSampler::snapshot() const {
  PosteriorSample out;
  out.alpha = state_.alpha;
  out.iteration = iteration_;
  out.labels.reserve(state_.labels.size());
  for (ClusterId z : state_.labels) out.labels.push_back(state_.clusters.slot_of(z));
  out.clusters.reserve(state_.clusters.size());
  for (const Cluster& c : state_.clusters) out.clusters.push_back({c.params, c.count, c.stats});
  return out;
}

ChainDiagnostics run_chain(const Dataset& data, const ModelSpec& spec, const ChainConfig& config,
                           const SampleVisitor& visit) {
  config.check();
  const ValidationReport report = validate_dataset(data, spec);
  if (!report.ok()) {
    std::string msg = "invalid dataset/spec:";
    for (const std::string& v : report.violations) msg += "\n  " + v;
    throw ValidationError(msg);
  }
  if (data.size() == 0) throw EmptyInput("training data has no rows");
  GibbsSampler sampler(spec, data, config);
  sampler.initialize();
  ChainDiagnostics diag;
  diag.trace.reserve(config.total_iterations);
  for (std::size_t t = 1; t <= config.total_iterations; ++t) {
    sampler.sweep();
    diag.trace.push_back({t, sampler.log_joint(), sampler.state().clusters.size(), sampler.state().alpha});
    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) visit(sampler.snapshot());
  }
  diag.acceptance_rate = sampler.mh().acceptance_rate();
  diag.proposals = sampler.mh().proposals();
  diag.final_steps = sampler.mh().steps();
  return diag;
}

ChainResult run_chain(const Dataset& data, const ModelSpec& spec, const ChainConfig& config) {
  ChainResult out;
  out.samples.reserve(config.total_iterations > config.burn_in && config.thin ? config.num_samples() : 0);
  out.diagnostics = run_chain(data, spec, config, [&](const PosteriorSample& s) { out.samples.push_back(s); });
  return out;
}

void write_diagnostics_csv(const ChainDiagnostics& diagnostics, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "iteration,log_joint,num_clusters,alpha\n";
  char buf[128];
  for (const IterationRecord& r : diagnostics.trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu,%.17g\n", r.iteration, r.log_joint, r.num_clusters, r.alpha);
    out << buf;
  }
}

}  // namespace dpglm
