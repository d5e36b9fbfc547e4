#include "dpglm/base_measures.hpp"

#include <cmath>
#include <numbers>

#include "dpglm/errors.hpp"
#include "dpglm/mh.hpp"

namespace dpglm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

double log_inverse_gamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_student_t(double x, double df, double loc, double scale2) {
  const double r = x - loc;
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * std::numbers::pi * scale2) -
         0.5 * (df + 1.0) * std::log1p(r * r / (df * scale2));
}

struct NigPosterior {
  double shape, scale, loc, nu;
};

NigPosterior nig_update(const NigPrior& p, const CovariateStats& s) {
  const double nu_n = p.nu + s.n;
  const double loc_n = (p.nu * p.loc + s.sum) / nu_n;
  double scale_n = p.scale + 0.5 * (s.sumsq + p.nu * p.loc * p.loc - nu_n * loc_n * loc_n);
  if (scale_n < p.scale) scale_n = p.scale;  // rounding only; exact value is >= prior scale
  return {p.shape + 0.5 * s.n, scale_n, loc_n, nu_n};
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

PreparedData::PreparedData(const Dataset& dataset, const DesignLayout& layout)
    : covariates(dataset.covariates), design(layout.matrix(dataset.covariates)), responses(dataset.responses) {}

SufficientStats SufficientStats::empty(const ModelSpec& spec, const DesignLayout& layout) {
  SufficientStats s;
  s.covariates.resize(spec.base.covariates.size());
  for (std::size_t j = 0; j < s.covariates.size(); ++j) {
    if (const auto* dir = std::get_if<DirichletLevels>(&spec.base.covariates[j])) {
      s.covariates[j].counts.assign(dir->concentration.size(), 0.0);
    }
  }
  s.tracks_response = std::holds_alternative<MvnigPrior>(spec.base.response);
  if (s.tracks_response) {
    const auto p = static_cast<Eigen::Index>(layout.width());
    s.response.xtx = Eigen::MatrixXd::Zero(p, p);
    s.response.xty = Eigen::VectorXd::Zero(p);
  }
  return s;
}

void SufficientStats::add(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& design,
                          double y, double weight) {
  n += weight;
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    CovariateStats& c = covariates[j];
    const double v = x(static_cast<Eigen::Index>(j));
    c.n += weight;
    if (c.counts.empty()) {
      c.sum += weight * v;
      c.sumsq += weight * v * v;
    } else {
      c.counts[static_cast<std::size_t>(v)] += weight;
    }
  }
  if (tracks_response) {
    response.xtx.selfadjointView<Eigen::Lower>().rankUpdate(design, weight);
    response.xtx.triangularView<Eigen::StrictlyUpper>() = response.xtx.transpose();
    response.xty += weight * y * design;
    response.yty += weight * y * y;
    response.n += weight;
  }
}

void SufficientStats::add(const PreparedData& data, std::size_t i, double weight) {
  const auto r = static_cast<Eigen::Index>(i);
  add(data.covariates.row(r).transpose(), data.design.row(r).transpose(), data.responses(r), weight);
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& other) {
  n += other.n;
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    covariates[j].n += other.covariates[j].n;
    covariates[j].sum += other.covariates[j].sum;
    covariates[j].sumsq += other.covariates[j].sumsq;
    for (std::size_t k = 0; k < covariates[j].counts.size(); ++k) covariates[j].counts[k] += other.covariates[j].counts[k];
  }
  if (tracks_response) {
    response.xtx += other.response.xtx;
    response.xty += other.response.xty;
    response.yty += other.response.yty;
    response.n += other.response.n;
  }
  return *this;
}

SufficientStats stats_of(const ModelSpec& spec, const DesignLayout& layout, const PreparedData& data,
                         std::span<const std::size_t> rows) {
  SufficientStats s = SufficientStats::empty(spec, layout);
  for (std::size_t i : rows) s.add(data, i);
  return s;
}

double nig_log_marginal(const NigPrior& prior, const CovariateStats& stats) {
  if (stats.n == 0.0) return 0.0;
  const NigPosterior post = nig_update(prior, stats);
  return std::lgamma(post.shape) - std::lgamma(prior.shape) + prior.shape * std::log(prior.scale) -
         post.shape * std::log(post.scale) + 0.5 * (std::log(prior.nu) - std::log(post.nu)) -
         0.5 * stats.n * kLogTwoPi;
}

double nig_log_predictive(const NigPrior& prior, const CovariateStats& stats, double x) {
  const NigPosterior post = nig_update(prior, stats);
  const double scale2 = post.scale * (post.nu + 1.0) / (post.shape * post.nu);
  return log_student_t(x, 2.0 * post.shape, post.loc, scale2);
}

double dirichlet_log_marginal(const DirichletLevels& prior, const CovariateStats& stats) {
  double total_a = 0.0, total_n = 0.0, out = 0.0;
  for (std::size_t k = 0; k < prior.concentration.size(); ++k) {
    const double a = prior.concentration[k];
    const double c = stats.counts.empty() ? 0.0 : stats.counts[k];
    total_a += a;
    total_n += c;
    if (c != 0.0) out += std::lgamma(a + c) - std::lgamma(a);
  }
  return out + std::lgamma(total_a) - std::lgamma(total_a + total_n);
}

double dirichlet_log_predictive(const DirichletLevels& prior, const CovariateStats& stats, int level) {
  double total_a = 0.0, total_n = 0.0;
  for (std::size_t k = 0; k < prior.concentration.size(); ++k) {
    total_a += prior.concentration[k];
    total_n += stats.counts.empty() ? 0.0 : stats.counts[k];
  }
  const auto k = static_cast<std::size_t>(level);
  const double c = stats.counts.empty() ? 0.0 : stats.counts[k];
  return std::log((c + prior.concentration[k]) / (total_n + total_a));
}

double covariate_log_predictive(const CovariatePrior& prior, const CovariateStats& stats, double x) {
  return std::visit(
      Overloaded{[&](const NigPrior& p) { return nig_log_predictive(p, stats, x); },
                 [&](const DirichletLevels& p) { return dirichlet_log_predictive(p, stats, static_cast<int>(x)); },
                 [&](const LogNormalMeanVar&) -> double {
                   throw NonConjugateBase("log-normal covariate prior has no collapsed predictive");
                 }},
      prior);
}

double covariate_log_marginal(const CovariatePrior& prior, const CovariateStats& stats) {
  return std::visit(
      Overloaded{[&](const NigPrior& p) { return nig_log_marginal(p, stats); },
                 [&](const DirichletLevels& p) { return dirichlet_log_marginal(p, stats); },
                 [&](const LogNormalMeanVar&) -> double {
                   throw NonConjugateBase("log-normal covariate prior has no closed-form marginal");
                 }},
      prior);
}

MvnigPriorTerms::MvnigPriorTerms(const MvnigPrior& prior) : shape(prior.shape), scale(prior.scale) {
  const Eigen::Index p = prior.mean.size();
  Eigen::LLT<Eigen::MatrixXd> cov_llt(prior.cov);
  precision = cov_llt.solve(Eigen::MatrixXd::Identity(p, p));
  precision_mean = precision * prior.mean;
  mean_quad = prior.mean.dot(precision_mean);
  for (Eigen::Index i = 0; i < p; ++i) log_det_cov += 2.0 * std::log(cov_llt.matrixL()(i, i));
}

MvnigPosterior::MvnigPosterior(const MvnigPrior& prior, const ResponseStats& stats)
    : MvnigPosterior(MvnigPriorTerms(prior), stats) {}

MvnigPosterior::MvnigPosterior(const MvnigPriorTerms& prior, const ResponseStats& stats) {
  const double n = stats.xtx.size() == 0 ? 0.0 : stats.n;
  Eigen::MatrixXd precision = prior.precision;
  Eigen::VectorXd rhs = prior.precision_mean;
  double yty = 0.0;
  if (n != 0.0) {
    precision += stats.xtx;
    rhs += stats.xty;
    yty = stats.yty;
  }
  precision_llt_.compute(precision);
  mean_ = precision_llt_.solve(rhs);
  shape_ = prior.shape + 0.5 * n;
  scale_ = prior.scale + 0.5 * (prior.mean_quad + yty - mean_.dot(rhs));
  if (scale_ < prior.scale) scale_ = prior.scale;
  double log_det_precision = 0.0;
  for (Eigen::Index i = 0; i < precision.rows(); ++i) log_det_precision += 2.0 * std::log(precision_llt_.matrixL()(i, i));
  // log|cov^-1| - log|precision|
  log_marginal_ = n == 0.0 ? 0.0
                           : -0.5 * n * kLogTwoPi - 0.5 * (prior.log_det_cov + log_det_precision) +
                                 prior.shape * std::log(prior.scale) - shape_ * std::log(scale_) +
                                 std::lgamma(shape_) - std::lgamma(prior.shape);
}

double MvnigPosterior::log_predictive(const Eigen::Ref<const Eigen::VectorXd>& design_row, double y) const {
  const Eigen::VectorXd w = precision_llt_.matrixL().solve(design_row);
  const double scale2 = (scale_ / shape_) * (1.0 + w.squaredNorm());
  return log_student_t(y, 2.0 * shape_, design_row.dot(mean_), scale2);
}

double MvnigPosterior::predictive_mean(const Eigen::Ref<const Eigen::VectorXd>& design_row) const {
  return design_row.dot(mean_);
}

ResponseParams MvnigPosterior::sample(Rng& rng) const {
  ResponseParams out;
  out.var = rng.inverse_gamma(shape_, scale_);
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const Eigen::VectorXd offset = precision_llt_.matrixU().solve(z);
  out.beta = mean_ + std::sqrt(out.var) * offset;
  return out;
}

double covariate_posterior_predictive_logdensity(const BaseMeasureSpec& base, const SufficientStats& stats,
                                                 const Eigen::Ref<const Eigen::VectorXd>& x) {
  double out = 0.0;
  for (std::size_t j = 0; j < base.covariates.size(); ++j) {
    out += covariate_log_predictive(base.covariates[j], stats.covariates[j], x(static_cast<Eigen::Index>(j)));
  }
  return out;
}

double response_posterior_predictive_logdensity(const BaseMeasureSpec& base, const SufficientStats& stats,
                                                const Eigen::Ref<const Eigen::VectorXd>& design_row, double y) {
  const auto* prior = std::get_if<MvnigPrior>(&base.response);
  if (!prior) throw NonConjugateBase("response prior is not MVNIG");
  return MvnigPosterior(*prior, stats.response).log_predictive(design_row, y);
}

double response_log_marginal(const BaseMeasureSpec& base, const SufficientStats& stats) {
  const auto* prior = std::get_if<MvnigPrior>(&base.response);
  if (!prior) throw NonConjugateBase("response prior is not MVNIG");
  return MvnigPosterior(*prior, stats.response).log_marginal();
}

double log_marginal_likelihood(const BaseMeasureSpec& base, const SufficientStats& stats) {
  double out = response_log_marginal(base, stats);
  for (std::size_t j = 0; j < base.covariates.size(); ++j) {
    out += covariate_log_marginal(base.covariates[j], stats.covariates[j]);
  }
  return out;
}

double covariate_logpdf(const CovariateParams& params, double x) {
  if (const auto* g = std::get_if<GaussianParams>(&params)) return log_normal_pdf(x, g->mean, g->var);
  const auto& probs = std::get<std::vector<double>>(params);
  return std::log(probs[static_cast<std::size_t>(x)]);
}

double covariates_logpdf(const std::vector<CovariateParams>& params, const Eigen::Ref<const Eigen::VectorXd>& x) {
  double out = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) out += covariate_logpdf(params[j], x(static_cast<Eigen::Index>(j)));
  return out;
}

CovariateParams sample_covariate_prior(const CovariatePrior& prior, Rng& rng) {
  return std::visit(Overloaded{[&](const NigPrior& p) -> CovariateParams {
                                 const double var = rng.inverse_gamma(p.shape, p.scale);
                                 return GaussianParams{rng.normal(p.loc, std::sqrt(var / p.nu)), var};
                               },
                               [&](const LogNormalMeanVar& p) -> CovariateParams {
                                 const double mean = rng.normal(p.mean_loc, p.mean_sd);
                                 return GaussianParams{mean, std::exp(rng.normal(p.log_var_loc, p.log_var_sd))};
                               },
                               [&](const DirichletLevels& p) -> CovariateParams { return rng.dirichlet(p.concentration); }},
                    prior);
}

ResponseParams sample_response_prior(const ResponsePrior& prior, Rng& rng) {
  return std::visit(Overloaded{[&](const MvnigPrior& p) {
                                 ResponseParams out;
                                 out.var = rng.inverse_gamma(p.shape, p.scale);
                                 Eigen::VectorXd z(p.mean.size());
                                 for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
                                 Eigen::LLT<Eigen::MatrixXd> llt(p.cov);
                                 const Eigen::VectorXd offset = llt.matrixL() * z;
                                 out.beta = p.mean + std::sqrt(out.var) * offset;
                                 return out;
                               },
                               [&](const IndependentGaussianPrior& p) {
                                 ResponseParams out;
                                 out.beta.resize(p.mean.rows(), p.mean.cols());
                                 for (Eigen::Index c = 0; c < p.mean.cols(); ++c) {
                                   for (Eigen::Index r = 0; r < p.mean.rows(); ++r) {
                                     out.beta(r, c) = rng.normal(p.mean(r, c), std::sqrt(p.var(r, c)));
                                   }
                                 }
                                 out.var = p.dispersion ? std::exp(rng.normal(p.dispersion->loc, p.dispersion->sd)) : 1.0;
                                 return out;
                               }},
                    prior);
}

ClusterParams sample_prior(const BaseMeasureSpec& base, Rng& rng) {
  ClusterParams out;
  out.x.reserve(base.covariates.size());
  for (const CovariatePrior& prior : base.covariates) out.x.push_back(sample_covariate_prior(prior, rng));
  out.y = sample_response_prior(base.response, rng);
  return out;
}

double covariate_prior_logdensity(const CovariatePrior& prior, const CovariateParams& params) {
  return std::visit(
      Overloaded{[&](const NigPrior& p) {
                   const auto& g = std::get<GaussianParams>(params);
                   return log_inverse_gamma_pdf(g.var, p.shape, p.scale) + log_normal_pdf(g.mean, p.loc, g.var / p.nu);
                 },
                 [&](const LogNormalMeanVar& p) {
                   const auto& g = std::get<GaussianParams>(params);
                   return log_normal_pdf(g.mean, p.mean_loc, p.mean_sd * p.mean_sd) +
                          log_normal_pdf(std::log(g.var), p.log_var_loc, p.log_var_sd * p.log_var_sd);
                 },
                 [&](const DirichletLevels& p) {
                   const auto& probs = std::get<std::vector<double>>(params);
                   double total = 0.0, out = 0.0;
                   for (std::size_t k = 0; k < probs.size(); ++k) {
                     total += p.concentration[k];
                     out += (p.concentration[k] - 1.0) * std::log(probs[k]) - std::lgamma(p.concentration[k]);
                   }
                   return out + std::lgamma(total);
                 }},
      prior);
}

double response_prior_logdensity(const ResponsePrior& prior, const ResponseParams& params) {
  return std::visit(
      Overloaded{[&](const MvnigPrior& p) {
                   Eigen::LLT<Eigen::MatrixXd> llt(p.cov);
                   const Eigen::VectorXd r = params.beta.col(0) - p.mean;
                   const Eigen::VectorXd w = llt.matrixL().solve(r);
                   double log_det = 0.0;
                   for (Eigen::Index i = 0; i < p.mean.size(); ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
                   const double k = static_cast<double>(p.mean.size());
                   return log_inverse_gamma_pdf(params.var, p.shape, p.scale) -
                          0.5 * (k * (kLogTwoPi + std::log(params.var)) + log_det + w.squaredNorm() / params.var);
                 },
                 [&](const IndependentGaussianPrior& p) {
                   double out = 0.0;
                   for (Eigen::Index c = 0; c < p.mean.cols(); ++c) {
                     for (Eigen::Index r = 0; r < p.mean.rows(); ++r) {
                       out += log_normal_pdf(params.beta(r, c), p.mean(r, c), p.var(r, c));
                     }
                   }
                   if (p.dispersion) {
                     out += log_normal_pdf(std::log(params.var), p.dispersion->loc, p.dispersion->sd * p.dispersion->sd);
                   }
                   return out;
                 }},
      prior);
}

CovariateParams sample_covariate_posterior(const CovariatePrior& prior, const CovariateStats& stats, Rng& rng) {
  return std::visit(Overloaded{[&](const NigPrior& p) -> CovariateParams {
                                 const NigPosterior post = nig_update(p, stats);
                                 const double var = rng.inverse_gamma(post.shape, post.scale);
                                 return GaussianParams{rng.normal(post.loc, std::sqrt(var / post.nu)), var};
                               },
                               [&](const DirichletLevels& p) -> CovariateParams {
                                 std::vector<double> conc = p.concentration;
                                 for (std::size_t k = 0; k < conc.size(); ++k) conc[k] += stats.counts[k];
                                 return rng.dirichlet(conc);
                               },
                               [&](const LogNormalMeanVar&) -> CovariateParams {
                                 throw NonConjugateBase("log-normal covariate prior has no exact posterior draw");
                               }},
                    prior);
}

ClusterParams posterior_sample_params(const ModelSpec& spec, const PreparedData& data,
                                      std::span<const std::size_t> members, const SufficientStats& stats,
                                      const ClusterParams& current, MhKernel& mh, Rng& rng,
                                      const MvnigPosterior* response_posterior) {
  ClusterParams next = current;
  for (std::size_t j = 0; j < spec.base.covariates.size(); ++j) {
    const CovariatePrior& prior = spec.base.covariates[j];
    if (const auto* ln = std::get_if<LogNormalMeanVar>(&prior)) {
      mh.update_covariate(j, *ln, std::get<GaussianParams>(next.x[j]), data, members, rng);
    } else {
      next.x[j] = sample_covariate_posterior(prior, stats.covariates[j], rng);
    }
  }
  if (const auto* mvnig = std::get_if<MvnigPrior>(&spec.base.response)) {
    next.y = response_posterior ? response_posterior->sample(rng) : MvnigPosterior(*mvnig, stats.response).sample(rng);
  } else {
    mh.update_response(std::get<IndependentGaussianPrior>(spec.base.response), spec.family, next.y, data, members,
                       rng);
  }
  return next;
}

}  // namespace dpglm
