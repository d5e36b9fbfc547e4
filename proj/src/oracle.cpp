#include "dpglm/oracle.hpp"

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "dpglm/errors.hpp"
#include "dpglm/glm.hpp"

namespace dpglm {

std::vector<Partition> enumerate_partitions(std::size_t n) {
  if (n > kMaxEnumeration) {
    throw TooLarge("partition enumeration is capped at n = " + std::to_string(kMaxEnumeration));
  }
  std::vector<Partition> out;
  if (n == 0) {
    out.emplace_back();
    return out;
  }
  // a[i] <= 1 + max(a[0..i-1]), a[0] = 0.
  std::vector<std::size_t> a(n, 0), top(n, 0);
  while (true) {
    std::size_t blocks = top[n - 1] + 1;
    Partition p(blocks);
    for (std::size_t i = 0; i < n; ++i) p[a[i]].push_back(i);
    out.push_back(std::move(p));
    std::size_t i = n - 1;
    while (i > 0 && a[i] == top[i - 1] + 1) --i;
    if (i == 0) break;
    ++a[i];
    top[i] = std::max(top[i - 1], a[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      a[j] = 0;
      top[j] = top[i];
    }
  }
  return out;
}

std::vector<std::size_t> restricted_growth_string(const Partition& partition, std::size_t n) {
  std::vector<std::size_t> out(n, 0);
  for (std::size_t b = 0; b < partition.size(); ++b) {
    for (std::size_t i : partition[b]) out.at(i) = b;
  }
  return out;
}

double crp_partition_log_prior(const Partition& partition, double alpha) {
  double out = 0.0;
  std::size_t n = 0;
  for (const auto& block : partition) {
    out += std::log(alpha);
    for (std::size_t k = 1; k < block.size(); ++k) out += std::log(static_cast<double>(k));
    n += block.size();
  }
  for (std::size_t i = 1; i <= n; ++i) out -= std::log(alpha + static_cast<double>(i) - 1.0);
  return out;
}

namespace {

bool fully_conjugate(const ModelSpec& spec) {
  if (!std::holds_alternative<MvnigPrior>(spec.base.response)) return false;
  for (const CovariatePrior& p : spec.base.covariates) {
    if (!is_conjugate(p)) return false;
  }
  return true;
}

struct ExactTerms {
  std::vector<Partition> partitions;
  std::vector<double> log_weights;
  DesignLayout layout;
  PreparedData data;
};

ExactTerms exact_terms(const Dataset& dataset, const ModelSpec& spec, double alpha) {
  if (!fully_conjugate(spec)) throw NonConjugateBase("exact posterior needs a fully conjugate base measure");
  if (dataset.size() > kMaxExactPosterior) {
    throw TooLarge("exact posterior is capped at n = " + std::to_string(kMaxExactPosterior));
  }
  ExactTerms t;
  t.layout = DesignLayout(dataset.schema, spec.response_uses_covariates);
  t.data = PreparedData(dataset, t.layout);
  t.partitions = enumerate_partitions(dataset.size());
  t.log_weights.reserve(t.partitions.size());
  for (const Partition& p : t.partitions) {
    double lw = crp_partition_log_prior(p, alpha);
    for (const auto& block : p) lw += log_marginal_likelihood(spec.base, stats_of(spec, t.layout, t.data, block));
    t.log_weights.push_back(lw);
  }
  return t;
}

}  // namespace

std::vector<double> exact_partition_posterior(const Dataset& data, const ModelSpec& spec, double alpha) {
  const ExactTerms t = exact_terms(data, spec, alpha);
  Eigen::Map<const Eigen::VectorXd> lw(t.log_weights.data(), static_cast<Eigen::Index>(t.log_weights.size()));
  const double total = log_sum_exp(lw);
  std::vector<double> out;
  for (double w : t.log_weights) out.push_back(std::exp(w - total));
  return out;
}

Eigen::VectorXd exact_posterior_expectation(const Dataset& dataset, const ModelSpec& spec, double alpha,
                                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  const ExactTerms t = exact_terms(dataset, spec, alpha);
  const auto& prior = std::get<MvnigPrior>(spec.base.response);
  const Eigen::VectorXd design = t.layout.row(x);
  const SufficientStats empty = SufficientStats::empty(spec, t.layout);

  Eigen::Map<const Eigen::VectorXd> lw(t.log_weights.data(), static_cast<Eigen::Index>(t.log_weights.size()));
  const double total = log_sum_exp(lw);
  const double prior_lx = covariate_posterior_predictive_logdensity(spec.base, empty, x);
  const double prior_mean = prior.mean.dot(design);

  double out = 0.0;
  for (std::size_t k = 0; k < t.partitions.size(); ++k) {
    const Partition& p = t.partitions[k];
    std::vector<double> lx;
    std::vector<double> means;
    for (const auto& block : p) {
      const SufficientStats s = stats_of(spec, t.layout, t.data, block);
      lx.push_back(std::log(static_cast<double>(block.size())) + covariate_posterior_predictive_logdensity(spec.base, s, x));
      means.push_back(MvnigPosterior(prior, s.response).predictive_mean(design));
    }
    lx.push_back(std::log(alpha) + prior_lx);
    means.push_back(prior_mean);
    Eigen::Map<const Eigen::VectorXd> w(lx.data(), static_cast<Eigen::Index>(lx.size()));
    const double norm = log_sum_exp(w);
    double e = 0.0;
    for (std::size_t b = 0; b < lx.size(); ++b) e += std::exp(lx[b] - norm) * means[b];
    out += std::exp(t.log_weights[k] - total) * e;
  }
  return Eigen::VectorXd::Constant(1, out);
}

// ---------------------------------------------------------------------------

namespace quadrature {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kTol = 1e-12;

double log_normal(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

double log_inv_gamma(double s2, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(s2) - scale / s2;
}

// Nested integrals use separate integrator objects (level 0 outer, 1 inner).
boost::math::quadrature::sinh_sinh<double>& line(int level = 0) {
  static thread_local boost::math::quadrature::sinh_sinh<double> q[2];
  return q[level];
}

boost::math::quadrature::tanh_sinh<double>& interval(int level = 0) {
  static thread_local boost::math::quadrature::tanh_sinh<double> q[2];
  return q[level];
}

// log of the integral over the real line of exp(g), with g evaluated on a
// grid first to find a stabilizing offset.
template <class G>
double log_integrate_line(G g, double lo_guess, double hi_guess) {
  double top = -INFINITY, arg = 0.0;
  for (int k = 0; k <= 400; ++k) {
    const double t = lo_guess + (hi_guess - lo_guess) * k / 400.0;
    const double v = g(t);
    if (v > top) {
      top = v;
      arg = t;
    }
  }
  // Far tails underflow to 0/0 or inf - inf; the true integrand is 0 there.
  const double value = line().integrate(
      [&](double u) {
        const double v = g(arg + u) - top;
        return std::isnan(v) ? 0.0 : std::exp(v);
      },
      kTol);
  return top + std::log(value);
}

}  // namespace

double nig_log_marginal(const NigPrior& prior, const std::vector<double>& data) {
  if (data.empty()) return 0.0;
  const double n = static_cast<double>(data.size());
  double sx = 0.0;
  for (double v : data) sx += v;
  const double center = (prior.nu * prior.loc + sx) / (prior.nu + n);
  // Inner Gaussian-shaped integral over the mean, in units of
  // sqrt(var / (nu + n)) around `center`; outer over t = log var.
  auto g = [&](double t) -> double {
    const double var = std::exp(t);
    if (!(var > 0.0) || !std::isfinite(var)) return -HUGE_VAL;
    const double unit = std::sqrt(var / (prior.nu + n));
    auto log_f = [&](double mu) {
      double out = log_normal(mu, prior.loc, var / prior.nu);
      for (double v : data) out += log_normal(v, mu, var);
      return out;
    };
    const double ref = log_f(center);
    if (!std::isfinite(ref)) return -HUGE_VAL;
    const double inner = line(1).integrate(
        [&](double s) {
          const double v = log_f(center + unit * s) - ref;
          return std::isnan(v) ? 0.0 : std::exp(std::min(v, 0.0));
        },
        kTol);
    return ref + std::log(inner * unit) + log_inv_gamma(var, prior.shape, prior.scale) + t;
  };
  return log_integrate_line(g, -20.0, 20.0);
}

double dirichlet_log_marginal(const DirichletLevels& prior, const std::vector<int>& data) {
  const std::size_t k = prior.concentration.size();
  if (k != 2 && k != 3) throw ValidationError("Dirichlet quadrature supports 2 or 3 levels");
  std::vector<double> a = prior.concentration;
  double log_norm = 0.0, total = 0.0;
  for (double c : prior.concentration) {
    log_norm += std::lgamma(c);
    total += c;
  }
  log_norm -= std::lgamma(total);  // log B(concentration)
  for (int v : data) a[static_cast<std::size_t>(v)] += 1.0;
  auto& q = interval();
  double value = 0.0;
  if (k == 2) {
    value = q.integrate([&](double p, double pc) {
      const double one_minus = p > 0.5 ? pc : 1.0 - p;
      return std::exp((a[0] - 1.0) * std::log(p) + (a[1] - 1.0) * std::log(one_minus));
    }, 0.0, 1.0, kTol);
  } else {
    value = q.integrate([&](double p1, double p1c) {
      const double rest = p1 > 0.5 ? p1c : 1.0 - p1;
      const double inner = interval(1).integrate([&](double u, double uc) {
        const double um = u > 0.5 ? uc : 1.0 - u;
        return std::exp((a[1] - 1.0) * std::log(u) + (a[2] - 1.0) * std::log(um));
      }, 0.0, 1.0, kTol);
      return std::exp((a[0] - 1.0) * std::log(p1) + (a[1] + a[2] - 1.0) * std::log(rest)) * inner;
    }, 0.0, 1.0, kTol);
  }
  return std::log(value) - log_norm;
}

double mvnig_log_marginal(const MvnigPrior& prior, const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  if (n == 0) return 0.0;
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n) + design * prior.cov * design.transpose();
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd r = y - design * prior.mean;
  const double quad = r.dot(llt.solve(r));
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  const double nn = static_cast<double>(n);
  auto g = [&](double t) -> double {
    const double var = std::exp(t);
    return -0.5 * (nn * (kLogTwoPi + t) + log_det + quad / var) + log_inv_gamma(var, prior.shape, prior.scale) + t;
  };
  return log_integrate_line(g, -20.0, 20.0);
}

double mvnig_log_marginal_full(const MvnigPrior& prior, const Eigen::VectorXd& y) {
  if (prior.mean.size() != 1) throw DimensionMismatch("full MVNIG quadrature needs an intercept-only prior");
  const NigPrior as_nig{prior.shape, prior.scale, prior.mean(0), 1.0 / prior.cov(0, 0)};
  return nig_log_marginal(as_nig, std::vector<double>(y.data(), y.data() + y.size()));
}

}  // namespace quadrature

double quadrature_check(const NigPrior& prior, const std::vector<double>& data, double query) {
  CovariateStats s;
  for (double v : data) {
    s.n += 1.0;
    s.sum += v;
    s.sumsq += v * v;
  }
  std::vector<double> extended = data;
  extended.push_back(query);
  const double quad_marginal = quadrature::nig_log_marginal(prior, data);
  const double quad_pred = quadrature::nig_log_marginal(prior, extended) - quad_marginal;
  return std::max(std::abs(nig_log_marginal(prior, s) - quad_marginal),
                  std::abs(nig_log_predictive(prior, s, query) - quad_pred));
}

double quadrature_check(const DirichletLevels& prior, const std::vector<int>& data, int query) {
  CovariateStats s;
  s.counts.assign(prior.concentration.size(), 0.0);
  for (int v : data) {
    s.n += 1.0;
    s.counts[static_cast<std::size_t>(v)] += 1.0;
  }
  std::vector<int> extended = data;
  extended.push_back(query);
  const double quad_marginal = quadrature::dirichlet_log_marginal(prior, data);
  const double quad_pred = quadrature::dirichlet_log_marginal(prior, extended) - quad_marginal;
  return std::max(std::abs(dirichlet_log_marginal(prior, s) - quad_marginal),
                  std::abs(dirichlet_log_predictive(prior, s, query) - quad_pred));
}

double quadrature_check(const MvnigPrior& prior, const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& query_row, double query_y) {
  ResponseStats s;
  s.xtx = design.transpose() * design;
  s.xty = design.transpose() * y;
  s.yty = y.squaredNorm();
  s.n = static_cast<double>(y.size());
  const MvnigPosterior post(prior, s);

  Eigen::MatrixXd ext_design(design.rows() + 1, design.cols());
  ext_design << design, query_row.transpose();
  Eigen::VectorXd ext_y(y.size() + 1);
  ext_y << y, query_y;

  const double quad_marginal = quadrature::mvnig_log_marginal(prior, design, y);
  const double quad_pred = quadrature::mvnig_log_marginal(prior, ext_design, ext_y) - quad_marginal;
  double out = std::max(std::abs(post.log_marginal() - quad_marginal), std::abs(post.log_predictive(query_row, query_y) - quad_pred));
  if (prior.mean.size() == 1) {
    const double full_marginal = quadrature::mvnig_log_marginal_full(prior, y);
    const double full_pred = quadrature::mvnig_log_marginal_full(prior, ext_y) - full_marginal;
    out = std::max({out, std::abs(post.log_marginal() - full_marginal), std::abs(post.log_predictive(query_row, query_y) - full_pred)});
  }
  return out;
}

}  // namespace dpglm
