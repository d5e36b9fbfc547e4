#include "dpglm/mh.hpp"

#include <algorithm>
#include <cmath>

#include "dpglm/glm.hpp"

namespace dpglm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kMaxStep = 20.0;

double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

}  // namespace

MhKernel::MhKernel(const ModelSpec& spec, std::size_t design_width, const MhSteps& initial, double target_acceptance)
    : num_covariates_(spec.base.covariates.size()),
      design_width_(design_width),
      width_(spec.response_width()),
      target_(target_acceptance) {
  steps_.resize(response_var_coord() + 1);
  for (std::size_t j = 0; j < num_covariates_; ++j) {
    steps_[covariate_coord(j, false)] = initial.covariate_mean;
    steps_[covariate_coord(j, true)] = initial.covariate_log_var;
  }
  for (std::size_t c = 2 * num_covariates_; c < response_var_coord(); ++c) steps_[c] = initial.beta;
  steps_[response_var_coord()] = initial.response_log_var;
}

MhKernel MhKernel::fixed(const ModelSpec& spec, std::size_t design_width, double step) {
  return MhKernel(spec, design_width, MhSteps{step, step, step, step});
}

bool MhKernel::accept(std::size_t coord, double log_ratio, Rng& rng) {
  const bool ok = std::isfinite(log_ratio) && (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio);
  ++proposals_;
  if (ok) ++accepts_;
  if (adapting_ && steps_[coord] > 0.0) {
    const double gain = 1.0 / std::pow(1.0 + static_cast<double>(iteration_), 0.6);
    steps_[coord] = std::min(kMaxStep, steps_[coord] * std::exp(gain * ((ok ? 1.0 : 0.0) - target_)));
  }
  return ok;
}

double MhKernel::acceptance_rate() const {
  return proposals_ == 0 ? 0.0 : static_cast<double>(accepts_) / static_cast<double>(proposals_);
}

void MhKernel::reset_counts() {
  proposals_ = 0;
  accepts_ = 0;
}

void MhKernel::update_covariate(std::size_t dim, const LogNormalMeanVar& prior, GaussianParams& params,
                                const PreparedData& data, std::span<const std::size_t> members, Rng& rng) {
  const auto col = static_cast<Eigen::Index>(dim);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i : members) {
    const double v = data.covariates(static_cast<Eigen::Index>(i), col);
    s1 += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(members.size());
  const double mean_var = prior.mean_sd * prior.mean_sd;
  const double log_var_var = prior.log_var_sd * prior.log_var_sd;
  auto log_target = [&](double mean, double log_var) {
    const double var = std::exp(log_var);
    const double ss = s2 - 2.0 * mean * s1 + n * mean * mean;
    return log_normal_pdf(mean, prior.mean_loc, mean_var) + log_normal_pdf(log_var, prior.log_var_loc, log_var_var) -
           0.5 * (n * (kLogTwoPi + log_var) + ss / var);
  };
  double mean = params.mean;
  double log_var = std::log(params.var);
  double current = log_target(mean, log_var);

  const std::size_t cm = covariate_coord(dim, false);
  const double mean_prop = mean + steps_[cm] * rng.normal();
  const double at_mean = log_target(mean_prop, log_var);
  if (accept(cm, at_mean - current, rng)) {
    mean = mean_prop;
    current = at_mean;
  }
  const std::size_t cv = covariate_coord(dim, true);
  const double var_prop = log_var + steps_[cv] * rng.normal();
  const double at_var = log_target(mean, var_prop);
  if (accept(cv, at_var - current, rng)) log_var = var_prop;
  params.mean = mean;
  params.var = std::exp(log_var);
}

void MhKernel::update_response(const IndependentGaussianPrior& prior, Family family, ResponseParams& params,
                               const PreparedData& data, std::span<const std::size_t> members, Rng& rng) {
  const auto m = static_cast<Eigen::Index>(members.size());
  const Eigen::Index k = params.beta.cols();
  const Eigen::Index p = params.beta.rows();
  Eigen::MatrixXd eta(m, k);
  for (Eigen::Index r = 0; r < m; ++r) {
    eta.row(r) = data.design.row(static_cast<Eigen::Index>(members[static_cast<std::size_t>(r)])) * params.beta;
  }
  auto datum_ll = [&](Eigen::Index r, const Eigen::Ref<const Eigen::VectorXd>& e, double var) {
    return glm_logpdf_eta(family, e, var,
                          data.responses(static_cast<Eigen::Index>(members[static_cast<std::size_t>(r)])));
  };

  Eigen::VectorXd proposal_eta(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const std::size_t coord = beta_coord(j, c);
      const double delta = steps_[coord] * rng.normal();
      const double old_b = params.beta(j, c);
      const double new_b = old_b + delta;
      double log_ratio = log_normal_pdf(new_b, prior.mean(j, c), prior.var(j, c)) -
                         log_normal_pdf(old_b, prior.mean(j, c), prior.var(j, c));
      for (Eigen::Index r = 0; r < m; ++r) {
        const double xj = data.design(static_cast<Eigen::Index>(members[static_cast<std::size_t>(r)]), j);
        if (xj == 0.0) continue;
        proposal_eta = eta.row(r).transpose();
        proposal_eta(c) += delta * xj;
        log_ratio += datum_ll(r, proposal_eta, params.var) - datum_ll(r, eta.row(r).transpose(), params.var);
      }
      if (accept(coord, log_ratio, rng)) {
        params.beta(j, c) = new_b;
        for (Eigen::Index r = 0; r < m; ++r) {
          eta(r, c) += delta * data.design(static_cast<Eigen::Index>(members[static_cast<std::size_t>(r)]), j);
        }
      }
    }
  }

  if (family == Family::GaussianLinear && prior.dispersion) {
    double ss = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      const double res = data.responses(static_cast<Eigen::Index>(members[static_cast<std::size_t>(r)])) - eta(r, 0);
      ss += res * res;
    }
    const double disp_var = prior.dispersion->sd * prior.dispersion->sd;
    auto log_target = [&](double log_var) {
      return log_normal_pdf(log_var, prior.dispersion->loc, disp_var) -
             0.5 * (static_cast<double>(m) * log_var + ss / std::exp(log_var));
    };
    const std::size_t coord = response_var_coord();
    const double current = std::log(params.var);
    const double proposal = current + steps_[coord] * rng.normal();
    if (accept(coord, log_target(proposal) - log_target(current), rng)) params.var = std::exp(proposal);
  }
}

}  // namespace dpglm
