#include "dpglm/glm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dpglm/errors.hpp"

namespace dpglm {

namespace {

double clamp_eta(double eta) { return std::clamp(eta, -kEtaClamp, kEtaClamp); }

void check_support(Family family, double y, Eigen::Index classes) {
  switch (family) {
    case Family::GaussianLinear:
      if (!std::isfinite(y)) throw OutOfSupport("Gaussian response must be finite");
      break;
    case Family::PoissonLog:
      if (!(y >= 0.0) || std::floor(y) != y) throw OutOfSupport("count response must be a nonnegative integer");
      break;
    case Family::MultinomialLogistic:
      if (!(y >= 0.0) || std::floor(y) != y || y >= static_cast<double>(classes)) {
        throw OutOfSupport("unknown class " + std::to_string(y));
      }
      break;
  }
}

}  // namespace

LinearPredictor linear_predictor(const ResponseParams& theta,
                                 const Eigen::Ref<const Eigen::VectorXd>& design_row) {
  if (theta.beta.rows() != design_row.size()) {
    throw DimensionMismatch("coefficients have " + std::to_string(theta.beta.rows()) +
                            " rows, design row has " + std::to_string(design_row.size()));
  }
  return theta.beta.transpose() * design_row;
}

LinearPredictor linear_predictor(const ResponseParams& theta,
                                 const Eigen::Ref<const Eigen::VectorXd>& covariate_row,
                                 const DesignLayout& layout) {
  return linear_predictor(theta, layout.row(covariate_row));
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& eta) {
  Eigen::VectorXd z = eta.unaryExpr([](double e) { return clamp_eta(e); });
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}

Eigen::VectorXd glm_expectation(Family family, const ResponseParams& theta,
                                const Eigen::Ref<const Eigen::VectorXd>& design_row) {
  const LinearPredictor eta = linear_predictor(theta, design_row);
  switch (family) {
    case Family::GaussianLinear: return eta;
    case Family::PoissonLog: return Eigen::VectorXd::Constant(1, std::exp(clamp_eta(eta(0))));
    case Family::MultinomialLogistic: return softmax(eta);
  }
  return eta;
}

double glm_logpdf_eta(Family family, const Eigen::Ref<const Eigen::VectorXd>& eta, double var, double y) {
  switch (family) {
    case Family::GaussianLinear: {
      const double r = y - eta(0);
      return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
    }
    case Family::PoissonLog: {
      const double e = clamp_eta(eta(0));
      return y * e - std::exp(e) - std::lgamma(y + 1.0);
    }
    case Family::MultinomialLogistic: {
      Eigen::VectorXd z = eta.unaryExpr([](double v) { return clamp_eta(v); });
      return z(static_cast<Eigen::Index>(y)) - log_sum_exp(z);
    }
  }
  return 0.0;
}

double glm_logpdf(Family family, const ResponseParams& theta,
                  const Eigen::Ref<const Eigen::VectorXd>& design_row, double y) {
  check_support(family, y, theta.beta.cols());
  return glm_logpdf_eta(family, linear_predictor(theta, design_row), theta.var, y);
}

double glm_sample(Family family, const ResponseParams& theta,
                  const Eigen::Ref<const Eigen::VectorXd>& design_row, Rng& rng) {
  const LinearPredictor eta = linear_predictor(theta, design_row);
  switch (family) {
    case Family::GaussianLinear: return rng.normal(eta(0), std::sqrt(theta.var));
    case Family::PoissonLog: return static_cast<double>(rng.poisson(std::exp(clamp_eta(eta(0)))));
    case Family::MultinomialLogistic: {
      Eigen::VectorXd z = eta.unaryExpr([](double v) { return clamp_eta(v); });
      return static_cast<double>(rng.categorical_log({z.data(), static_cast<std::size_t>(z.size())}));
    }
  }
  return 0.0;
}

}  // namespace dpglm
