#include "dpglm/baselines.hpp"

#include <cmath>

#include "dpglm/errors.hpp"

namespace dpglm {

BaselineDesign::BaselineDesign(const DataSchema& schema) {
  for (std::size_t j = 0; j < schema.num_covariates(); ++j) {
    const ColumnKind& kind = schema.covariate(j).kind;
    const int levels = kind.type == ColumnType::Categorical ? kind.levels : 0;
    levels_.push_back(levels);
    width_ += levels == 0 ? 1 : static_cast<std::size_t>(levels - 1);
  }
}

Eigen::VectorXd BaselineDesign::row(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != levels_.size()) {
    throw DimensionMismatch("row has " + std::to_string(x.size()) + " covariates, design expects " +
                            std::to_string(levels_.size()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width_));
  out(0) = 1.0;
  Eigen::Index pos = 1;
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    const double v = x(static_cast<Eigen::Index>(j));
    if (levels_[j] == 0) {
      out(pos++) = v;
    } else {
      const auto level = static_cast<Eigen::Index>(v);
      if (level > 0) out(pos + level - 1) = 1.0;
      pos += levels_[j] - 1;
    }
  }
  return out;
}

Eigen::MatrixXd BaselineDesign::matrix(const Eigen::MatrixXd& covariates) const {
  Eigen::MatrixXd out(covariates.rows(), static_cast<Eigen::Index>(width_));
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) out.row(i) = row(covariates.row(i).transpose()).transpose();
  return out;
}

OlsModel fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (design.rows() != y.size()) throw LengthMismatch("design and response lengths differ");
  if (design.rows() == 0) throw EmptyInput("OLS needs at least one row");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  OlsModel out;
  out.beta = cod.solve(y);
  out.rank = cod.rank();
  out.rank_deficient = out.rank < design.cols();
  const Eigen::VectorXd resid = y - design * out.beta;
  const double dof = static_cast<double>(design.rows() - out.rank);
  out.residual_variance = dof > 0 ? resid.squaredNorm() / dof : 0.0;
  return out;
}

OlsModel fit_ols(const Dataset& data) {
  const BaselineDesign design(data.schema);
  OlsModel out = fit_ols(design.matrix(data.covariates), data.responses);
  out.design = design;
  return out;
}

double predict_ols(const OlsModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return model.design.row(x).dot(model.beta);
}

double poisson_log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  double out = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) out += y(i) * eta(i) - std::exp(eta(i)) - std::lgamma(y(i) + 1.0);
  return out;
}

PoissonGlmModel fit_poisson_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const IrlsOptions& options) {
  if (design.rows() != y.size()) throw LengthMismatch("design and response lengths differ");
  if (design.rows() == 0) throw EmptyInput("Poisson GLM needs at least one row");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y(i) >= 0.0) || std::floor(y(i)) != y(i)) throw OutOfSupport("Poisson response must be a count");
  }
  auto wls = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    const Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sw.asDiagonal() * design);
    return cod.solve(sw.cwiseProduct(z));
  };

  // Start from the working response of mu = y + 1/2.
  Eigen::VectorXd mu = y.array() + 0.5;
  Eigen::VectorXd eta = mu.array().log();
  PoissonGlmModel out;
  out.beta = wls(mu, eta + (y - mu).cwiseQuotient(mu));
  double ll = poisson_log_likelihood(design, y, out.beta);
  out.log_likelihood.push_back(ll);

  for (out.iterations = 1; out.iterations <= options.max_iterations; ++out.iterations) {
    if (out.beta.cwiseAbs().maxCoeff() > options.divergence_bound || !out.beta.allFinite()) {
      throw SeparationDetected("Poisson GLM coefficients diverge; the data may be separated");
    }
    eta = design * out.beta;
    mu = eta.array().exp();
    Eigen::VectorXd next = wls(mu, eta + (y - mu).cwiseQuotient(mu));
    double next_ll = poisson_log_likelihood(design, y, next);
    for (std::size_t h = 0; h < options.max_halvings && !(next_ll >= ll); ++h) {
      next = 0.5 * (next + out.beta);
      next_ll = poisson_log_likelihood(design, y, next);
    }
    if (!(next_ll >= ll)) {
      out.converged = true;  // no ascent direction left at working precision
      break;
    }
    const double change = (next - out.beta).cwiseAbs().maxCoeff();
    out.beta = next;
    ll = next_ll;
    out.log_likelihood.push_back(ll);
    if (change < options.tolerance) {
      out.converged = true;
      break;
    }
  }
  if (out.beta.cwiseAbs().maxCoeff() > options.divergence_bound) {
    throw SeparationDetected("Poisson GLM coefficients diverge; the data may be separated");
  }
  return out;
}

PoissonGlmModel fit_poisson_glm(const Dataset& data, const IrlsOptions& options) {
  const BaselineDesign design(data.schema);
  PoissonGlmModel out = fit_poisson_glm(design.matrix(data.covariates), data.responses, options);
  out.design = design;
  return out;
}

double predict_poisson_glm(const PoissonGlmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::exp(model.design.row(x).dot(model.beta));
}

ModelSpec dpmm_spec(const ModelSpec& spec) {
  ModelSpec out = spec;
  out.response_uses_covariates = false;
  if (auto* mvnig = std::get_if<MvnigPrior>(&out.base.response)) {
    if (mvnig->mean.size() > 1) {
      mvnig->mean = mvnig->mean.head(1).eval();
      mvnig->cov = mvnig->cov.topLeftCorner(1, 1).eval();
    }
  } else {
    auto& ind = std::get<IndependentGaussianPrior>(out.base.response);
    ind.mean = ind.mean.topRows(1).eval();
    ind.var = ind.var.topRows(1).eval();
  }
  return out;
}

std::vector<PredictiveEstimate> fit_predict_dpmm(const Dataset& data, const ModelSpec& spec, const ChainConfig& config,
                                                 const Eigen::MatrixXd& queries, const PredictorConfig& predictor) {
  const ModelSpec model = dpmm_spec(spec);
  const ChainResult chain = run_chain(data, model, config);
  const Predictor pred(model, data.schema, predictor);
  std::vector<PredictiveEstimate> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) out.push_back(pred.predict(chain.samples, queries.row(q).transpose()));
  return out;
}

}  // namespace dpglm
