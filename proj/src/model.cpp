#include "dpglm/model.hpp"

#include <cmath>
#include <sstream>

#include "dpglm/errors.hpp"

namespace dpglm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

}  // namespace

std::string to_string(ColumnType type) {
  switch (type) {
    case ColumnType::Continuous: return "continuous";
    case ColumnType::Categorical: return "categorical";
    case ColumnType::CountResponse: return "count_response";
    case ColumnType::ContinuousResponse: return "continuous_response";
    case ColumnType::CategoricalResponse: return "categorical_response";
  }
  return "?";
}

std::string to_string(Family family) {
  switch (family) {
    case Family::GaussianLinear: return "gaussian";
    case Family::MultinomialLogistic: return "multinomial";
    case Family::PoissonLog: return "poisson";
  }
  return "?";
}

std::vector<std::size_t> DataSchema::covariate_columns() const {
  std::vector<std::size_t> out;
  out.reserve(num_covariates());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c != response_index) out.push_back(c);
  }
  return out;
}

const Column& DataSchema::covariate(std::size_t j) const {
  return columns.at(j < response_index ? j : j + 1);
}

void DataSchema::check() const {
  if (response_index >= columns.size()) {
    throw ValidationError("schema: response_index out of range");
  }
  if (!columns[response_index].kind.is_response()) {
    throw ValidationError("schema: response_index does not point at a response column");
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const Column& col = columns[c];
    if (c != response_index && col.kind.is_response()) {
      throw ValidationError("schema: more than one response column ('" + col.name + "')");
    }
    if (col.kind.type == ColumnType::Categorical && col.kind.levels < 2) {
      throw ValidationError("schema: categorical column '" + col.name + "' needs >= 2 levels");
    }
    if (col.kind.type == ColumnType::CategoricalResponse && col.kind.levels < 2) {
      throw ValidationError("schema: categorical response '" + col.name + "' needs >= 2 classes");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.schema = schema;
  // A row subset of z-scored data is no longer z-scored, so the stats go.
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), covariates.cols());
  out.responses.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(rows[r]);
    out.covariates.row(static_cast<Eigen::Index>(r)) = covariates.row(i);
    out.responses(static_cast<Eigen::Index>(r)) = responses(i);
  }
  return out;
}

double ModelSpec::initial_alpha() const {
  return std::visit(Overloaded{[](const GammaAlphaPrior& g) { return g.initial; },
                               [](const FixedAlpha& f) { return f.value; }},
                    alpha);
}

ModelSpec default_model_spec(const DataSchema& schema, Family family,
                             bool response_uses_covariates) {
  ModelSpec spec;
  spec.family = family;
  spec.response_uses_covariates = response_uses_covariates;
  if (family == Family::MultinomialLogistic) spec.num_classes = schema.response().kind.levels;
  for (std::size_t j = 0; j < schema.num_covariates(); ++j) {
    const Column& col = schema.covariate(j);
    if (col.kind.type == ColumnType::Categorical) {
      spec.covariate_components.push_back(CovariateComponent::Multinomial);
      spec.base.covariates.emplace_back(
          DirichletLevels{std::vector<double>(static_cast<std::size_t>(col.kind.levels), 1.0)});
    } else {
      spec.covariate_components.push_back(CovariateComponent::GaussianDiag);
      spec.base.covariates.emplace_back(NigPrior{});
    }
  }
  const auto p = static_cast<Eigen::Index>(DesignLayout(schema, response_uses_covariates).width());
  if (family == Family::GaussianLinear) {
    spec.base.response = MvnigPrior{Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p), 2.0, 1.0};
  } else {
    const Eigen::Index k = spec.response_width();
    spec.base.response = IndependentGaussianPrior{Eigen::MatrixXd::Zero(p, k),
                                                  Eigen::MatrixXd::Ones(p, k), std::nullopt};
  }
  return spec;
}

DesignLayout::DesignLayout(const DataSchema& schema, bool response_uses_covariates)
    : uses_covariates_(response_uses_covariates) {
  const std::size_t d = schema.num_covariates();
  offsets_.resize(d);
  levels_.resize(d);
  std::size_t offset = 1;
  for (std::size_t j = 0; j < d; ++j) {
    const ColumnKind& kind = schema.covariate(j).kind;
    offsets_[j] = offset;
    levels_[j] = kind.type == ColumnType::Categorical ? kind.levels : 0;
    offset += kind.type == ColumnType::Categorical ? static_cast<std::size_t>(kind.levels) : 1;
  }
  width_ = uses_covariates_ ? offset : 1;
}

void DesignLayout::fill(const Eigen::Ref<const Eigen::VectorXd>& x,
                        Eigen::Ref<Eigen::VectorXd> out) const {
  if (static_cast<std::size_t>(out.size()) != width_) {
    throw DimensionMismatch("design row has wrong width");
  }
  out.setZero();
  out(0) = 1.0;
  if (!uses_covariates_) return;
  if (static_cast<std::size_t>(x.size()) != offsets_.size()) {
    throw DimensionMismatch("covariate row has " + std::to_string(x.size()) + " entries, expected " +
                            std::to_string(offsets_.size()));
  }
  for (std::size_t j = 0; j < offsets_.size(); ++j) {
    const double v = x(static_cast<Eigen::Index>(j));
    if (levels_[j] == 0) {
      out(static_cast<Eigen::Index>(offsets_[j])) = v;
    } else {
      const auto level = static_cast<int>(v);
      if (level < 0 || level >= levels_[j]) throw DimensionMismatch("categorical level out of range");
      out(static_cast<Eigen::Index>(offsets_[j]) + level) = 1.0;
    }
  }
}

Eigen::VectorXd DesignLayout::row(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(width_));
  fill(x, out);
  return out;
}

DesignLayout::RowMatrix DesignLayout::matrix(const Eigen::MatrixXd& covariates) const {
  RowMatrix out(covariates.rows(), static_cast<Eigen::Index>(width_));
  Eigen::VectorXd tmp(static_cast<Eigen::Index>(width_));
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    fill(covariates.row(i).transpose(), tmp);
    out.row(i) = tmp.transpose();
  }
  return out;
}

std::string check_params(const ClusterParams& params) {
  for (std::size_t j = 0; j < params.x.size(); ++j) {
    if (const auto* g = std::get_if<GaussianParams>(&params.x[j])) {
      if (!(g->var > 0.0) || !std::isfinite(g->mean)) {
        return "covariate " + std::to_string(j) + ": variance must be positive";
      }
    } else {
      const auto& probs = std::get<std::vector<double>>(params.x[j]);
      double total = 0.0;
      for (double p : probs) {
        if (!(p >= 0.0)) return "covariate " + std::to_string(j) + ": negative probability";
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        return "covariate " + std::to_string(j) + ": probabilities do not sum to 1";
      }
    }
  }
  if (!(params.y.var > 0.0)) return "response variance must be positive";
  if (!params.y.beta.allFinite()) return "coefficients must be finite";
  return {};
}

ValidationReport validate_spec(const DataSchema& schema, const ModelSpec& spec) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  try {
    schema.check();
  } catch (const ValidationError& e) {
    fail(e.what());
    return report;
  }
  const ColumnKind& rkind = schema.response().kind;
  const bool family_ok =
      (spec.family == Family::GaussianLinear && rkind.type == ColumnType::ContinuousResponse) ||
      (spec.family == Family::PoissonLog && rkind.type == ColumnType::CountResponse) ||
      (spec.family == Family::MultinomialLogistic &&
       rkind.type == ColumnType::CategoricalResponse);
  if (!family_ok) fail("family/response mismatch: " + to_string(spec.family) + " vs " + to_string(rkind.type));
  if (spec.family == Family::MultinomialLogistic && spec.num_classes != rkind.levels) {
    fail("multinomial num_classes does not match response classes");
  }
  const std::size_t d = schema.num_covariates();
  if (spec.covariate_components.size() != d) {
    fail("covariate_components has " + std::to_string(spec.covariate_components.size()) +
         " entries for " + std::to_string(d) + " covariates");
    return report;
  }
  if (spec.base.covariates.size() != d) {
    fail("base measure has " + std::to_string(spec.base.covariates.size()) + " covariate priors for " +
         std::to_string(d) + " covariates");
    return report;
  }
  for (std::size_t j = 0; j < d; ++j) {
    const Column& col = schema.covariate(j);
    const CovariateComponent comp = spec.covariate_components[j];
    const CovariatePrior& prior = spec.base.covariates[j];
    if (comp == CovariateComponent::GaussianDiag) {
      if (col.kind.type != ColumnType::Continuous) fail("GaussianDiag on non-continuous column '" + col.name + "'");
      if (std::holds_alternative<DirichletLevels>(prior)) fail("Dirichlet prior on Gaussian column '" + col.name + "'");
    } else {
      if (col.kind.type != ColumnType::Categorical) fail("Multinomial on non-categorical column '" + col.name + "'");
      const auto* dir = std::get_if<DirichletLevels>(&prior);
      if (!dir) {
        fail("Multinomial column '" + col.name + "' needs a Dirichlet prior");
      } else if (static_cast<int>(dir->concentration.size()) != col.kind.levels) {
        fail("Dirichlet prior on '" + col.name + "' has wrong number of levels");
      }
    }
    std::visit(Overloaded{[&](const NigPrior& p) {
                            if (!(p.shape > 0 && p.scale > 0 && p.nu > 0) || !std::isfinite(p.loc)) {
                              fail("NIG hyperparameters on '" + col.name + "' must be positive");
                            }
                          },
                          [&](const LogNormalMeanVar& p) {
                            if (!(p.mean_sd > 0 && p.log_var_sd > 0)) {
                              fail("log-normal hyperparameters on '" + col.name + "' must be positive");
                            }
                          },
                          [&](const DirichletLevels& p) {
                            for (double a : p.concentration) {
                              if (!(a > 0)) fail("Dirichlet concentration on '" + col.name + "' must be positive");
                            }
                          }},
               prior);
  }
  const auto p = static_cast<Eigen::Index>(DesignLayout(schema, spec.response_uses_covariates).width());
  const Eigen::Index k = spec.response_width();
  std::visit(Overloaded{[&](const MvnigPrior& m) {
                          if (spec.family != Family::GaussianLinear) fail("MVNIG response prior requires the Gaussian family");
                          if (m.mean.size() != p || m.cov.rows() != p || m.cov.cols() != p) {
                            fail("MVNIG prior dimension must equal design width " + std::to_string(p));
                            return;
                          }
                          if (!(m.shape > 0 && m.scale > 0)) fail("MVNIG shape/scale must be positive");
                          if (!m.cov.isApprox(m.cov.transpose(), 1e-12)) fail("MVNIG covariance must be symmetric");
                          Eigen::LLT<Eigen::MatrixXd> llt(m.cov);
                          if (llt.info() != Eigen::Success) fail("MVNIG covariance must be positive-definite");
                        },
                        [&](const IndependentGaussianPrior& g) {
                          if (g.mean.rows() != p || g.mean.cols() != k || g.var.rows() != p || g.var.cols() != k) {
                            fail("coefficient prior must be " + std::to_string(p) + " x " + std::to_string(k));
                            return;
                          }
                          if (!(g.var.array() > 0).all()) fail("coefficient prior variances must be positive");
                          if (spec.family == Family::GaussianLinear && !g.dispersion) {
                            fail("Gaussian family with independent coefficients needs a log-normal dispersion prior");
                          }
                          if (g.dispersion && !(g.dispersion->sd > 0)) fail("dispersion prior sd must be positive");
                        }},
             spec.base.response);
  std::visit(Overloaded{[&](const GammaAlphaPrior& g) {
                          if (!(g.shape > 0 && g.rate > 0 && g.initial > 0)) fail("alpha gamma prior must be positive");
                        },
                        [&](const FixedAlpha& f) {
                          if (!(f.value > 0)) fail("fixed alpha must be positive");
                        }},
             spec.alpha);
  return report;
}

ValidationReport validate_dataset(const Dataset& dataset, const ModelSpec& spec) {
  ValidationReport report = validate_spec(dataset.schema, spec);
  if (!report.ok() && dataset.schema.num_covariates() != spec.covariate_components.size()) return report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  const std::size_t d = dataset.schema.num_covariates();
  if (dataset.dims() != d) {
    fail("dataset has " + std::to_string(dataset.dims()) + " covariate columns, schema declares " +
         std::to_string(d));
    return report;
  }
  if (static_cast<std::size_t>(dataset.covariates.rows()) != dataset.size()) {
    fail("covariate and response row counts differ");
    return report;
  }
  for (std::size_t j = 0; j < d; ++j) {
    const Column& col = dataset.schema.covariate(j);
    const auto cj = static_cast<Eigen::Index>(j);
    for (Eigen::Index i = 0; i < dataset.covariates.rows(); ++i) {
      const double v = dataset.covariates(i, cj);
      if (col.kind.type == ColumnType::Categorical) {
        if (!is_integral(v) || v < 0 || v >= col.kind.levels) {
          fail("row " + std::to_string(i) + ", column '" + col.name + "': level " + std::to_string(v) +
               " outside 0.." + std::to_string(col.kind.levels - 1));
        }
      } else if (!std::isfinite(v)) {
        fail("row " + std::to_string(i) + ", column '" + col.name + "': non-finite value");
      }
    }
  }
  const Column& rcol = dataset.schema.response();
  for (Eigen::Index i = 0; i < dataset.responses.size(); ++i) {
    const double y = dataset.responses(i);
    switch (rcol.kind.type) {
      case ColumnType::CountResponse:
        if (!is_integral(y) || y < 0) fail("row " + std::to_string(i) + ": count response must be a nonnegative integer");
        break;
      case ColumnType::CategoricalResponse:
        if (!is_integral(y) || y < 0 || y >= rcol.kind.levels) fail("row " + std::to_string(i) + ": class index out of range");
        break;
      default:
        if (!std::isfinite(y)) fail("row " + std::to_string(i) + ": non-finite response");
    }
  }
  if (dataset.norm_stats && dataset.size() > 1) {
    // Normalized columns must have sample mean 0 and sd 1.
    auto check_column = [&](const Eigen::VectorXd& col, const std::string& name) {
      const double n = static_cast<double>(col.size());
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
      if (std::abs(mean) > 1e-9 || std::abs(sd - 1.0) > 1e-9) {
        fail("column '" + name + "' is marked normalized but has mean " + std::to_string(mean) +
             ", sd " + std::to_string(sd));
      }
    };
    const NormStats& ns = *dataset.norm_stats;
    for (std::size_t j = 0; j < d && j < ns.covariates.size(); ++j) {
      if (ns.covariates[j]) check_column(dataset.covariates.col(static_cast<Eigen::Index>(j)), dataset.schema.covariate(j).name);
    }
    if (ns.response) check_column(dataset.responses, rcol.name);
  }
  return report;
}

Dataset normalize(const Dataset& dataset) {
  const std::size_t d = dataset.dims();
  const double n = static_cast<double>(dataset.size());
  NormStats fresh;
  fresh.covariates.resize(d);
  auto column_stat = [&](const Eigen::VectorXd& col, const std::string& name) {
    const double mean = col.mean();
    const double sd = n > 1 ? std::sqrt((col.array() - mean).square().sum() / (n - 1.0)) : 0.0;
    if (!(sd > 0.0)) throw ZeroVariance(name);
    return NormStat{mean, sd};
  };
  for (std::size_t j = 0; j < d; ++j) {
    if (dataset.schema.covariate(j).kind.type == ColumnType::Continuous) {
      fresh.covariates[j] = column_stat(dataset.covariates.col(static_cast<Eigen::Index>(j)),
                                        dataset.schema.covariate(j).name);
    }
  }
  if (dataset.schema.response().kind.type == ColumnType::ContinuousResponse) {
    fresh.response = column_stat(dataset.responses, dataset.schema.response().name);
  }
  Dataset out = apply_normalization(dataset, fresh);
  if (dataset.norm_stats) {
    // Compose: original = old.mean + old.sd * (fresh.mean + fresh.sd * z).
    const NormStats& old = *dataset.norm_stats;
    NormStats composed = fresh;
    for (std::size_t j = 0; j < d; ++j) {
      if (fresh.covariates[j] && j < old.covariates.size() && old.covariates[j]) {
        composed.covariates[j] = NormStat{old.covariates[j]->mean + old.covariates[j]->sd * fresh.covariates[j]->mean,
                                          old.covariates[j]->sd * fresh.covariates[j]->sd};
      }
    }
    if (fresh.response && old.response) {
      composed.response = NormStat{old.response->mean + old.response->sd * fresh.response->mean,
                                   old.response->sd * fresh.response->sd};
    }
    out.norm_stats = composed;
  }
  return out;
}

Dataset apply_normalization(const Dataset& dataset, const NormStats& stats) {
  Dataset out = dataset;
  for (std::size_t j = 0; j < dataset.dims() && j < stats.covariates.size(); ++j) {
    if (const auto& s = stats.covariates[j]) {
      auto col = out.covariates.col(static_cast<Eigen::Index>(j));
      col = (col.array() - s->mean) / s->sd;
    }
  }
  if (stats.response) {
    out.responses = (out.responses.array() - stats.response->mean) / stats.response->sd;
  }
  out.norm_stats = stats;
  return out;
}

Dataset denormalize(const Dataset& dataset) {
  if (!dataset.norm_stats) return dataset;
  Dataset out = dataset;
  const NormStats& stats = *dataset.norm_stats;
  for (std::size_t j = 0; j < dataset.dims() && j < stats.covariates.size(); ++j) {
    if (const auto& s = stats.covariates[j]) {
      auto col = out.covariates.col(static_cast<Eigen::Index>(j));
      col = col.array() * s->sd + s->mean;
    }
  }
  if (stats.response) out.responses = out.responses.array() * stats.response->sd + stats.response->mean;
  out.norm_stats.reset();
  return out;
}

Eigen::VectorXd normalize_row(const Eigen::Ref<const Eigen::VectorXd>& x, const NormStats& stats) {
  Eigen::VectorXd out = x;
  for (std::size_t j = 0; j < stats.covariates.size() && j < static_cast<std::size_t>(x.size()); ++j) {
    if (const auto& s = stats.covariates[j]) {
      const auto jj = static_cast<Eigen::Index>(j);
      out(jj) = (x(jj) - s->mean) / s->sd;
    }
  }
  return out;
}

double denormalize_response(double value, const NormStats& stats) {
  return stats.response ? stats.response->mean + stats.response->sd * value : value;
}

double denormalize_response_scale(double value, const NormStats& stats) {
  return stats.response ? stats.response->sd * value : value;
}

}  // namespace dpglm
