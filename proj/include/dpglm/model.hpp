#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dpglm/priors.hpp"

namespace dpglm {

enum class ColumnType {
  Continuous,
  Categorical,
  CountResponse,
  ContinuousResponse,
  CategoricalResponse,
};

struct ColumnKind {
  ColumnType type = ColumnType::Continuous;
  int levels = 0;  // num_levels for Categorical, num_classes for CategoricalResponse

  static ColumnKind continuous() { return {ColumnType::Continuous, 0}; }
  static ColumnKind categorical(int levels) { return {ColumnType::Categorical, levels}; }
  static ColumnKind count_response() { return {ColumnType::CountResponse, 0}; }
  static ColumnKind continuous_response() { return {ColumnType::ContinuousResponse, 0}; }
  static ColumnKind categorical_response(int classes) {
    return {ColumnType::CategoricalResponse, classes};
  }

  bool is_response() const {
    return type == ColumnType::CountResponse || type == ColumnType::ContinuousResponse ||
           type == ColumnType::CategoricalResponse;
  }
  bool operator==(const ColumnKind&) const = default;
};

std::string to_string(ColumnType type);

struct Column {
  std::string name;
  ColumnKind kind;
  // Declared level names for categorical columns (index = level id).
  std::vector<std::string> level_names;
};

struct DataSchema {
  std::vector<Column> columns;
  std::size_t response_index = 0;

  // Indices into `columns` of the covariates, in column order.
  std::vector<std::size_t> covariate_columns() const;
  std::size_t num_covariates() const { return columns.empty() ? 0 : columns.size() - 1; }
  const Column& covariate(std::size_t j) const;
  const Column& response() const { return columns.at(response_index); }

  // Throws ValidationError when the response invariants do not hold.
  void check() const;
};

struct NormStat {
  double mean = 0.0;
  double sd = 1.0;
};

// Per covariate dimension (nullopt for categorical ones) plus the response.
struct NormStats {
  std::vector<std::optional<NormStat>> covariates;
  std::optional<NormStat> response;
};

struct Dataset {
  DataSchema schema;
  Eigen::MatrixXd covariates;  // n x d; categorical entries are level indices
  Eigen::VectorXd responses;   // real value, class index or count
  std::optional<NormStats> norm_stats;

  std::size_t size() const { return static_cast<std::size_t>(responses.size()); }
  std::size_t dims() const { return static_cast<std::size_t>(covariates.cols()); }
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

enum class Family { GaussianLinear, MultinomialLogistic, PoissonLog };
enum class CovariateComponent { GaussianDiag, Multinomial };

std::string to_string(Family family);

struct GammaAlphaPrior {
  double shape = 1.0;
  double rate = 1.0;
  double initial = 1.0;
};

struct FixedAlpha {
  double value = 1.0;
};

using AlphaPrior = std::variant<GammaAlphaPrior, FixedAlpha>;

struct ModelSpec {
  Family family = Family::GaussianLinear;
  int num_classes = 0;  // MultinomialLogistic only
  std::vector<CovariateComponent> covariate_components;
  BaseMeasureSpec base;
  AlphaPrior alpha = GammaAlphaPrior{};
  // false gives the location/scale DP mixture: the response ignores x.
  bool response_uses_covariates = true;

  double initial_alpha() const;
  int response_width() const { return family == Family::MultinomialLogistic ? num_classes : 1; }
};

// Weakly-informative defaults for z-scored data: NIG(2, 1, 0, 1) on every
// continuous covariate, flat Dirichlet on categorical ones, MVNIG(0, I, 2, 1)
// for the Gaussian response and N(0, 1) coefficients otherwise.
ModelSpec default_model_spec(const DataSchema& schema, Family family,
                             bool response_uses_covariates = true);

// Maps a covariate row onto the GLM design row: intercept, then each
// continuous value, then one indicator per level of each categorical
// covariate. Intercept only when the response ignores x.
class DesignLayout {
 public:
  DesignLayout() = default;
  DesignLayout(const DataSchema& schema, bool response_uses_covariates);

  std::size_t width() const { return width_; }
  std::size_t num_covariates() const { return offsets_.size(); }
  void fill(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd row(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatrix matrix(const Eigen::MatrixXd& covariates) const;

 private:
  std::size_t width_ = 1;
  bool uses_covariates_ = true;
  std::vector<std::size_t> offsets_;
  std::vector<int> levels_;  // 0 for continuous
};

struct GaussianParams {
  double mean = 0.0;
  double var = 1.0;
};

using CovariateParams = std::variant<GaussianParams, std::vector<double>>;

struct ResponseParams {
  Eigen::MatrixXd beta;  // p x K
  double var = 1.0;      // GaussianLinear only
};

struct ClusterParams {
  std::vector<CovariateParams> x;
  ResponseParams y;
};

// Returns an empty string when the parameters satisfy their invariants
// (probability vectors on the simplex, positive variances), else a reason.
std::string check_params(const ClusterParams& params);

struct PredictiveEstimate {
  Eigen::VectorXd mean;  // size 1, or K class probabilities
  std::vector<Eigen::VectorXd> per_sample_means;
  std::optional<std::pair<double, double>> band;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_spec(const DataSchema& schema, const ModelSpec& spec);
ValidationReport validate_dataset(const Dataset& dataset, const ModelSpec& spec);

// z-scores every continuous covariate and a continuous response (sample
// standard deviation). Stats compose with any existing ones so that
// denormalize always returns to the original scale.
Dataset normalize(const Dataset& dataset);
Dataset apply_normalization(const Dataset& dataset, const NormStats& stats);
Dataset denormalize(const Dataset& dataset);
Eigen::VectorXd normalize_row(const Eigen::Ref<const Eigen::VectorXd>& x, const NormStats& stats);
double denormalize_response(double value, const NormStats& stats);
double denormalize_response_scale(double value, const NormStats& stats);

}  // namespace dpglm
