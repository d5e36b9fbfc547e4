#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpglm/archive.hpp"
#include "dpglm/config.hpp"

namespace dpglm {

struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
};

// Throws LengthMismatch on unequal lengths and EmptyInput when empty.
Metrics compute_metrics(const std::vector<double>& predictions, const std::vector<double>& truths);

// Loads (or takes) the data, normalizes when configured, builds the model
// and runs the chain.
ModelArchive fit_model(const RunConfig& config);
ModelArchive fit_model(const RunConfig& config, const Dataset& raw);

// Query covariates come in on the original scale; outputs are returned on
// the original response scale.
struct PredictionRow {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<std::size_t> label;  // categorical responses
  Eigen::VectorXd probabilities;
};

struct PredictOptions {
  double band_level = 0.90;
  std::size_t draws_per_sample = 10;
  PredictorConfig predictor;
  bool bands = true;
};

PredictOptions predict_options(const RunConfig& config);
std::vector<PredictionRow> predict_archive(const ModelArchive& archive, const Eigen::MatrixXd& queries,
                                           const PredictOptions& options);
std::string format_predictions_csv(const ModelArchive& archive, const std::vector<PredictionRow>& rows);

// Exact counterpart for tiny fully conjugate models at the archive's final
// alpha (fixed-alpha specs only).
std::vector<double> oracle_predict(const ModelArchive& archive, const Eigen::MatrixXd& queries);

struct ReplicationResult {
  std::string method;
  std::size_t train_size = 0;
  std::size_t replication = 0;
  Metrics metrics;
};

struct SummaryRow {
  std::string method;
  std::size_t train_size = 0;
  std::size_t replications = 0;
  double mae_mean = 0.0, mae_std = 0.0, mse_mean = 0.0, mse_std = 0.0;
};

struct BenchmarkResult {
  std::vector<ReplicationResult> raw;  // sorted by (method order, size, replication)
  std::vector<SummaryRow> summary;
};

// Per-split work runs on `threads` workers; results are merged by key so
// the output never depends on scheduling. Metrics are on the model
// (normalized) response scale.
BenchmarkResult run_benchmark(const RunConfig& config, const Dataset& raw, std::size_t threads = 1);

std::vector<SummaryRow> summarize(const std::vector<ReplicationResult>& raw, const std::vector<std::string>& method_order);
std::string format_raw_csv(const std::vector<ReplicationResult>& raw);
std::vector<ReplicationResult> parse_raw_csv(const std::string& text);
std::string format_summary_csv(const std::vector<SummaryRow>& summary);
// Methods as rows, one MAE/MSE column pair per train size, `*` on the
// per-column best.
std::string format_table(const std::vector<SummaryRow>& summary);

// Mean function and band on a uniform grid over covariate 0 (others held at
// their training mean on the model scale, first level if categorical).
struct CurvePoint {
  double x = 0.0, mean = 0.0, lo = 0.0, hi = 0.0;
};
std::vector<CurvePoint> mean_curve(const ModelArchive& archive, std::size_t grid, std::optional<double> lo,
                                   std::optional<double> hi, const PredictOptions& options);
std::string format_curve_csv(const std::vector<CurvePoint>& curve);
std::string format_error_series_csv(const std::vector<SummaryRow>& summary);

}  // namespace dpglm
