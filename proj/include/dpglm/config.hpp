#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpglm/data_io.hpp"
#include "dpglm/gibbs.hpp"
#include "dpglm/model.hpp"
#include "dpglm/predictor.hpp"

namespace dpglm {

struct SyntheticSource {
  std::string kind;  // heteroscedastic | spurious
  std::size_t n = 250;
  std::size_t num_spurious = 0;
  std::uint64_t seed = 0;
};

struct DataConfig {
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> schema;
  std::optional<std::string> benchmark;  // cmb | ccs | solar
  std::optional<std::filesystem::path> source;
  std::optional<std::filesystem::path> cache;
  std::optional<SyntheticSource> synthetic;
  bool normalize = true;
};

struct ResponsePriorConfig {
  std::string kind;  // mvnig | independent
  double mean = 0.0;
  double cov = 1.0;  // MVNIG cov = cov * I; independent coefficient variance
  double shape = 2.0;
  double scale = 1.0;
  std::optional<LogNormalVariance> dispersion;
};

struct ModelConfig {
  std::optional<Family> family;  // inferred from the response column when absent
  bool response_uses_covariates = true;
  CovariatePrior continuous_prior = NigPrior{};
  double dirichlet_concentration = 1.0;
  std::map<std::string, CovariatePrior> column_priors;
  std::optional<ResponsePriorConfig> response_prior;
  AlphaPrior alpha = GammaAlphaPrior{};
};

struct PredictSettings {
  double band_level = 0.90;
  std::size_t draws_per_sample = 10;
  PredictorConfig predictor;
};

struct BenchmarkSettings {
  std::vector<std::string> methods{"dpglm"};
  std::optional<SplitPlan> split;
};

struct OutputSettings {
  std::filesystem::path archive = "model.dpglm";
  std::optional<std::filesystem::path> predictions;
  std::optional<std::filesystem::path> diagnostics;
  std::filesystem::path dir = ".";
};

// One JSON document holding every setting. Unknown keys are rejected with
// a ConfigError naming the dotted field path.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  ChainConfig chain;
  PredictSettings predict;
  BenchmarkSettings benchmark;
  OutputSettings output;
  nlohmann::json raw;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

ModelSpec build_model_spec(const ModelConfig& config, const DataSchema& schema);

// Loads the configured data (csv + schema, benchmark cache or generator),
// without normalization.
Dataset load_configured_data(const DataConfig& config);

}  // namespace dpglm
