#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpglm/model.hpp"

namespace dpglm {

// Schema document: {"columns": [{"name": ..., "kind": ..., "levels": [...]}]}
// with kind one of continuous, categorical, count_response,
// continuous_response, categorical_response. Categorical "levels" is the
// ordered list of level names, or a level count when values are indices.
DataSchema parse_schema(const nlohmann::json& doc);
nlohmann::json schema_to_json(const DataSchema& schema);
DataSchema load_schema(const std::filesystem::path& path);
void write_schema(const DataSchema& schema, const std::filesystem::path& path);

Dataset load_csv(const std::filesystem::path& csv, const std::filesystem::path& schema);
Dataset load_csv(const std::filesystem::path& csv, const DataSchema& schema);
Dataset parse_csv(const std::string& text, const DataSchema& schema);
// Reads only covariate columns (query files); the header must name them.
Eigen::MatrixXd load_query_csv(const std::filesystem::path& csv, const DataSchema& schema);
void write_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string format_csv(const Dataset& dataset);
std::string format_real(double v);  // shortest text that reads back exactly

struct SplitPlan {
  std::vector<std::size_t> train_sizes;
  std::size_t replications = 10;
  std::optional<double> test_fraction;  // of n
  std::optional<std::size_t> test_size;  // default: every row not used for training
  std::uint64_t seed = 0;
};

struct Split {
  std::size_t train_size = 0;
  std::size_t replication = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Replication r at size s shuffles 0..n-1 with stream (s, r); the first s
// indices train, the next test_size test.
std::vector<Split> make_splits(std::size_t n, const SplitPlan& plan);

// x ~ U(0, 1), y = mean(x) + noise with sd 0.1 below x = 0.5 and 1.0 above.
double heteroscedastic_mean(double x);
double heteroscedastic_sd(double x);
Dataset synth_heteroscedastic(std::size_t n, std::uint64_t seed);

// Three-component Gaussian mixture on x1 with a per-component linear
// response in x1, plus `num_spurious` dimensions each drawn from an
// independent copy of the mixture.
struct SpuriousModel {
  static constexpr int kComponents = 3;
  static constexpr double kMeans[kComponents] = {-2.0, 0.0, 2.0};
  static constexpr double kSd = 0.5;
  static constexpr double kIntercepts[kComponents] = {0.0, 1.0, -1.0};
  static constexpr double kSlopes[kComponents] = {1.0, -1.5, 2.0};
  static constexpr double kNoiseSd = 0.3;
};
struct SpuriousData {
  Dataset data;
  std::vector<int> components;
};
SpuriousData synth_spurious(std::size_t n, std::size_t num_spurious, std::uint64_t seed);

// Benchmark datasets, cached as <cache>/<name>/data.csv with checksum.txt
// (SHA-256 of data.csv) and schema.json. `source` is a local raw file to
// import instead of downloading; cmb always needs one.
struct BenchmarkInfo {
  std::string name;
  std::size_t rows = 0;
  std::vector<std::string> urls;
};
const BenchmarkInfo& benchmark_info(const std::string& name);
DataSchema benchmark_schema(const std::string& name);
Dataset fetch_benchmark(const std::string& name, const std::filesystem::path& cache_dir,
                        const std::optional<std::filesystem::path>& source = std::nullopt);
// Parses the raw upstream format into a Dataset (exposed for tests).
Dataset parse_benchmark_raw(const std::string& name, const std::vector<std::string>& payloads);
std::filesystem::path default_cache_dir();

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace dpglm
