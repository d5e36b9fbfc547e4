#include "dpglm/data_io.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "dpglm/errors.hpp"
#include "dpglm/rng.hpp"

namespace dpglm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (a < b && blank(s[a])) ++a;
  while (b > a && blank(s[b - 1])) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

ColumnType kind_from_name(const std::string& name) {
  if (name == "continuous") return ColumnType::Continuous;
  if (name == "categorical") return ColumnType::Categorical;
  if (name == "count_response") return ColumnType::CountResponse;
  if (name == "continuous_response") return ColumnType::ContinuousResponse;
  if (name == "categorical_response") return ColumnType::CategoricalResponse;
  throw SchemaMismatch("unknown column kind '" + name + "'");
}

bool has_levels(ColumnType t) { return t == ColumnType::Categorical || t == ColumnType::CategoricalResponse; }

double parse_cell(const Column& col, const std::string& cell, std::size_t row) {
  switch (col.kind.type) {
    case ColumnType::Continuous:
    case ColumnType::ContinuousResponse: {
      const auto v = parse_real(cell);
      if (!v) throw ParseError(row, col.name, "'" + cell + "' is not a number");
      return *v;
    }
    case ColumnType::CountResponse: {
      const auto v = parse_real(cell);
      if (!v || *v < 0 || std::floor(*v) != *v) throw ParseError(row, col.name, "'" + cell + "' is not a count");
      return *v;
    }
    case ColumnType::Categorical:
    case ColumnType::CategoricalResponse: {
      if (!col.level_names.empty()) {
        for (std::size_t k = 0; k < col.level_names.size(); ++k) {
          if (col.level_names[k] == cell) return static_cast<double>(k);
        }
        throw UnknownLevel(cell, col.name);
      }
      const auto v = parse_real(cell);
      if (!v || *v < 0 || std::floor(*v) != *v) throw ParseError(row, col.name, "'" + cell + "' is not a level index");
      if (*v >= col.kind.levels) throw UnknownLevel(cell, col.name);
      return *v;
    }
  }
  return 0.0;
}

std::string format_cell(const Column& col, double v) {
  if (has_levels(col.kind.type)) {
    const auto k = static_cast<std::size_t>(v);
    return col.level_names.empty() ? std::to_string(k) : col.level_names.at(k);
  }
  if (col.kind.type == ColumnType::CountResponse) return std::to_string(static_cast<long long>(v));
  return format_real(v);
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

DataSchema parse_schema(const json& doc) {
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array()) {
    throw SchemaMismatch("schema needs a 'columns' array");
  }
  for (const auto& [key, _] : doc.items()) {
    if (key != "columns") throw SchemaMismatch("unknown schema key '" + key + "'");
  }
  DataSchema schema;
  std::size_t responses = 0;
  for (const json& c : doc["columns"]) {
    for (const auto& [key, _] : c.items()) {
      if (key != "name" && key != "kind" && key != "levels") throw SchemaMismatch("unknown column key '" + key + "'");
    }
    if (!c.contains("name") || !c["name"].is_string()) throw SchemaMismatch("every column needs a string 'name'");
    if (!c.contains("kind") || !c["kind"].is_string()) throw SchemaMismatch("every column needs a string 'kind'");
    Column col;
    col.name = c["name"].get<std::string>();
    col.kind.type = kind_from_name(c["kind"].get<std::string>());
    if (has_levels(col.kind.type)) {
      if (!c.contains("levels")) throw SchemaMismatch("column '" + col.name + "' needs 'levels'");
      const json& lv = c["levels"];
      if (lv.is_array()) {
        for (const json& l : lv) col.level_names.push_back(l.is_string() ? l.get<std::string>() : l.dump());
        col.kind.levels = static_cast<int>(col.level_names.size());
      } else if (lv.is_number_integer()) {
        col.kind.levels = lv.get<int>();
      } else {
        throw SchemaMismatch("column '" + col.name + "': 'levels' must be a list or a count");
      }
    } else if (c.contains("levels")) {
      throw SchemaMismatch("column '" + col.name + "' is not categorical but declares levels");
    }
    if (col.kind.is_response()) {
      schema.response_index = schema.columns.size();
      ++responses;
    }
    schema.columns.push_back(std::move(col));
  }
  if (responses != 1) throw SchemaMismatch("schema needs exactly one response column");
  schema.check();
  return schema;
}

json schema_to_json(const DataSchema& schema) {
  json cols = json::array();
  for (const Column& c : schema.columns) {
    json j{{"name", c.name}, {"kind", to_string(c.kind.type)}};
    if (has_levels(c.kind.type)) {
      if (c.level_names.empty()) {
        j["levels"] = c.kind.levels;
      } else {
        j["levels"] = c.level_names;
      }
    }
    cols.push_back(std::move(j));
  }
  return json{{"columns", cols}};
}

DataSchema load_schema(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaMismatch(path.string() + ": " + e.what());
  }
  return parse_schema(doc);
}

void write_schema(const DataSchema& schema, const fs::path& path) { write_file(path, schema_to_json(schema).dump(2) + "\n"); }

Dataset parse_csv(const std::string& text, const DataSchema& schema) {
  schema.check();
  std::vector<std::string> lines = lines_of(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(0, "", "missing header row");
  const std::vector<std::string> header = split(lines[0], ',');
  if (header.size() != schema.columns.size()) {
    throw SchemaMismatch("header has " + std::to_string(header.size()) + " columns, schema declares " +
                         std::to_string(schema.columns.size()));
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != schema.columns[c].name) {
      throw SchemaMismatch("header column " + std::to_string(c) + " is '" + header[c] + "', schema expects '" +
                           schema.columns[c].name + "'");
    }
  }
  const std::size_t n = lines.size() - 1;
  const std::vector<std::size_t> cov = schema.covariate_columns();
  Dataset out;
  out.schema = schema;
  out.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cov.size()));
  out.responses.resize(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const std::vector<std::string> cells = split(lines[r + 1], ',');
    if (cells.size() != header.size()) {
      throw ParseError(r + 1, "", "expected " + std::to_string(header.size()) + " fields, found " +
                                      std::to_string(cells.size()));
    }
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < cov.size(); ++j) {
      out.covariates(ri, static_cast<Eigen::Index>(j)) = parse_cell(schema.columns[cov[j]], cells[cov[j]], r + 1);
    }
    out.responses(ri) = parse_cell(schema.response(), cells[schema.response_index], r + 1);
  }
  return out;
}

Dataset load_csv(const fs::path& csv, const fs::path& schema) { return load_csv(csv, load_schema(schema)); }

Dataset load_csv(const fs::path& csv, const DataSchema& schema) { return parse_csv(read_file(csv), schema); }

Eigen::MatrixXd load_query_csv(const fs::path& csv, const DataSchema& schema) {
  std::vector<std::string> lines = lines_of(read_file(csv));
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(0, "", "missing header row");
  const std::vector<std::string> header = split(lines[0], ',');
  const std::vector<std::size_t> cov = schema.covariate_columns();
  // Map each covariate to its position in the query header; extra columns
  // (e.g. a response) are ignored.
  std::vector<std::size_t> where(cov.size(), header.size());
  for (std::size_t j = 0; j < cov.size(); ++j) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == schema.columns[cov[j]].name) where[j] = c;
    }
    if (where[j] == header.size()) {
      throw SchemaMismatch("query file lacks covariate column '" + schema.columns[cov[j]].name + "'");
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(cov.size()));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::vector<std::string> cells = split(lines[r], ',');
    if (cells.size() != header.size()) throw ParseError(r, "", "field count differs from header");
    for (std::size_t j = 0; j < cov.size(); ++j) {
      out(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) =
          parse_cell(schema.columns[cov[j]], cells[where[j]], r);
    }
  }
  return out;
}

std::string format_csv(const Dataset& dataset) {
  const DataSchema& schema = dataset.schema;
  std::string out;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (c) out += ',';
    out += schema.columns[c].name;
  }
  out += '\n';
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    std::size_t j = 0;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      if (c) out += ',';
      const double v = c == schema.response_index ? dataset.responses(ri) : dataset.covariates(ri, static_cast<Eigen::Index>(j++));
      out += format_cell(schema.columns[c], v);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& dataset, const fs::path& path) { write_file(path, format_csv(dataset)); }

std::vector<Split> make_splits(std::size_t n, const SplitPlan& plan) {
  if (plan.replications == 0) throw ConfigError("split.replications", "must be positive");
  if (plan.train_sizes.empty()) throw ConfigError("split.train_sizes", "must not be empty");
  std::vector<Split> out;
  const Rng root(plan.seed);
  for (std::size_t s : plan.train_sizes) {
    if (s == 0) throw ConfigError("split.train_sizes", "sizes must be positive");
    std::size_t test = n > s ? n - s : 0;
    if (plan.test_size) test = *plan.test_size;
    if (plan.test_fraction) test = static_cast<std::size_t>(std::floor(*plan.test_fraction * static_cast<double>(n)));
    if (s + test > n || test == 0) {
      throw InsufficientData("train size " + std::to_string(s) + " plus test size " + std::to_string(test) +
                             " exceeds the " + std::to_string(n) + " available rows");
    }
    for (std::size_t r = 0; r < plan.replications; ++r) {
      Rng rng = root.split(splitmix64(s) ^ r);
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
      Split sp;
      sp.train_size = s;
      sp.replication = r;
      sp.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s));
      sp.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(s), idx.begin() + static_cast<std::ptrdiff_t>(s + test));
      out.push_back(std::move(sp));
    }
  }
  return out;
}

double heteroscedastic_mean(double x) {
  return 1.5 * x + 2.0 * std::exp(-2.0 * x) * std::sin(4.0 * std::numbers::pi * x);
}

double heteroscedastic_sd(double x) { return x < 0.5 ? 0.1 : 1.0; }

Dataset synth_heteroscedastic(std::size_t n, std::uint64_t seed) {
  Dataset out;
  out.schema.columns = {{"x", ColumnKind::continuous(), {}}, {"y", ColumnKind::continuous_response(), {}}};
  out.schema.response_index = 1;
  out.covariates.resize(static_cast<Eigen::Index>(n), 1);
  out.responses.resize(static_cast<Eigen::Index>(n));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const double x = rng.uniform();
    out.covariates(i, 0) = x;
    out.responses(i) = heteroscedastic_mean(x) + heteroscedastic_sd(x) * rng.normal();
  }
  return out;
}

SpuriousData synth_spurious(std::size_t n, std::size_t num_spurious, std::uint64_t seed) {
  using M = SpuriousModel;
  SpuriousData out;
  DataSchema& schema = out.data.schema;
  schema.columns.push_back({"x1", ColumnKind::continuous(), {}});
  for (std::size_t s = 0; s < num_spurious; ++s) {
    schema.columns.push_back({"s" + std::to_string(s + 1), ColumnKind::continuous(), {}});
  }
  schema.columns.push_back({"y", ColumnKind::continuous_response(), {}});
  schema.response_index = schema.columns.size() - 1;
  out.data.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + num_spurious));
  out.data.responses.resize(static_cast<Eigen::Index>(n));
  out.components.resize(n);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const auto k = static_cast<int>(rng.uniform_index(M::kComponents));
    const double x1 = rng.normal(M::kMeans[k], M::kSd);
    out.components[static_cast<std::size_t>(i)] = k;
    out.data.covariates(i, 0) = x1;
    for (std::size_t s = 0; s < num_spurious; ++s) {
      const auto ks = rng.uniform_index(M::kComponents);
      out.data.covariates(i, static_cast<Eigen::Index>(s + 1)) = rng.normal(M::kMeans[ks], M::kSd);
    }
    out.data.responses(i) = M::kIntercepts[k] + M::kSlopes[k] * x1 + rng.normal(0.0, M::kNoiseSd);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmarks

namespace {

const std::vector<BenchmarkInfo>& registry() {
  static const std::vector<BenchmarkInfo> infos = {
      {"cmb", 899, {}},
      {"ccs", 1030, {"https://archive.ics.uci.edu/ml/machine-learning-databases/concrete/compressive/Concrete_Data.xls"}},
      {"solar", 1389,
       {"https://archive.ics.uci.edu/ml/machine-learning-databases/solar-flare/flare.data1",
        "https://archive.ics.uci.edu/ml/machine-learning-databases/solar-flare/flare.data2"}},
  };
  return infos;
}

struct FlareAttribute {
  const char* name;
  std::vector<std::string> levels;
};

const std::vector<FlareAttribute>& flare_attributes() {
  static const std::vector<FlareAttribute> attrs = {
      {"zurich_class", {"A", "B", "C", "D", "E", "F", "H"}},
      {"largest_spot_size", {"X", "R", "S", "A", "H", "K"}},
      {"spot_distribution", {"X", "O", "I", "C"}},
      {"activity", {"1", "2"}},
      {"evolution", {"1", "2", "3"}},
      {"previous_activity", {"1", "2", "3"}},
      {"historically_complex", {"1", "2"}},
      {"became_complex", {"1", "2"}},
      {"area", {"1", "2"}},
      {"largest_spot_area", {"1", "2"}},
  };
  return attrs;
}

std::size_t write_callback(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  static_cast<std::string*>(user)->append(ptr, size * nmemb);
  return size * nmemb;
}

std::string http_get(const std::string& url) {
  static const bool init = [] { return curl_global_init(CURL_GLOBAL_DEFAULT) == CURLE_OK; }();
  if (!init) throw NetworkUnavailable("libcurl failed to initialize");
  CURL* curl = curl_easy_init();
  if (!curl) throw NetworkUnavailable("libcurl failed to initialize");
  std::string body;
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 20L);
  curl_easy_setopt(curl, CURLOPT_TIMEOUT, 120L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_callback);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
  const CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  if (rc != CURLE_OK) throw NetworkUnavailable("fetching " + url + ": " + curl_easy_strerror(rc));
  return body;
}

// Numeric rows of a delimited text file; lines that do not parse fully
// (headers, comments) are skipped.
std::vector<std::vector<double>> numeric_rows(const std::string& text, std::size_t width) {
  std::vector<std::vector<double>> rows;
  for (const std::string& line : lines_of(text)) {
    std::vector<std::string> cells = line.find(',') != std::string::npos ? split(line, ',') : split_ws(line);
    if (cells.size() != width) continue;
    std::vector<double> row;
    for (const std::string& c : cells) {
      if (auto v = parse_real(c)) row.push_back(*v);
    }
    if (row.size() == width) rows.push_back(std::move(row));
  }
  return rows;
}

Dataset dataset_from_rows(const DataSchema& schema, const std::vector<std::vector<double>>& rows) {
  Dataset out;
  out.schema = schema;
  const std::size_t d = schema.num_covariates();
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  out.responses.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < d; ++j) out.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
    out.responses(static_cast<Eigen::Index>(r)) = rows[r][d];
  }
  return out;
}

}  // namespace

const BenchmarkInfo& benchmark_info(const std::string& name) {
  for (const BenchmarkInfo& info : registry()) {
    if (info.name == name) return info;
  }
  throw ConfigError("dataset", "unknown benchmark '" + name + "' (expected cmb, ccs or solar)");
}

DataSchema benchmark_schema(const std::string& name) {
  DataSchema s;
  if (name == "cmb") {
    s.columns = {{"multipole", ColumnKind::continuous(), {}}, {"power", ColumnKind::continuous_response(), {}}};
  } else if (name == "ccs") {
    for (const char* c : {"cement", "slag", "fly_ash", "water", "superplasticizer", "coarse_aggregate",
                          "fine_aggregate", "age"}) {
      s.columns.push_back({c, ColumnKind::continuous(), {}});
    }
    s.columns.push_back({"strength", ColumnKind::continuous_response(), {}});
  } else if (name == "solar") {
    for (const FlareAttribute& a : flare_attributes()) {
      s.columns.push_back({a.name, ColumnKind::categorical(static_cast<int>(a.levels.size())), a.levels});
    }
    s.columns.push_back({"flares", ColumnKind::count_response(), {}});
  } else {
    benchmark_info(name);
  }
  s.response_index = s.columns.size() - 1;
  return s;
}

Dataset parse_benchmark_raw(const std::string& name, const std::vector<std::string>& payloads) {
  const DataSchema schema = benchmark_schema(name);
  if (name == "solar") {
    const auto& attrs = flare_attributes();
    std::vector<std::vector<double>> rows;
    for (const std::string& text : payloads) {
      for (const std::string& line : lines_of(text)) {
        const std::vector<std::string> tok = split_ws(line);
        if (tok.size() != attrs.size() + 3) continue;
        std::vector<double> row;
        bool ok = true;
        for (std::size_t j = 0; j < attrs.size() && ok; ++j) {
          const auto& lv = attrs[j].levels;
          const auto it = std::find(lv.begin(), lv.end(), tok[j]);
          ok = it != lv.end();
          row.push_back(static_cast<double>(it - lv.begin()));
        }
        double flares = 0.0;
        for (std::size_t k = attrs.size(); k < tok.size() && ok; ++k) {
          const auto v = parse_real(tok[k]);
          ok = v && *v >= 0 && std::floor(*v) == *v;
          if (ok) flares += *v;
        }
        if (!ok) continue;
        row.push_back(flares);
        rows.push_back(std::move(row));
      }
    }
    return dataset_from_rows(schema, rows);
  }
  std::vector<std::vector<double>> rows;
  for (const std::string& text : payloads) {
    if (text.size() >= 4 && static_cast<unsigned char>(text[0]) == 0xD0 && static_cast<unsigned char>(text[1]) == 0xCF) {
      throw ValidationError(name + ": the upstream file is a binary spreadsheet; export it to CSV and pass it as the source");
    }
    auto part = numeric_rows(text, schema.columns.size());
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return dataset_from_rows(schema, rows);
}

fs::path default_cache_dir() {
  if (const char* env = std::getenv("DPGLM_CACHE"); env && *env) return env;
  return "cache";
}

Dataset fetch_benchmark(const std::string& name, const fs::path& cache_dir, const std::optional<fs::path>& source) {
  const BenchmarkInfo& info = benchmark_info(name);
  const DataSchema schema = benchmark_schema(name);
  const fs::path dir = cache_dir / name;
  const fs::path data_path = dir / "data.csv";
  const fs::path sum_path = dir / "checksum.txt";

  if (!source && fs::exists(data_path)) {
    const std::string bytes = read_file(data_path);
    if (!fs::exists(sum_path)) throw ChecksumMismatch(sum_path.string() + " is missing");
    const std::string expected = trim(read_file(sum_path));
    const std::string actual = sha256_hex(bytes);
    if (expected != actual) {
      throw ChecksumMismatch(data_path.string() + ": SHA-256 " + actual + " does not match recorded " + expected);
    }
    Dataset out = parse_csv(bytes, schema);
    if (out.size() != info.rows) {
      throw RowCountMismatch(name + ": cached file has " + std::to_string(out.size()) + " rows, expected " +
                             std::to_string(info.rows));
    }
    return out;
  }

  std::vector<std::string> payloads;
  if (source) {
    payloads.push_back(read_file(*source));
  } else {
    if (info.urls.empty()) {
      throw NetworkUnavailable(name + " has no public download; supply the file as the source (then it is cached)");
    }
    for (const std::string& url : info.urls) payloads.push_back(http_get(url));
  }
  Dataset out = parse_benchmark_raw(name, payloads);
  if (out.size() != info.rows) {
    throw RowCountMismatch(name + ": parsed " + std::to_string(out.size()) + " rows, expected " +
                           std::to_string(info.rows));
  }
  fs::create_directories(dir);
  const std::string csv = format_csv(out);
  write_file(data_path, csv);
  write_file(sum_path, sha256_hex(csv) + "\n");
  write_schema(schema, dir / "schema.json");
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << bytes;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace dpglm
