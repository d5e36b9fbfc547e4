#include "dpglm/archive.hpp"

#include <zlib.h>

#include <charconv>
#include <map>
#include <sstream>

#include "dpglm/base_measures.hpp"
#include "dpglm/data_io.hpp"
#include "dpglm/errors.hpp"

namespace dpglm {

using nlohmann::json;

namespace {

std::string family_name(Family f) {
  switch (f) {
    case Family::GaussianLinear: return "gaussian";
    case Family::MultinomialLogistic: return "multinomial";
    case Family::PoissonLog: return "poisson";
  }
  return "gaussian";
}

Family family_from(const std::string& s) {
  if (s == "gaussian") return Family::GaussianLinear;
  if (s == "multinomial") return Family::MultinomialLogistic;
  if (s == "poisson") return Family::PoissonLog;
  throw ValidationError("archive: unknown family '" + s + "'");
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw ValidationError("archive: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json covariate_prior_json(const CovariatePrior& prior) {
  if (const auto* p = std::get_if<NigPrior>(&prior)) {
    return {{"kind", "nig"}, {"shape", p->shape}, {"scale", p->scale}, {"loc", p->loc}, {"nu", p->nu}};
  }
  if (const auto* p = std::get_if<LogNormalMeanVar>(&prior)) {
    return {{"kind", "lognormal"},
            {"mean_loc", p->mean_loc},
            {"mean_sd", p->mean_sd},
            {"log_var_loc", p->log_var_loc},
            {"log_var_sd", p->log_var_sd}};
  }
  return {{"kind", "dirichlet"}, {"concentration", std::get<DirichletLevels>(prior).concentration}};
}

CovariatePrior covariate_prior_from(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "nig") return NigPrior{j.at("shape"), j.at("scale"), j.at("loc"), j.at("nu")};
  if (kind == "lognormal") {
    return LogNormalMeanVar{j.at("mean_loc"), j.at("mean_sd"), j.at("log_var_loc"), j.at("log_var_sd")};
  }
  if (kind == "dirichlet") return DirichletLevels{j.at("concentration").get<std::vector<double>>()};
  throw ValidationError("archive: unknown covariate prior '" + kind + "'");
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Rows of a CSV payload without its header; checks the header and width.
std::vector<std::vector<std::string>> table_rows(const std::string& text, const std::string& header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) throw ValidationError("archive: bad table header, expected " + header);
  const std::size_t width = split_line(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_line(line));
    if (rows.back().size() != width) throw ValidationError("archive: bad table row '" + line + "'");
  }
  return rows;
}

template <class T>
T parse_number(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    if constexpr (std::is_floating_point_v<T>) {
      if (s == "inf") return std::numeric_limits<T>::infinity();
      if (s == "-inf") return -std::numeric_limits<T>::infinity();
      if (s == "nan") return std::numeric_limits<T>::quiet_NaN();
    }
    throw ValidationError("archive: bad number '" + s + "'");
  }
  return v;
}

std::string real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_real(v);
}

}  // namespace

json spec_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = family_name(spec.family);
  j["num_classes"] = spec.num_classes;
  j["response_uses_covariates"] = spec.response_uses_covariates;
  json comps = json::array();
  for (CovariateComponent c : spec.covariate_components) {
    comps.push_back(c == CovariateComponent::GaussianDiag ? "gaussian" : "multinomial");
  }
  j["covariate_components"] = comps;
  json priors = json::array();
  for (const CovariatePrior& p : spec.base.covariates) priors.push_back(covariate_prior_json(p));
  j["covariate_priors"] = priors;
  if (const auto* m = std::get_if<MvnigPrior>(&spec.base.response)) {
    j["response_prior"] = {{"kind", "mvnig"},
                           {"mean", std::vector<double>(m->mean.data(), m->mean.data() + m->mean.size())},
                           {"cov", matrix_to_json(m->cov)},
                           {"shape", m->shape},
                           {"scale", m->scale}};
  } else {
    const auto& g = std::get<IndependentGaussianPrior>(spec.base.response);
    json r = {{"kind", "independent"}, {"mean", matrix_to_json(g.mean)}, {"var", matrix_to_json(g.var)}};
    r["dispersion"] = g.dispersion ? json{{"loc", g.dispersion->loc}, {"sd", g.dispersion->sd}} : json(nullptr);
    j["response_prior"] = r;
  }
  if (const auto* a = std::get_if<GammaAlphaPrior>(&spec.alpha)) {
    j["alpha"] = {{"prior", "gamma"}, {"shape", a->shape}, {"rate", a->rate}, {"initial", a->initial}};
  } else {
    j["alpha"] = {{"prior", "fixed"}, {"value", std::get<FixedAlpha>(spec.alpha).value}};
  }
  return j;
}

ModelSpec spec_from_json(const json& j, const DataSchema& schema) {
  ModelSpec spec;
  try {
    spec.family = family_from(j.at("family"));
    spec.num_classes = j.at("num_classes");
    spec.response_uses_covariates = j.at("response_uses_covariates");
    for (const json& c : j.at("covariate_components")) {
      spec.covariate_components.push_back(c == "gaussian" ? CovariateComponent::GaussianDiag
                                                          : CovariateComponent::Multinomial);
    }
    for (const json& p : j.at("covariate_priors")) spec.base.covariates.push_back(covariate_prior_from(p));
    const json& r = j.at("response_prior");
    if (r.at("kind") == "mvnig") {
      const auto mean = r.at("mean").get<std::vector<double>>();
      spec.base.response = MvnigPrior{Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                                      matrix_from_json(r.at("cov")), r.at("shape"), r.at("scale")};
    } else {
      IndependentGaussianPrior g{matrix_from_json(r.at("mean")), matrix_from_json(r.at("var")), std::nullopt};
      if (!r.at("dispersion").is_null()) g.dispersion = LogNormalVariance{r["dispersion"].at("loc"), r["dispersion"].at("sd")};
      spec.base.response = g;
    }
    const json& a = j.at("alpha");
    if (a.at("prior") == "gamma") {
      spec.alpha = GammaAlphaPrior{a.at("shape"), a.at("rate"), a.at("initial")};
    } else {
      spec.alpha = FixedAlpha{a.at("value")};
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("archive: malformed model spec: ") + e.what());
  }
  const ValidationReport report = validate_spec(schema, spec);
  if (!report.ok()) throw SchemaMismatch("archive: model spec does not fit its schema: " + report.violations.front());
  return spec;
}

json norm_stats_to_json(const NormStats& stats) {
  json cov = json::array();
  for (const auto& s : stats.covariates) cov.push_back(s ? json{{"mean", s->mean}, {"sd", s->sd}} : json(nullptr));
  json j{{"covariates", cov}};
  j["response"] = stats.response ? json{{"mean", stats.response->mean}, {"sd", stats.response->sd}} : json(nullptr);
  return j;
}

NormStats norm_stats_from_json(const json& j) {
  NormStats out;
  for (const json& s : j.at("covariates")) {
    out.covariates.push_back(s.is_null() ? std::nullopt : std::optional<NormStat>(NormStat{s.at("mean"), s.at("sd")}));
  }
  if (!j.at("response").is_null()) out.response = NormStat{j["response"].at("mean"), j["response"].at("sd")};
  return out;
}

std::string format_samples_csv(const std::vector<PosteriorSample>& samples) {
  std::string out = "sample,iteration,alpha,cluster,count,param,dim,index,value\n";
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const PosteriorSample& sample = samples[s];
    for (std::size_t c = 0; c < sample.clusters.size(); ++c) {
      const SampleCluster& cl = sample.clusters[c];
      const std::string prefix = std::to_string(s) + "," + std::to_string(sample.iteration) + "," + real(sample.alpha) +
                                 "," + std::to_string(c) + "," + std::to_string(cl.count) + ",";
      auto emit = [&](const char* param, std::size_t dim, std::size_t index, double value) {
        out += prefix + param + "," + std::to_string(dim) + "," + std::to_string(index) + "," + real(value) + "\n";
      };
      for (std::size_t j = 0; j < cl.params.x.size(); ++j) {
        if (const auto* g = std::get_if<GaussianParams>(&cl.params.x[j])) {
          emit("x_mean", j, 0, g->mean);
          emit("x_var", j, 0, g->var);
        } else {
          const auto& probs = std::get<std::vector<double>>(cl.params.x[j]);
          for (std::size_t k = 0; k < probs.size(); ++k) emit("x_prob", j, k, probs[k]);
        }
      }
      const Eigen::MatrixXd& beta = cl.params.y.beta;
      for (Eigen::Index r = 0; r < beta.rows(); ++r) {
        for (Eigen::Index k = 0; k < beta.cols(); ++k) {
          emit("beta", static_cast<std::size_t>(r), static_cast<std::size_t>(k), beta(r, k));
        }
      }
      emit("y_var", 0, 0, cl.params.y.var);
    }
  }
  return out;
}

std::string format_labels_csv(const std::vector<PosteriorSample>& samples) {
  std::string out = "sample,row,label\n";
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (std::size_t i = 0; i < samples[s].labels.size(); ++i) {
      out += std::to_string(s) + "," + std::to_string(i) + "," + std::to_string(samples[s].labels[i]) + "\n";
    }
  }
  return out;
}

std::string format_diagnostics_csv(const ChainDiagnostics& diagnostics) {
  std::string out = "iteration,log_joint,num_clusters,alpha\n";
  for (const IterationRecord& r : diagnostics.trace) {
    out += std::to_string(r.iteration) + "," + real(r.log_joint) + "," + std::to_string(r.num_clusters) + "," +
           real(r.alpha) + "\n";
  }
  return out;
}

std::string gzip_compress(const std::string& data) {
  z_stream zs{};
  // windowBits 15 + 16 selects the gzip wrapper; without deflateSetHeader
  // zlib writes a zero modification time and no file name.
  if (deflateInit2(&zs, 9, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) throw Error("zlib: deflateInit2 failed");
  std::string out;
  out.resize(deflateBound(&zs, static_cast<uLong>(data.size())));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("zlib: deflate failed");
  out.resize(zs.total_out);
  return out;
}

std::string gzip_decompress(const std::string& data) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw Error("zlib: inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ValidationError("archive: not a valid gzip stream");
    }
    out.append(buf, sizeof buf - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw ValidationError("archive: truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::string encode_archive(const ModelArchive& archive) {
  json doc;
  doc["format"] = kArchiveFormat;
  doc["config"] = archive.config;
  doc["schema"] = schema_to_json(archive.training.schema);
  doc["norm_stats"] = archive.training.norm_stats ? norm_stats_to_json(*archive.training.norm_stats) : json(nullptr);
  doc["spec"] = spec_to_json(archive.spec);
  Dataset plain = archive.training;
  plain.norm_stats.reset();
  doc["training_csv"] = format_csv(plain);
  doc["samples_csv"] = format_samples_csv(archive.samples);
  doc["labels_csv"] = format_labels_csv(archive.samples);
  doc["diagnostics_csv"] = format_diagnostics_csv(archive.diagnostics);
  doc["diagnostics"] = {{"acceptance_rate", archive.diagnostics.acceptance_rate},
                        {"proposals", archive.diagnostics.proposals},
                        {"final_steps", archive.diagnostics.final_steps}};
  return gzip_compress(doc.dump());
}

ModelArchive decode_archive(const std::string& bytes) {
  json doc;
  try {
    doc = json::parse(gzip_decompress(bytes));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("archive: bad metadata: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kArchiveFormat) {
    throw ValidationError(std::string("archive: expected format ") + kArchiveFormat);
  }
  ModelArchive out;
  try {
    out.config = doc.at("config");
    const DataSchema schema = parse_schema(doc.at("schema"));
    out.training = parse_csv(doc.at("training_csv").get<std::string>(), schema);
    if (!doc.at("norm_stats").is_null()) out.training.norm_stats = norm_stats_from_json(doc["norm_stats"]);
    out.spec = spec_from_json(doc.at("spec"), schema);

    const json& diag = doc.at("diagnostics");
    out.diagnostics.acceptance_rate = diag.at("acceptance_rate").is_null() ? 0.0 : diag["acceptance_rate"].get<double>();
    out.diagnostics.proposals = diag.at("proposals");
    out.diagnostics.final_steps = diag.at("final_steps").get<std::vector<double>>();
    for (const auto& row : table_rows(doc.at("diagnostics_csv"), "iteration,log_joint,num_clusters,alpha")) {
      out.diagnostics.trace.push_back({parse_number<std::size_t>(row[0]), parse_number<double>(row[1]),
                                       parse_number<std::size_t>(row[2]), parse_number<double>(row[3])});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("archive: malformed document: ") + e.what());
  }

  const DesignLayout layout(out.training.schema, out.spec.response_uses_covariates);
  const auto p = static_cast<Eigen::Index>(layout.width());
  const Eigen::Index k = out.spec.response_width();
  const std::size_t d = out.training.dims();

  // Samples first, so the label table can be checked against them.
  std::map<std::size_t, PosteriorSample> by_index;
  for (const auto& row : table_rows(doc["samples_csv"], "sample,iteration,alpha,cluster,count,param,dim,index,value")) {
    const auto s = parse_number<std::size_t>(row[0]);
    const auto c = parse_number<std::size_t>(row[3]);
    const auto dim = parse_number<std::size_t>(row[6]);
    const auto idx = parse_number<std::size_t>(row[7]);
    const double value = parse_number<double>(row[8]);
    PosteriorSample& sample = by_index[s];
    sample.iteration = parse_number<std::size_t>(row[1]);
    sample.alpha = parse_number<double>(row[2]);
    if (c >= sample.clusters.size()) {
      if (c != sample.clusters.size()) throw ValidationError("archive: clusters out of order in sample " + row[0]);
      SampleCluster cl;
      cl.count = parse_number<std::size_t>(row[4]);
      for (std::size_t j = 0; j < d; ++j) {
        if (out.spec.covariate_components[j] == CovariateComponent::GaussianDiag) {
          cl.params.x.emplace_back(GaussianParams{});
        } else {
          cl.params.x.emplace_back(std::vector<double>(
              static_cast<std::size_t>(out.training.schema.covariate(j).kind.levels), 0.0));
        }
      }
      cl.params.y.beta = Eigen::MatrixXd::Zero(p, k);
      sample.clusters.push_back(std::move(cl));
    }
    ClusterParams& params = sample.clusters[c].params;
    const std::string& param = row[5];
    auto bad = [&] { return ValidationError("archive: parameter " + param + " out of range"); };
    if (param == "x_mean" || param == "x_var") {
      if (dim >= d) throw bad();
      auto* g = std::get_if<GaussianParams>(&params.x[dim]);
      if (!g) throw bad();
      (param == "x_mean" ? g->mean : g->var) = value;
    } else if (param == "x_prob") {
      if (dim >= d) throw bad();
      auto* probs = std::get_if<std::vector<double>>(&params.x[dim]);
      if (!probs || idx >= probs->size()) throw bad();
      (*probs)[idx] = value;
    } else if (param == "beta") {
      if (static_cast<Eigen::Index>(dim) >= p || static_cast<Eigen::Index>(idx) >= k) throw bad();
      params.y.beta(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(idx)) = value;
    } else if (param == "y_var") {
      params.y.var = value;
    } else {
      throw ValidationError("archive: unknown parameter " + param);
    }
  }

  const std::size_t n = out.training.size();
  for (auto& [s, sample] : by_index) sample.labels.assign(n, kUnassigned);
  for (const auto& row : table_rows(doc["labels_csv"], "sample,row,label")) {
    const auto s = parse_number<std::size_t>(row[0]);
    const auto i = parse_number<std::size_t>(row[1]);
    const auto label = parse_number<std::size_t>(row[2]);
    auto it = by_index.find(s);
    if (it == by_index.end() || i >= n || label >= it->second.clusters.size()) {
      throw ValidationError("archive: label row out of range");
    }
    it->second.labels[i] = label;
  }

  const PreparedData prepared(out.training, layout);
  std::size_t expect = 0;
  for (auto& [s, sample] : by_index) {
    if (s != expect++) throw ValidationError("archive: sample indices are not contiguous");
    std::vector<std::vector<std::size_t>> members(sample.clusters.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (sample.labels[i] == kUnassigned) throw ValidationError("archive: missing label in sample " + std::to_string(s));
      members[sample.labels[i]].push_back(i);
    }
    for (std::size_t c = 0; c < members.size(); ++c) {
      sample.clusters[c].stats = stats_of(out.spec, layout, prepared, members[c]);
    }
    if (const std::string why = sample.check_invariants(); !why.empty()) {
      throw ValidationError("archive: sample " + std::to_string(s) + " is inconsistent: " + why);
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

void write_archive(const ModelArchive& archive, const std::filesystem::path& path) {
  write_file(path, encode_archive(archive));
}

ModelArchive read_archive(const std::filesystem::path& path) { return decode_archive(read_file(path)); }

}  // namespace dpglm
