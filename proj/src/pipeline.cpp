#include "dpglm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dpglm/baselines.hpp"
#include "dpglm/data_io.hpp"
#include "dpglm/errors.hpp"
#include "dpglm/oracle.hpp"
#include "dpglm/predictor.hpp"

namespace dpglm {

Metrics compute_metrics(const std::vector<double>& predictions, const std::vector<double>& truths) {
  if (predictions.size() != truths.size()) {
    throw LengthMismatch("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) throw EmptyInput("metrics: no predictions");
  Metrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - truths[i];
    m.mae += std::abs(e);
    m.mse += e * e;
  }
  const auto n = static_cast<double>(predictions.size());
  m.mae /= n;
  m.mse /= n;
  return m;
}

ModelArchive fit_model(const RunConfig& config) { return fit_model(config, load_configured_data(config.data)); }

ModelArchive fit_model(const RunConfig& config, const Dataset& raw) {
  if (raw.size() == 0) throw EmptyInput("fit: the dataset has no rows");
  ModelArchive out;
  out.config = config.raw;
  out.training = config.data.normalize ? normalize(raw) : raw;
  out.spec = build_model_spec(config.model, out.training.schema);
  ChainResult chain = run_chain(out.training, out.spec, config.chain);
  out.samples = std::move(chain.samples);
  out.diagnostics = std::move(chain.diagnostics);
  return out;
}

PredictOptions predict_options(const RunConfig& config) {
  PredictOptions o;
  o.band_level = config.predict.band_level;
  o.draws_per_sample = config.predict.draws_per_sample;
  o.predictor = config.predict.predictor;
  return o;
}

namespace {

PredictionRow predict_model_scale(const Predictor& predictor, const ModelArchive& archive,
                                  const Eigen::Ref<const Eigen::VectorXd>& x, const PredictOptions& options,
                                  std::uint64_t row) {
  const NormStats stats = archive.training.norm_stats.value_or(NormStats{});
  PredictionRow out;
  if (archive.spec.family == Family::MultinomialLogistic) {
    const Classification c = predictor.classify(archive.samples, x);
    out.label = c.label;
    out.probabilities = c.probabilities;
    out.mean = out.lo = out.hi = static_cast<double>(c.label);
    return out;
  }
  const PredictiveEstimate est = predictor.predict(archive.samples, x);
  out.mean = denormalize_response(est.mean[0], stats);
  if (options.bands) {
    Rng rng = Rng(options.predictor.seed).split(row);
    const auto [lo, hi] = predictor.predictive_band(archive.samples, x, options.band_level, options.draws_per_sample, rng);
    out.lo = denormalize_response(lo, stats);
    out.hi = denormalize_response(hi, stats);
  } else {
    out.lo = out.hi = out.mean;
  }
  return out;
}

Eigen::MatrixXd to_model_scale(const ModelArchive& archive, const Eigen::MatrixXd& queries) {
  if (static_cast<std::size_t>(queries.cols()) != archive.training.dims()) {
    throw SchemaMismatch("query has " + std::to_string(queries.cols()) + " covariate columns, the model expects " +
                         std::to_string(archive.training.dims()));
  }
  if (!archive.training.norm_stats) return queries;
  Eigen::MatrixXd out(queries.rows(), queries.cols());
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    out.row(q) = normalize_row(queries.row(q).transpose(), *archive.training.norm_stats).transpose();
  }
  return out;
}

}  // namespace

std::vector<PredictionRow> predict_archive(const ModelArchive& archive, const Eigen::MatrixXd& queries,
                                           const PredictOptions& options) {
  const Eigen::MatrixXd model_queries = to_model_scale(archive, queries);
  const Predictor predictor(archive.spec, archive.training.schema, options.predictor);
  std::vector<PredictionRow> rows;
  rows.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < model_queries.rows(); ++q) {
    rows.push_back(predict_model_scale(predictor, archive, model_queries.row(q).transpose(), options,
                                       static_cast<std::uint64_t>(q)));
  }
  return rows;
}

std::string format_predictions_csv(const ModelArchive& archive, const std::vector<PredictionRow>& rows) {
  std::string out;
  const Column& response = archive.training.schema.response();
  if (archive.spec.family == Family::MultinomialLogistic) {
    out = "row,label";
    for (int k = 0; k < response.kind.levels; ++k) {
      out += ",p_" + (static_cast<std::size_t>(k) < response.level_names.size() ? response.level_names[k]
                                                                                  : std::to_string(k));
    }
    out += "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t label = rows[r].label.value_or(0);
      out += std::to_string(r) + "," +
             (label < response.level_names.size() ? response.level_names[label] : std::to_string(label));
      for (Eigen::Index k = 0; k < rows[r].probabilities.size(); ++k) out += "," + format_real(rows[r].probabilities[k]);
      out += "\n";
    }
    return out;
  }
  out = "row,mean,lo,hi\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += std::to_string(r) + "," + format_real(rows[r].mean) + "," + format_real(rows[r].lo) + "," +
           format_real(rows[r].hi) + "\n";
  }
  return out;
}

std::vector<double> oracle_predict(const ModelArchive& archive, const Eigen::MatrixXd& queries) {
  const auto* fixed = std::get_if<FixedAlpha>(&archive.spec.alpha);
  if (!fixed) throw ValidationError("oracle mode needs a fixed alpha (model.alpha.prior = fixed)");
  const Eigen::MatrixXd model_queries = to_model_scale(archive, queries);
  const NormStats stats = archive.training.norm_stats.value_or(NormStats{});
  std::vector<double> out;
  for (Eigen::Index q = 0; q < model_queries.rows(); ++q) {
    const Eigen::VectorXd e = exact_posterior_expectation(archive.training, archive.spec, fixed->value,
                                                          model_queries.row(q).transpose());
    out.push_back(denormalize_response(e[0], stats));
  }
  return out;
}

// ---------------------------------------------------------------- benchmark

namespace {

struct ExternalPredictions {
  // (train_size, replication) -> row index -> prediction
  std::map<std::pair<std::size_t, std::size_t>, std::map<std::size_t, double>> values;
};

ExternalPredictions load_external(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "train_size,replication,index,prediction") {
    throw ValidationError("external predictions " + path + ": header must be train_size,replication,index,prediction");
  }
  ExternalPredictions out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b, c, d;
    std::getline(fields, a, ',');
    std::getline(fields, b, ',');
    std::getline(fields, c, ',');
    std::getline(fields, d);
    try {
      std::size_t pos = 0;
      const double value = std::stod(d, &pos);
      if (pos != d.size()) throw std::invalid_argument(d);
      out.values[{std::stoul(a), std::stoul(b)}][std::stoul(c)] = value;
    } catch (const std::exception&) {
      throw ParseError(lineno, "external", "bad prediction row '" + line + "'");
    }
  }
  return out;
}

std::uint64_t replication_seed(std::uint64_t base, std::size_t size, std::size_t rep) {
  return splitmix64(base ^ splitmix64((static_cast<std::uint64_t>(size) << 20) + rep));
}

std::vector<double> truths(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::vector<double> out;
  for (std::size_t i : rows) out.push_back(data.responses[static_cast<Eigen::Index>(i)]);
  return out;
}

std::vector<double> dp_predictions(const Dataset& train, const Dataset& data, const std::vector<std::size_t>& test,
                                   const ModelSpec& spec, const ChainConfig& chain, const PredictorConfig& pcfg) {
  const ChainResult result = run_chain(train, spec, chain);
  const Predictor predictor(spec, train.schema, pcfg);
  std::vector<double> out;
  for (std::size_t i : test) {
    const Eigen::VectorXd x = data.covariates.row(static_cast<Eigen::Index>(i)).transpose();
    if (spec.family == Family::MultinomialLogistic) {
      out.push_back(static_cast<double>(predictor.classify(result.samples, x).label));
    } else {
      out.push_back(predictor.predict(result.samples, x).mean[0]);
    }
  }
  return out;
}

Metrics run_method(const std::string& method, const Split& split, const Dataset& data, const RunConfig& config,
                   const std::map<std::string, ExternalPredictions>& external) {
  const std::vector<double> truth = truths(data, split.test);
  if (method.rfind("external:", 0) == 0) {
    const ExternalPredictions& ext = external.at(method);
    auto it = ext.values.find({split.train_size, split.replication});
    if (it == ext.values.end()) {
      throw ValidationError(method + ": no predictions for train size " + std::to_string(split.train_size) +
                            ", replication " + std::to_string(split.replication));
    }
    std::vector<double> pred;
    for (std::size_t i : split.test) {
      auto v = it->second.find(i);
      if (v == it->second.end()) throw ValidationError(method + ": missing prediction for row " + std::to_string(i));
      pred.push_back(v->second);
    }
    return compute_metrics(pred, truth);
  }

  const Dataset train = data.subset(split.train);
  ChainConfig chain = config.chain;
  chain.seed = replication_seed(config.chain.seed, split.train_size, split.replication);
  PredictorConfig pcfg = config.predict.predictor;
  pcfg.seed = replication_seed(pcfg.seed, split.train_size, split.replication);

  std::vector<double> pred;
  if (method == "dpglm") {
    pred = dp_predictions(train, data, split.test, build_model_spec(config.model, train.schema), chain, pcfg);
  } else if (method == "dpmm") {
    pred = dp_predictions(train, data, split.test, dpmm_spec(build_model_spec(config.model, train.schema)), chain, pcfg);
  } else if (method == "ols") {
    const OlsModel model = fit_ols(train);
    for (std::size_t i : split.test) pred.push_back(predict_ols(model, data.covariates.row(static_cast<Eigen::Index>(i)).transpose()));
  } else if (method == "poisson_glm") {
    if (data.schema.response().kind.type != ColumnType::CountResponse) {
      throw ValidationError("poisson_glm needs a count response");
    }
    try {
      const PoissonGlmModel model = fit_poisson_glm(train);
      for (std::size_t i : split.test) {
        pred.push_back(predict_poisson_glm(model, data.covariates.row(static_cast<Eigen::Index>(i)).transpose()));
      }
    } catch (const SeparationDetected& e) {
      std::cerr << "warning: poisson_glm, train size " << split.train_size << ", replication " << split.replication
                << ": " << e.what() << "; replication dropped\n";
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return {nan, nan};
    }
  } else {
    throw ValidationError("unknown benchmark method '" + method + "'");
  }
  return compute_metrics(pred, truth);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

BenchmarkResult run_benchmark(const RunConfig& config, const Dataset& raw, std::size_t threads) {
  if (!config.benchmark.split) throw ConfigError("benchmark.split", "is required for benchmark runs");
  const Dataset data = config.data.normalize ? normalize(raw) : raw;
  const std::vector<Split> splits = make_splits(data.size(), *config.benchmark.split);
  const std::vector<std::string>& methods = config.benchmark.methods;

  std::map<std::string, ExternalPredictions> external;
  for (const std::string& m : methods) {
    if (m.rfind("external:", 0) == 0) external[m] = load_external(m.substr(9));
  }

  struct Task {
    std::size_t method, split;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (std::size_t m = 0; m < methods.size(); ++m) tasks.push_back({m, s});
  }
  std::vector<std::optional<Metrics>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        results[t] = run_method(methods[tasks[t].method], splits[tasks[t].split], data, config, external);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, tasks.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  BenchmarkResult out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Split& s = splits[tasks[t].split];
    out.raw.push_back({methods[tasks[t].method], s.train_size, s.replication, *results[t]});
  }
  std::map<std::string, std::size_t> rank;
  for (std::size_t m = 0; m < methods.size(); ++m) rank.emplace(methods[m], m);
  std::stable_sort(out.raw.begin(), out.raw.end(), [&](const ReplicationResult& a, const ReplicationResult& b) {
    return std::tie(rank[a.method], a.train_size, a.replication) < std::tie(rank[b.method], b.train_size, b.replication);
  });
  out.summary = summarize(out.raw, methods);
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicationResult>& raw, const std::vector<std::string>& method_order) {
  std::vector<std::string> order = method_order;
  for (const auto& r : raw) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  }
  std::set<std::size_t> sizes;
  for (const auto& r : raw) sizes.insert(r.train_size);
  std::vector<SummaryRow> out;
  for (const std::string& method : order) {
    for (std::size_t size : sizes) {
      std::vector<double> mae, mse;
      bool any = false;
      for (const auto& r : raw) {
        if (r.method != method || r.train_size != size) continue;
        any = true;
        if (std::isfinite(r.metrics.mae) && std::isfinite(r.metrics.mse)) {
          mae.push_back(r.metrics.mae);
          mse.push_back(r.metrics.mse);
        }
      }
      if (!any) continue;
      SummaryRow row{method, size, mae.size()};
      row.mae_mean = mean_of(mae);
      row.mae_std = sd_of(mae, row.mae_mean);
      row.mse_mean = mean_of(mse);
      row.mse_std = sd_of(mse, row.mse_mean);
      out.push_back(row);
    }
  }
  return out;
}

std::string format_raw_csv(const std::vector<ReplicationResult>& raw) {
  std::string out = "method,train_size,replication,mae,mse\n";
  for (const auto& r : raw) {
    out += r.method + "," + std::to_string(r.train_size) + "," + std::to_string(r.replication) + "," +
           format_real(r.metrics.mae) + "," + format_real(r.metrics.mse) + "\n";
  }
  return out;
}

std::vector<ReplicationResult> parse_raw_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,train_size,replication,mae,mse") {
    throw ValidationError("benchmark CSV: header must be method,train_size,replication,mae,mse");
  }
  std::vector<ReplicationResult> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    // Method names may contain commas only through external paths; split
    // from the right.
    std::vector<std::string> f;
    std::string rest = line;
    for (int k = 0; k < 4; ++k) {
      const std::size_t c = rest.rfind(',');
      if (c == std::string::npos) throw ParseError(lineno, "row", "expected 5 fields");
      f.insert(f.begin(), rest.substr(c + 1));
      rest.resize(c);
    }
    try {
      out.push_back({rest, std::stoul(f[0]), std::stoul(f[1]), {std::stod(f[2]), std::stod(f[3])}});
    } catch (const std::exception&) {
      throw ParseError(lineno, "row", "bad numeric field");
    }
  }
  return out;
}

std::string format_summary_csv(const std::vector<SummaryRow>& summary) {
  std::string out = "method,train_size,replications,mae_mean,mae_std,mse_mean,mse_std\n";
  for (const auto& r : summary) {
    out += r.method + "," + std::to_string(r.train_size) + "," + std::to_string(r.replications) + "," +
           format_real(r.mae_mean) + "," + format_real(r.mae_std) + "," + format_real(r.mse_mean) + "," +
           format_real(r.mse_std) + "\n";
  }
  return out;
}

std::string format_table(const std::vector<SummaryRow>& summary) {
  std::vector<std::string> methods;
  std::set<std::size_t> size_set;
  for (const auto& r : summary) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    size_set.insert(r.train_size);
  }
  const std::vector<std::size_t> sizes(size_set.begin(), size_set.end());
  auto find = [&](const std::string& m, std::size_t s) -> const SummaryRow* {
    for (const auto& r : summary) {
      if (r.method == m && r.train_size == s) return &r;
    }
    return nullptr;
  };
  // Best (lowest) mean per column; every tie is starred.
  std::vector<std::string> header{"method"};
  std::vector<std::vector<std::string>> cells(methods.size(), std::vector<std::string>{});
  for (std::size_t m = 0; m < methods.size(); ++m) cells[m].push_back(methods[m]);
  for (std::size_t s : sizes) {
    for (int metric = 0; metric < 2; ++metric) {
      header.push_back(std::string(metric == 0 ? "MAE" : "MSE") + " n=" + std::to_string(s));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& m : methods) {
        if (const SummaryRow* r = find(m, s)) {
          const double v = metric == 0 ? r->mae_mean : r->mse_mean;
          if (std::isfinite(v)) best = std::min(best, v);
        }
      }
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const SummaryRow* r = find(methods[m], s);
        if (!r || r->replications == 0) {
          cells[m].push_back("-");
          continue;
        }
        const double v = metric == 0 ? r->mae_mean : r->mse_mean;
        const double sd = metric == 0 ? r->mae_std : r->mse_std;
        cells[m].push_back(fixed2(v) + " ± " + fixed2(sd) + (std::isfinite(best) && fixed2(v) == fixed2(best) ? " *" : ""));
      }
    }
  }
  // Column widths in code points; the ± sign is two bytes.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = width(header[c]);
    for (const auto& row : cells) widths[c] = std::max(widths[c], width(row[c]));
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c] + std::string(widths[c] - width(row[c]), ' ');
      out += c + 1 < row.size() ? "  " : "";
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& row : cells) out += line(row);
  return out;
}

std::vector<CurvePoint> mean_curve(const ModelArchive& archive, std::size_t grid, std::optional<double> lo,
                                   std::optional<double> hi, const PredictOptions& options) {
  const Dataset& train = archive.training;
  if (train.dims() == 0) throw ValidationError("plotdata: the model has no covariates");
  if (train.schema.covariate(0).kind.type != ColumnType::Continuous) {
    throw ValidationError("plotdata: the first covariate must be continuous");
  }
  if (grid < 2) throw ValidationError("plotdata: the grid needs at least 2 points");
  const NormStats stats = train.norm_stats.value_or(NormStats{});
  const auto to_raw = [&](double v, std::size_t j) {
    const auto& s = j < stats.covariates.size() ? stats.covariates[j] : std::nullopt;
    return s ? s->mean + s->sd * v : v;
  };
  const auto to_model = [&](double v, std::size_t j) {
    const auto& s = j < stats.covariates.size() ? stats.covariates[j] : std::nullopt;
    return s ? (v - s->mean) / s->sd : v;
  };
  const double a = lo.value_or(to_raw(train.covariates.col(0).minCoeff(), 0));
  const double b = hi.value_or(to_raw(train.covariates.col(0).maxCoeff(), 0));
  if (!(a < b)) throw ValidationError("plotdata: the grid range is empty");

  // Other covariates: training mean, or the most common level.
  Eigen::VectorXd base(static_cast<Eigen::Index>(train.dims()));
  for (std::size_t j = 0; j < train.dims(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (train.schema.covariate(j).kind.type == ColumnType::Categorical) {
      std::vector<std::size_t> counts(static_cast<std::size_t>(train.schema.covariate(j).kind.levels), 0);
      for (Eigen::Index i = 0; i < train.covariates.rows(); ++i) ++counts[static_cast<std::size_t>(train.covariates(i, jj))];
      base[jj] = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    } else {
      base[jj] = train.covariates.col(jj).mean();
    }
  }
  const Predictor predictor(archive.spec, train.schema, options.predictor);
  std::vector<CurvePoint> out;
  for (std::size_t g = 0; g < grid; ++g) {
    const double x = a + (b - a) * static_cast<double>(g) / static_cast<double>(grid - 1);
    Eigen::VectorXd q = base;
    q[0] = to_model(x, 0);
    const PredictionRow r = predict_model_scale(predictor, archive, q, options, g);
    out.push_back({x, r.mean, r.lo, r.hi});
  }
  return out;
}

std::string format_curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "x,mean,lo,hi\n";
  for (const auto& p : curve) {
    out += format_real(p.x) + "," + format_real(p.mean) + "," + format_real(p.lo) + "," + format_real(p.hi) + "\n";
  }
  return out;
}

std::string format_error_series_csv(const std::vector<SummaryRow>& summary) {
  std::vector<SummaryRow> rows = summary;
  std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) { return a.train_size < b.train_size; });
  std::string out = "train_size,method,mae_mean,mae_std,mse_mean,mse_std\n";
  for (const auto& r : rows) {
    out += std::to_string(r.train_size) + "," + r.method + "," + format_real(r.mae_mean) + "," + format_real(r.mae_std) +
           "," + format_real(r.mse_mean) + "," + format_real(r.mse_std) + "\n";
  }
  return out;
}

}  // namespace dpglm
