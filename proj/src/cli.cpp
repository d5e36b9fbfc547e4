#include "dpglm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <ostream>

#include "dpglm/archive.hpp"
#include "dpglm/config.hpp"
#include "dpglm/data_io.hpp"
#include "dpglm/errors.hpp"
#include "dpglm/pipeline.hpp"

namespace dpglm {

namespace fs = std::filesystem;

namespace {

fs::path under(const fs::path& dir, const fs::path& p) { return p.is_absolute() ? p : dir / p; }

void write_output(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, bytes);
}

RunConfig load_with_overrides(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig cfg = load_run_config(path);
  if (seed) {
    cfg.chain.seed = *seed;
    cfg.raw["chain"]["seed"] = *seed;
  }
  return cfg;
}

int cmd_fit(const std::string& config_path, const std::optional<std::uint64_t>& seed, std::string archive_out,
            std::string diagnostics_out, std::ostream& out) {
  const RunConfig cfg = load_with_overrides(config_path, seed);
  const Dataset raw = load_configured_data(cfg.data);
  const ModelArchive archive = fit_model(cfg, raw);
  const fs::path archive_path = archive_out.empty() ? under(cfg.output.dir, cfg.output.archive) : fs::path(archive_out);
  write_output(archive_path, encode_archive(archive));
  std::optional<fs::path> diag;
  if (!diagnostics_out.empty()) {
    diag = diagnostics_out;
  } else if (cfg.output.diagnostics) {
    diag = under(cfg.output.dir, *cfg.output.diagnostics);
  }
  if (diag) write_output(*diag, format_diagnostics_csv(archive.diagnostics));
  out << "wrote " << archive_path.string() << " (" << archive.samples.size() << " samples, "
      << archive.training.size() << " rows)\n";
  return 0;
}

int cmd_predict(const std::string& archive_path, const std::string& queries, const std::string& out_path,
                const std::optional<std::uint64_t>& seed, bool oracle, bool no_band, std::ostream& out) {
  const ModelArchive archive = read_archive(archive_path);
  PredictOptions options;
  if (!archive.config.is_null()) options = predict_options(parse_run_config(archive.config));
  if (seed) options.predictor.seed = *seed;
  options.bands = !no_band;
  const Eigen::MatrixXd q = load_query_csv(queries, archive.training.schema);
  const std::vector<PredictionRow> rows = predict_archive(archive, q, options);
  std::string csv = format_predictions_csv(archive, rows);
  if (oracle) {
    if (archive.spec.family != Family::GaussianLinear) throw ValidationError("--oracle needs a Gaussian model");
    const std::vector<double> exact = oracle_predict(archive, q);
    // Append one column to the CSV already built.
    std::string merged;
    std::size_t pos = 0, line = 0;
    while (pos < csv.size()) {
      const std::size_t nl = csv.find('\n', pos);
      merged += csv.substr(pos, nl - pos);
      merged += line == 0 ? ",oracle" : "," + format_real(exact[line - 1]);
      merged += "\n";
      pos = nl + 1;
      ++line;
    }
    csv = merged;
  }
  if (out_path.empty()) {
    out << csv;
  } else {
    write_output(out_path, csv);
  }
  return 0;
}

int cmd_benchmark(const std::string& config_path, const std::optional<std::uint64_t>& seed, std::size_t threads,
                  const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = load_with_overrides(config_path, seed);
  const Dataset raw = load_configured_data(cfg.data);
  const BenchmarkResult result = run_benchmark(cfg, raw, threads);
  const fs::path dir = out_dir.empty() ? cfg.output.dir : fs::path(out_dir);
  const std::string table = format_table(result.summary);
  write_output(dir / "benchmark_raw.csv", format_raw_csv(result.raw));
  write_output(dir / "benchmark_summary.csv", format_summary_csv(result.summary));
  write_output(dir / "benchmark_table.txt", table);
  out << table;
  return 0;
}

int cmd_synthesize(const std::string& kind, std::size_t n, std::size_t num_spurious, std::uint64_t seed,
                   const std::string& out_path, const std::string& schema_path, const std::string& components_path,
                   std::ostream& out) {
  if (n == 0) throw ValidationError("--n must be positive");
  Dataset data;
  std::vector<int> components;
  if (kind == "heteroscedastic") {
    data = synth_heteroscedastic(n, seed);
  } else if (kind == "spurious") {
    SpuriousData s = synth_spurious(n, num_spurious, seed);
    data = std::move(s.data);
    components = std::move(s.components);
  } else {
    throw ValidationError("--kind must be heteroscedastic or spurious");
  }
  if (!components_path.empty() && components.empty()) throw ValidationError("--components needs --kind spurious");
  const std::string csv = format_csv(data);
  if (out_path.empty()) {
    out << csv;
  } else {
    write_output(out_path, csv);
  }
  if (!schema_path.empty()) write_output(schema_path, schema_to_json(data.schema).dump(2) + "\n");
  if (!components_path.empty()) {
    std::string text = "row,component\n";
    for (std::size_t i = 0; i < components.size(); ++i) text += std::to_string(i) + "," + std::to_string(components[i]) + "\n";
    write_output(components_path, text);
  }
  return 0;
}

int cmd_plotdata(const std::string& archive_path, const std::string& benchmark_path, std::size_t grid,
                 const std::optional<double>& lo, const std::optional<double>& hi, const std::string& out_path,
                 std::ostream& out) {
  std::string csv;
  if (!archive_path.empty() == !benchmark_path.empty()) {
    throw ValidationError("give exactly one of --archive or --benchmark");
  }
  if (!archive_path.empty()) {
    const ModelArchive archive = read_archive(archive_path);
    PredictOptions options;
    if (!archive.config.is_null()) options = predict_options(parse_run_config(archive.config));
    csv = format_curve_csv(mean_curve(archive, grid, lo, hi, options));
  } else {
    const std::vector<ReplicationResult> raw = parse_raw_csv(read_file(benchmark_path));
    csv = format_error_series_csv(summarize(raw, {}));
  }
  if (out_path.empty()) {
    out << csv;
  } else {
    write_output(out_path, csv);
  }
  return 0;
}

int cmd_fetch(const std::string& name, const std::string& cache, const std::string& source, std::ostream& out) {
  benchmark_info(name);
  const fs::path dir = cache.empty() ? default_cache_dir() : fs::path(cache);
  const Dataset data =
      fetch_benchmark(name, dir, source.empty() ? std::nullopt : std::optional<fs::path>(source));
  out << name << ": " << data.size() << " rows, " << data.dims() << " covariates, cached under "
      << (dir / name).string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dirichlet process mixtures of generalized linear models"};
  app.name("dpglm");
  app.require_subcommand(1);

  std::string config, archive, queries, out_path, diagnostics, out_dir, kind = "heteroscedastic", schema_out,
                                                                          components_out, bench_csv, name, cache,
                                                                          source;
  std::optional<std::uint64_t> seed;
  std::uint64_t synth_seed = 0;
  std::size_t threads = 1, n = 250, num_spurious = 0, grid = 100;
  std::optional<double> lo, hi;
  bool oracle = false, no_band = false;

  auto* fit = app.add_subcommand("fit", "Run the sampler and write a model archive");
  fit->add_option("--config", config, "Run configuration (JSON)")->required();
  fit->add_option("--seed", seed, "Overrides chain.seed");
  fit->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  fit->add_option("--archive", archive, "Archive path (overrides output.archive)");
  fit->add_option("--diagnostics", diagnostics, "Diagnostics CSV path");

  auto* predict = app.add_subcommand("predict", "Predict from an archive for a CSV of query covariates");
  predict->add_option("--archive", archive, "Model archive")->required();
  predict->add_option("--queries", queries, "Query CSV (covariate columns)")->required();
  predict->add_option("--out", out_path, "Output CSV (default stdout)");
  predict->add_option("--seed", seed, "Seed for the predictive bands");
  predict->add_flag("--oracle", oracle, "Add the exact posterior expectation (n <= 8, conjugate, fixed alpha)");
  predict->add_flag("--no-band", no_band, "Skip predictive bands");

  auto* bench = app.add_subcommand("benchmark", "Replicated train/test comparison of methods");
  bench->add_option("--config", config, "Run configuration (JSON)")->required();
  bench->add_option("--seed", seed, "Overrides chain.seed");
  bench->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  bench->add_option("--out-dir", out_dir, "Directory for the result files (overrides output.dir)");

  auto* synth = app.add_subcommand("synthesize", "Write a synthetic dataset");
  synth->add_option("--kind", kind, "heteroscedastic or spurious");
  synth->add_option("--n", n, "Rows");
  synth->add_option("--num-spurious", num_spurious, "Spurious dimensions (spurious kind)");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", out_path, "Output CSV (default stdout)");
  synth->add_option("--schema", schema_out, "Also write the schema JSON here");
  synth->add_option("--components", components_out, "Also write the mixture component of each row");

  auto* plot = app.add_subcommand("plotdata", "Emit plot series as CSV");
  plot->add_option("--archive", archive, "Mean curve and band over the first covariate");
  plot->add_option("--benchmark", bench_csv, "Error-versus-size series from a raw benchmark CSV");
  plot->add_option("--grid", grid, "Grid points");
  plot->add_option("--lo", lo, "Grid start (original scale)");
  plot->add_option("--hi", hi, "Grid end (original scale)");
  plot->add_option("--out", out_path, "Output CSV (default stdout)");

  auto* fetch = app.add_subcommand("fetch", "Download or import a benchmark dataset into the cache");
  fetch->add_option("--name", name, "cmb, ccs or solar")->required();
  fetch->add_option("--cache", cache, "Cache root (default $DPGLM_CACHE or ./cache)");
  fetch->add_option("--source", source, "Local raw file to import instead of downloading");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) return cmd_fit(config, seed, archive, diagnostics, out);
    if (predict->parsed()) return cmd_predict(archive, queries, out_path, seed, oracle, no_band, out);
    if (bench->parsed()) return cmd_benchmark(config, seed, threads, out_dir, out);
    if (synth->parsed()) {
      return cmd_synthesize(kind, n, num_spurious, synth_seed, out_path, schema_out, components_out, out);
    }
    if (plot->parsed()) return cmd_plotdata(archive, bench_csv, grid, lo, hi, out_path, out);
    if (fetch->parsed()) return cmd_fetch(name, cache, source, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace dpglm
