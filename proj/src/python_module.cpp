#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dpglm/archive.hpp"
#include "dpglm/baselines.hpp"
#include "dpglm/cli.hpp"
#include "dpglm/config.hpp"
#include "dpglm/data_io.hpp"
#include "dpglm/errors.hpp"
#include "dpglm/oracle.hpp"
#include "dpglm/pipeline.hpp"

namespace py = pybind11;
using namespace dpglm;

namespace {

RunConfig config_from(const std::string& text) { return parse_run_config(nlohmann::json::parse(text)); }

py::dict dataset_info(const Dataset& d) {
  py::dict out;
  py::list columns;
  for (const Column& c : d.schema.columns) columns.append(c.name);
  out["columns"] = columns;
  out["rows"] = d.size();
  return out;
}

Eigen::MatrixXd predictions_matrix(const std::vector<PredictionRow>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) << rows[r].mean, rows[r].lo, rows[r].hi;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_dpglm, m) {
  m.doc() = "Dirichlet process mixtures of generalized linear models";

  // Translators run newest first, so the subclass goes second.
  py::register_exception<Error>(m, "DpglmError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("covariates", &Dataset::covariates)
      .def_readonly("responses", &Dataset::responses)
      .def_property_readonly("columns",
                             [](const Dataset& d) {
                               std::vector<std::string> out;
                               for (const Column& c : d.schema.columns) out.push_back(c.name);
                               return out;
                             })
      .def_property_readonly("schema", [](const Dataset& d) { return schema_to_json(d.schema).dump(); })
      .def("__len__", &Dataset::size)
      .def("to_csv", [](const Dataset& d) { return format_csv(d); })
      .def("subset", &Dataset::subset)
      .def("__repr__", [](const Dataset& d) {
        return "<Dataset rows=" + std::to_string(d.size()) + " covariates=" + std::to_string(d.dims()) + ">";
      });

  m.def("synth_heteroscedastic", &synth_heteroscedastic, py::arg("n"), py::arg("seed") = 0);
  m.def("heteroscedastic_mean", &heteroscedastic_mean, py::arg("x"));
  m.def(
      "synth_spurious",
      [](std::size_t n, std::size_t k, std::uint64_t seed) {
        SpuriousData s = synth_spurious(n, k, seed);
        return py::make_tuple(std::move(s.data), s.components);
      },
      py::arg("n"), py::arg("num_spurious"), py::arg("seed") = 0);
  m.def(
      "load_csv", [](const std::string& csv, const std::string& schema) { return load_csv(csv, schema); },
      py::arg("csv"), py::arg("schema"));
  m.def(
      "parse_csv", [](const std::string& text, const std::string& schema_json) {
        return parse_csv(text, parse_schema(nlohmann::json::parse(schema_json)));
      },
      py::arg("text"), py::arg("schema_json"));
  m.def("normalize", &normalize);
  m.def("dataset_info", &dataset_info);

  py::class_<ModelArchive>(m, "Model")
      .def_property_readonly("num_samples", [](const ModelArchive& a) { return a.samples.size(); })
      .def_property_readonly("training", [](const ModelArchive& a) { return a.training; })
      .def_property_readonly("cluster_counts",
                             [](const ModelArchive& a) {
                               std::vector<std::size_t> out;
                               for (const auto& s : a.samples) out.push_back(s.num_clusters());
                               return out;
                             })
      .def_property_readonly("alphas",
                             [](const ModelArchive& a) {
                               std::vector<double> out;
                               for (const auto& s : a.samples) out.push_back(s.alpha);
                               return out;
                             })
      .def_property_readonly("log_joint",
                             [](const ModelArchive& a) {
                               std::vector<double> out;
                               for (const auto& r : a.diagnostics.trace) out.push_back(r.log_joint);
                               return out;
                             })
      .def("to_bytes", [](const ModelArchive& a) { return py::bytes(encode_archive(a)); })
      .def("save", [](const ModelArchive& a, const std::string& path) { write_archive(a, path); })
      .def(
          "predict",
          [](const ModelArchive& a, const Eigen::MatrixXd& x, bool bands, std::uint64_t seed) {
            PredictOptions o;
            if (!a.config.is_null()) o = predict_options(parse_run_config(a.config));
            o.bands = bands;
            o.predictor.seed = seed;
            return predictions_matrix(predict_archive(a, x, o));
          },
          py::arg("x"), py::arg("bands") = true, py::arg("seed") = 0,
          "Rows of (mean, lo, hi) on the original response scale.")
      .def("oracle", &oracle_predict, py::arg("x"));

  m.def(
      "fit", [](const std::string& config_json) { return fit_model(config_from(config_json)); },
      py::arg("config_json"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "fit_dataset", [](const std::string& config_json, const Dataset& data) { return fit_model(config_from(config_json), data); },
      py::arg("config_json"), py::arg("data"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "load_model", [](const std::string& path) { return read_archive(path); }, py::arg("path"));
  m.def(
      "model_from_bytes", [](const py::bytes& b) { return decode_archive(std::string(b)); }, py::arg("data"));
  m.def(
      "validate_config", [](const std::string& config_json) { config_from(config_json); }, py::arg("config_json"));

  m.def(
      "benchmark",
      [](const std::string& config_json, const Dataset& data, std::size_t threads) {
        const BenchmarkResult r = run_benchmark(config_from(config_json), data, threads);
        return py::make_tuple(format_raw_csv(r.raw), format_summary_csv(r.summary), format_table(r.summary));
      },
      py::arg("config_json"), py::arg("data"), py::arg("threads") = 1);

  m.def(
      "compute_metrics",
      [](const std::vector<double>& p, const std::vector<double>& t) {
        const Metrics r = compute_metrics(p, t);
        return py::make_tuple(r.mae, r.mse);
      },
      py::arg("predictions"), py::arg("truths"));

  m.def(
      "fit_ols",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
        Eigen::MatrixXd design(x.rows(), x.cols() + 1);
        design << Eigen::VectorXd::Ones(x.rows()), x;
        return fit_ols(design, y).beta;
      },
      py::arg("x"), py::arg("y"), "Coefficients (intercept first).");
  m.def(
      "fit_poisson_glm",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
        Eigen::MatrixXd design(x.rows(), x.cols() + 1);
        design << Eigen::VectorXd::Ones(x.rows()), x;
        return fit_poisson_glm(design, y).beta;
      },
      py::arg("x"), py::arg("y"), "Coefficients (intercept first).");

  m.def("enumerate_partitions", &enumerate_partitions, py::arg("n"));
  m.def("crp_partition_log_prior", &crp_partition_log_prior, py::arg("partition"), py::arg("alpha"));
  m.def(
      "exact_posterior_expectation",
      [](const Dataset& data, double alpha, const Eigen::VectorXd& x) {
        const ModelSpec spec = default_model_spec(data.schema, Family::GaussianLinear);
        return exact_posterior_expectation(data, spec, alpha, x)[0];
      },
      py::arg("data"), py::arg("alpha"), py::arg("x"),
      "Exact E[Y | x, data] under the default conjugate Gaussian model (n <= 8).");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
