#include "dpglm/config.hpp"

#include <set>

#include "dpglm/errors.hpp"

namespace dpglm {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_[key].is_null();
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <class T>
  std::optional<T> opt(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return as<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "is required");
    return as<T>(key);
  }

  double positive(const std::string& key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field(key), "must be a positive number");
    return v;
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), field(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void done() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
    }
  }

 private:
  template <class T>
  T as(const std::string& key) {
    const json& v = j_[key];
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(field(key), "must be a nonnegative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(field(key), "must be a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "must be true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key), "must be a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

CovariatePrior parse_covariate_prior(Section s) {
  const std::string kind = s.require<std::string>("kind");
  CovariatePrior out;
  if (kind == "nig") {
    NigPrior p;
    p.shape = s.positive("shape", p.shape);
    p.scale = s.positive("scale", p.scale);
    p.loc = s.get<double>("loc", p.loc);
    p.nu = s.positive("nu", p.nu);
    out = p;
  } else if (kind == "lognormal") {
    LogNormalMeanVar p;
    p.mean_loc = s.get<double>("mean_loc", p.mean_loc);
    p.mean_sd = s.positive("mean_sd", p.mean_sd);
    p.log_var_loc = s.get<double>("log_var_loc", p.log_var_loc);
    p.log_var_sd = s.positive("log_var_sd", p.log_var_sd);
    out = p;
  } else if (kind == "dirichlet") {
    DirichletLevels p;
    if (s.has("concentration")) {
      const json& c = s.raw("concentration");
      if (c.is_array()) {
        for (const json& v : c) {
          if (!v.is_number() || !(v.get<double>() > 0.0)) throw ConfigError(s.field("concentration"), "entries must be positive");
          p.concentration.push_back(v.get<double>());
        }
      } else {
        p.concentration.push_back(s.positive("concentration", 1.0));
      }
    }
    out = p;
  } else {
    throw ConfigError(s.field("kind"), "expected nig, lognormal or dirichlet");
  }
  s.done();
  return out;
}

Family parse_family(const std::string& name, const std::string& field) {
  if (name == "gaussian") return Family::GaussianLinear;
  if (name == "multinomial") return Family::MultinomialLogistic;
  if (name == "poisson") return Family::PoissonLog;
  throw ConfigError(field, "expected gaussian, multinomial or poisson");
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  cfg.raw = doc;
  Section root(doc, "");

  if (root.has("data")) {
    Section d = root.sub("data");
    DataConfig& out = cfg.data;
    if (auto v = d.opt<std::string>("csv")) out.csv = *v;
    if (auto v = d.opt<std::string>("schema")) out.schema = *v;
    if (auto v = d.opt<std::string>("benchmark")) {
      benchmark_info(*v);
      out.benchmark = *v;
    }
    if (auto v = d.opt<std::string>("source")) out.source = *v;
    if (auto v = d.opt<std::string>("cache")) out.cache = *v;
    out.normalize = d.get<bool>("normalize", true);
    if (d.has("synthetic")) {
      Section s = d.sub("synthetic");
      SyntheticSource syn;
      syn.kind = s.require<std::string>("kind");
      if (syn.kind != "heteroscedastic" && syn.kind != "spurious") {
        throw ConfigError(s.field("kind"), "expected heteroscedastic or spurious");
      }
      syn.n = s.get<std::size_t>("n", syn.n);
      if (syn.n == 0) throw ConfigError(s.field("n"), "must be positive");
      syn.num_spurious = s.get<std::size_t>("num_spurious", syn.num_spurious);
      syn.seed = s.get<std::uint64_t>("seed", syn.seed);
      s.done();
      out.synthetic = syn;
    }
    const int sources = (out.csv ? 1 : 0) + (out.benchmark ? 1 : 0) + (out.synthetic ? 1 : 0);
    if (sources > 1) throw ConfigError("data", "give exactly one of csv, benchmark or synthetic");
    if (out.csv && !out.schema) throw ConfigError("data.schema", "is required with data.csv");
    d.done();
  }

  if (root.has("model")) {
    Section m = root.sub("model");
    ModelConfig& out = cfg.model;
    if (auto f = m.opt<std::string>("family")) out.family = parse_family(*f, m.field("family"));
    out.response_uses_covariates = m.get<bool>("response_uses_covariates", true);
    if (m.has("covariate_prior")) out.continuous_prior = parse_covariate_prior(m.sub("covariate_prior"));
    if (std::holds_alternative<DirichletLevels>(out.continuous_prior)) {
      throw ConfigError("model.covariate_prior.kind", "continuous columns take nig or lognormal");
    }
    out.dirichlet_concentration = m.positive("dirichlet_concentration", 1.0);
    if (m.has("columns")) {
      Section cols = m.sub("columns");
      for (const auto& [name, _] : m.raw("columns").items()) {
        out.column_priors[name] = parse_covariate_prior(cols.sub(name));
      }
      cols.done();
    }
    if (m.has("response_prior")) {
      Section r = m.sub("response_prior");
      ResponsePriorConfig rp;
      rp.kind = r.require<std::string>("kind");
      if (rp.kind != "mvnig" && rp.kind != "independent") {
        throw ConfigError(r.field("kind"), "expected mvnig or independent");
      }
      rp.mean = r.get<double>("mean", rp.mean);
      rp.cov = r.positive("cov", rp.cov);
      rp.shape = r.positive("shape", rp.shape);
      rp.scale = r.positive("scale", rp.scale);
      if (r.has("dispersion")) {
        Section ds = r.sub("dispersion");
        LogNormalVariance lv;
        lv.loc = ds.get<double>("loc", lv.loc);
        lv.sd = ds.positive("sd", lv.sd);
        ds.done();
        rp.dispersion = lv;
      }
      r.done();
      out.response_prior = rp;
    }
    if (m.has("alpha")) {
      Section a = m.sub("alpha");
      const std::string kind = a.get<std::string>("prior", "gamma");
      if (kind == "gamma") {
        GammaAlphaPrior g;
        g.shape = a.positive("shape", g.shape);
        g.rate = a.positive("rate", g.rate);
        g.initial = a.positive("initial", g.initial);
        out.alpha = g;
      } else if (kind == "fixed") {
        out.alpha = FixedAlpha{a.positive("value", 1.0)};
      } else {
        throw ConfigError(a.field("prior"), "expected gamma or fixed");
      }
      a.done();
    }
    m.done();
  }

  if (root.has("chain")) {
    Section c = root.sub("chain");
    ChainConfig& out = cfg.chain;
    out.burn_in = c.get<std::size_t>("burn_in", out.burn_in);
    out.thin = c.get<std::size_t>("thin", out.thin);
    out.total_iterations = c.get<std::size_t>("total_iterations", out.total_iterations);
    out.aux_count = c.get<std::size_t>("aux_count", out.aux_count);
    out.adapt_during_burnin = c.get<bool>("adapt_during_burnin", out.adapt_during_burnin);
    out.seed = c.get<std::uint64_t>("seed", out.seed);
    out.collapse = c.get<bool>("collapse", out.collapse);
    if (c.has("mh_steps")) {
      Section s = c.sub("mh_steps");
      out.mh_steps.covariate_mean = s.get<double>("covariate_mean", out.mh_steps.covariate_mean);
      out.mh_steps.covariate_log_var = s.get<double>("covariate_log_var", out.mh_steps.covariate_log_var);
      out.mh_steps.beta = s.get<double>("beta", out.mh_steps.beta);
      out.mh_steps.response_log_var = s.get<double>("response_log_var", out.mh_steps.response_log_var);
      s.done();
    }
    c.done();
  }
  cfg.chain.check();

  if (root.has("predict")) {
    Section p = root.sub("predict");
    PredictSettings& out = cfg.predict;
    out.band_level = p.get<double>("band_level", out.band_level);
    if (!(out.band_level > 0.0 && out.band_level <= 1.0)) throw ConfigError(p.field("band_level"), "must lie in (0, 1]");
    out.draws_per_sample = p.get<std::size_t>("draws_per_sample", out.draws_per_sample);
    if (out.draws_per_sample == 0) throw ConfigError(p.field("draws_per_sample"), "must be positive");
    out.predictor.prior.num_draws = p.get<std::size_t>("prior_draws", out.predictor.prior.num_draws);
    if (out.predictor.prior.num_draws == 0) throw ConfigError(p.field("prior_draws"), "must be positive");
    const std::string mode = p.get<std::string>("prior_mode", "analytic");
    if (mode == "analytic") {
      out.predictor.prior.mode = PriorTermEstimator::Mode::AnalyticConjugate;
    } else if (mode == "monte_carlo") {
      out.predictor.prior.mode = PriorTermEstimator::Mode::MonteCarlo;
    } else {
      throw ConfigError(p.field("prior_mode"), "expected analytic or monte_carlo");
    }
    const std::string term = p.get<std::string>("cluster_term", "explicit");
    if (term == "explicit") {
      out.predictor.cluster_term = ClusterTerm::ExplicitParams;
    } else if (term == "collapsed") {
      out.predictor.cluster_term = ClusterTerm::CollapsedStats;
    } else {
      throw ConfigError(p.field("cluster_term"), "expected explicit or collapsed");
    }
    out.predictor.seed = p.get<std::uint64_t>("seed", out.predictor.seed);
    p.done();
  }

  if (root.has("benchmark")) {
    Section b = root.sub("benchmark");
    BenchmarkSettings& out = cfg.benchmark;
    if (b.has("methods")) {
      out.methods.clear();
      const json& ms = b.raw("methods");
      if (!ms.is_array() || ms.empty()) throw ConfigError(b.field("methods"), "must be a nonempty list");
      for (const json& m : ms) {
        if (!m.is_string()) throw ConfigError(b.field("methods"), "entries must be strings");
        const std::string name = m.get<std::string>();
        if (name != "dpglm" && name != "dpmm" && name != "ols" && name != "poisson_glm" &&
            name.rfind("external:", 0) != 0) {
          throw ConfigError(b.field("methods"), "unknown method '" + name + "'");
        }
        out.methods.push_back(name);
      }
    }
    if (b.has("split")) {
      Section s = b.sub("split");
      SplitPlan plan;
      const json& sizes = s.raw("train_sizes");
      if (!sizes.is_array() || sizes.empty()) throw ConfigError(s.field("train_sizes"), "must be a nonempty list");
      for (const json& v : sizes) {
        if (!v.is_number_integer() || v.get<long long>() <= 0) {
          throw ConfigError(s.field("train_sizes"), "entries must be positive integers");
        }
        plan.train_sizes.push_back(v.get<std::size_t>());
      }
      plan.replications = s.get<std::size_t>("replications", plan.replications);
      if (plan.replications == 0) throw ConfigError(s.field("replications"), "must be positive");
      plan.test_size = s.opt<std::size_t>("test_size");
      plan.test_fraction = s.opt<double>("test_fraction");
      if (plan.test_fraction && !(*plan.test_fraction > 0.0 && *plan.test_fraction < 1.0)) {
        throw ConfigError(s.field("test_fraction"), "must lie in (0, 1)");
      }
      plan.seed = s.get<std::uint64_t>("seed", plan.seed);
      s.done();
      out.split = plan;
    }
    b.done();
  }

  if (root.has("output")) {
    Section o = root.sub("output");
    OutputSettings& out = cfg.output;
    out.archive = o.get<std::string>("archive", out.archive.string());
    if (auto v = o.opt<std::string>("predictions")) out.predictions = *v;
    if (auto v = o.opt<std::string>("diagnostics")) out.diagnostics = *v;
    out.dir = o.get<std::string>("dir", out.dir.string());
    o.done();
  }
  root.done();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
  }
  return parse_run_config(doc);
}

ModelSpec build_model_spec(const ModelConfig& config, const DataSchema& schema) {
  const ColumnType rtype = schema.response().kind.type;
  const Family family = config.family.value_or(rtype == ColumnType::CountResponse         ? Family::PoissonLog
                                                : rtype == ColumnType::CategoricalResponse ? Family::MultinomialLogistic
                                                                                           : Family::GaussianLinear);
  ModelSpec spec = default_model_spec(schema, family, config.response_uses_covariates);
  spec.alpha = config.alpha;
  for (std::size_t j = 0; j < schema.num_covariates(); ++j) {
    const Column& col = schema.covariate(j);
    if (col.kind.type == ColumnType::Categorical) {
      spec.base.covariates[j] =
          DirichletLevels{std::vector<double>(static_cast<std::size_t>(col.kind.levels), config.dirichlet_concentration)};
    } else {
      spec.base.covariates[j] = config.continuous_prior;
    }
    if (auto it = config.column_priors.find(col.name); it != config.column_priors.end()) {
      CovariatePrior prior = it->second;
      if (auto* dir = std::get_if<DirichletLevels>(&prior); dir && dir->concentration.size() == 1) {
        dir->concentration.assign(static_cast<std::size_t>(col.kind.levels), dir->concentration[0]);
      }
      spec.base.covariates[j] = prior;
    }
  }
  for (const auto& [name, _] : config.column_priors) {
    bool found = false;
    for (std::size_t j = 0; j < schema.num_covariates(); ++j) found = found || schema.covariate(j).name == name;
    if (!found) throw ConfigError("model.columns." + name, "no such covariate column");
  }
  if (config.response_prior) {
    const ResponsePriorConfig& r = *config.response_prior;
    const auto p = static_cast<Eigen::Index>(DesignLayout(schema, config.response_uses_covariates).width());
    if (r.kind == "mvnig") {
      if (family != Family::GaussianLinear) throw ConfigError("model.response_prior.kind", "mvnig needs the gaussian family");
      spec.base.response = MvnigPrior{Eigen::VectorXd::Constant(p, r.mean), r.cov * Eigen::MatrixXd::Identity(p, p),
                                      r.shape, r.scale};
    } else {
      const Eigen::Index k = spec.response_width();
      std::optional<LogNormalVariance> disp = r.dispersion;
      if (family == Family::GaussianLinear && !disp) disp = LogNormalVariance{};
      if (family != Family::GaussianLinear) disp.reset();
      spec.base.response = IndependentGaussianPrior{Eigen::MatrixXd::Constant(p, k, r.mean),
                                                    Eigen::MatrixXd::Constant(p, k, r.cov), disp};
    }
  }
  return spec;
}

Dataset load_configured_data(const DataConfig& config) {
  if (config.csv) return load_csv(*config.csv, *config.schema);
  if (config.benchmark) {
    return fetch_benchmark(*config.benchmark, config.cache.value_or(default_cache_dir()), config.source);
  }
  if (config.synthetic) {
    const SyntheticSource& s = *config.synthetic;
    if (s.kind == "heteroscedastic") return synth_heteroscedastic(s.n, s.seed);
    return synth_spurious(s.n, s.num_spurious, s.seed).data;
  }
  throw ConfigError("data", "no data source configured");
}

}  // namespace dpglm
