#include <doctest.h>

#include <algorithm>

#include "dpglm/baselines.hpp"
#include "dpglm/data_io.hpp"
#include "dpglm/errors.hpp"
#include "dpglm/gibbs.hpp"
#include "dpglm/glm.hpp"
#include "dpglm/oracle.hpp"
#include "dpglm/predictor.hpp"
#include "helpers.hpp"

using namespace dpglm;
using namespace dpglm::test;

namespace {

const Eigen::VectorXd& scalar(double v) {
  static thread_local Eigen::VectorXd x(1);
  x[0] = v;
  return x;
}

ClusterParams class_params(double x_mean, double x_var, Eigen::MatrixXd beta) {
  ClusterParams p;
  p.x.emplace_back(GaussianParams{x_mean, x_var});
  p.y.beta = std::move(beta);
  return p;
}

Dataset class_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int classes) {
  std::vector<Column> cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j) cols.push_back(continuous("x" + std::to_string(j + 1)));
  std::vector<std::string> names;
  for (int k = 0; k < classes; ++k) names.push_back("k" + std::to_string(k));
  return make_dataset(cols, {"cls", ColumnKind::categorical_response(classes), names}, x, y);
}

Dataset two_moons(std::size_t n, double noise, std::uint64_t seed) {
  Rng rng(seed);
  const double pi = std::acos(-1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const bool upper = i % 2 == 0;
    const double t = pi * rng.uniform();
    x(i, 0) = upper ? std::cos(t) : 1.0 - std::cos(t);
    x(i, 1) = upper ? std::sin(t) : 0.5 - std::sin(t);
    x(i, 0) += noise * rng.normal();
    x(i, 1) += noise * rng.normal();
    y[i] = upper ? 0.0 : 1.0;
  }
  return class_dataset(x, y, 2);
}

}  // namespace

TEST_SUITE("predictor") {
  TEST_CASE("vanishing alpha returns the single cluster's regression") {
    const Dataset d = random_gaussian_dataset(3, 1);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    const Predictor pred(spec, d.schema);
    const PosteriorSample s = make_sample(spec, d, {0, 0, 0}, {gaussian_params({{0.0, 1.0}}, {0.0, 1.0}, 1.0)}, 1e-12);
    for (double x : {-2.0, -0.3, 0.0, 1.7}) CHECK(std::abs(pred.conditional_expectation(s, scalar(x))[0] - x) < 1e-9);
  }

  TEST_CASE("mirror-image clusters cancel at the origin") {
    const Dataset d = random_gaussian_dataset(4, 2);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    const Predictor pred(spec, d.schema);
    const PosteriorSample s = make_sample(
        spec, d, {0, 0, 1, 1},
        {gaussian_params({{-1.0, 0.5}}, {2.0, 0.3}, 1.0), gaussian_params({{1.0, 0.5}}, {-2.0, 0.3}, 1.0)}, 0.7);
    CHECK(std::abs(pred.conditional_expectation(s, scalar(0.0))[0]) < 1e-12);
  }

  TEST_CASE("collapsed partition average reproduces the exact posterior expectation") {
    const Dataset d = random_gaussian_dataset(4, 3);
    const double alpha = 1.2;
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    PredictorConfig cfg;
    cfg.cluster_term = ClusterTerm::CollapsedStats;
    const Predictor pred(spec, d.schema, cfg);
    const std::vector<double> weights = exact_partition_posterior(d, spec, alpha);
    const auto partitions = enumerate_partitions(4);
    for (double x : {-1.5, 0.0, 0.4, 2.2}) {
      double avg = 0.0;
      for (std::size_t k = 0; k < partitions.size(); ++k) {
        const auto rgs = restricted_growth_string(partitions[k], 4);
        // Params are unused by the collapsed term.
        std::vector<ClusterParams> params(partitions[k].size(), gaussian_params({{0.0, 1.0}}, {0.0, 0.0}, 1.0));
        avg += weights[k] * pred.conditional_expectation(make_sample(spec, d, rgs, params, alpha), scalar(x))[0];
      }
      CHECK(std::abs(avg - exact_posterior_expectation(d, spec, alpha, scalar(x))[0]) < 1e-10);
    }
  }

  TEST_CASE("averaging over samples") {
    const Dataset d = random_gaussian_dataset(4, 4);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    const Predictor pred(spec, d.schema);
    Rng rng(5);
    std::vector<PosteriorSample> samples;
    for (int s = 0; s < 7; ++s) {
      samples.push_back(make_sample(spec, d, {0, 1, 0, 1}, {sample_prior(spec.base, rng), sample_prior(spec.base, rng)},
                                    0.5 + rng.uniform()));
    }
    const Eigen::VectorXd& x = scalar(0.3);
    const std::span<const PosteriorSample> one(samples.data(), 1);
    CHECK(pred.predict(one, x).mean[0] == pred.conditional_expectation(samples[0], x)[0]);
    const std::vector<PosteriorSample> twice{samples[0], samples[0]};
    CHECK(std::abs(pred.predict(twice, x).mean[0] - pred.predict(one, x).mean[0]) < 1e-15);
    const PredictiveEstimate all = pred.predict(samples, x);
    double avg = 0.0;
    for (const auto& s : samples) avg += pred.conditional_expectation(s, x)[0] / 7.0;
    CHECK(std::abs(all.mean[0] - avg) < 1e-12);
    CHECK(all.per_sample_means.size() == 7);
  }

  TEST_CASE("the mean is a convex combination of cluster and prior means") {
    const Dataset d = random_gaussian_dataset(6, 6);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    const Predictor pred(spec, d.schema);
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<ClusterParams> params{sample_prior(spec.base, rng), sample_prior(spec.base, rng),
                                        sample_prior(spec.base, rng)};
      const PosteriorSample s = make_sample(spec, d, {0, 1, 2, 0, 1, 2}, params, 0.1 + 3 * rng.uniform());
      const double x = rng.normal(0, 2);
      double lo = 0.0, hi = 0.0;  // the prior mean is 0
      for (const auto& p : params) {
        const double m = p.y.beta(0, 0) + p.y.beta(1, 0) * x;
        lo = std::min(lo, m);
        hi = std::max(hi, m);
      }
      const double v = pred.conditional_expectation(s, scalar(x))[0];
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
  }

  TEST_CASE("shifting every intercept and the prior mean shifts the prediction") {
    const Dataset d = random_gaussian_dataset(4, 8);
    ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    Rng rng(9);
    std::vector<ClusterParams> params{sample_prior(spec.base, rng), sample_prior(spec.base, rng)};
    const double shift = 3.25;
    const double before = Predictor(spec, d.schema).conditional_expectation(make_sample(spec, d, {0, 0, 1, 1}, params, 1.1), scalar(0.6))[0];
    for (auto& p : params) p.y.beta(0, 0) += shift;
    std::get<MvnigPrior>(spec.base.response).mean[0] += shift;
    const double after = Predictor(spec, d.schema).conditional_expectation(make_sample(spec, d, {0, 0, 1, 1}, params, 1.1), scalar(0.6))[0];
    CHECK(after - before == doctest::Approx(shift).epsilon(1e-12));
  }

  TEST_CASE("classification: ties go to the lowest class") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    const Dataset d = class_dataset(x, Eigen::Vector2d(0, 1), 2);
    const ModelSpec spec = default_model_spec(d.schema, Family::MultinomialLogistic);
    const Predictor pred(spec, d.schema);
    const PosteriorSample s = make_sample(spec, d, {0, 0}, {class_params(0.0, 1.0, Eigen::MatrixXd::Zero(2, 2))}, 1e-12);
    const std::vector<PosteriorSample> samples{s};
    const Classification c = pred.classify(samples, scalar(0.0));
    CHECK(c.label == 0);
    CHECK(c.probabilities[0] == doctest::Approx(0.5).epsilon(1e-9));
  }

  TEST_CASE("classification: a dominant cluster sets the probabilities") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    const Dataset d = class_dataset(x, Eigen::Vector2d(0, 1), 2);
    const ModelSpec spec = default_model_spec(d.schema, Family::MultinomialLogistic);
    const Predictor pred(spec, d.schema);
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(2, 2);
    beta(0, 1) = std::log(9.0);
    const std::vector<PosteriorSample> samples{make_sample(spec, d, {0, 0}, {class_params(0.0, 1.0, beta)}, 1e-12)};
    const Classification c = pred.classify(samples, scalar(0.0));
    CHECK(c.label == 1);
    CHECK(std::abs(c.probabilities[1] - 0.9) < 1e-9);
    CHECK_THROWS_AS(Predictor(default_model_spec(random_gaussian_dataset(2, 1).schema, Family::GaussianLinear),
                              random_gaussian_dataset(2, 1).schema)
                        .classify(samples, scalar(0.0)),
                    ValidationError);
  }

  TEST_CASE("classification is unchanged by a common shift of class coefficients") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 1);
    const Dataset d = class_dataset(x, Eigen::Vector3d(0, 1, 2), 3);
    const ModelSpec spec = default_model_spec(d.schema, Family::MultinomialLogistic);
    const Predictor pred(spec, d.schema);
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<ClusterParams> params{sample_prior(spec.base, rng), sample_prior(spec.base, rng)};
      const std::vector<PosteriorSample> a{make_sample(spec, d, {0, 1, 1}, params, 1e-9)};
      for (auto& p : params) {
        const Eigen::Vector2d common(rng.normal(0, 3), rng.normal(0, 3));
        for (Eigen::Index k = 0; k < 3; ++k) p.y.beta.col(k) += common;
      }
      const std::vector<PosteriorSample> b{make_sample(spec, d, {0, 1, 1}, params, 1e-9)};
      const double q = rng.normal();
      const Classification ca = pred.classify(a, scalar(q)), cb = pred.classify(b, scalar(q));
      CHECK(ca.label == cb.label);
      CHECK((ca.probabilities - cb.probabilities).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("two moons are separated") {
    const Dataset train = two_moons(120, 0.1, 11), test = two_moons(400, 0.1, 12);
    const ModelSpec spec = default_model_spec(train.schema, Family::MultinomialLogistic);
    ChainConfig c;
    c.burn_in = 200;
    c.total_iterations = 400;
    c.thin = 4;
    c.seed = 13;
    const ChainResult r = run_chain(train, spec, c);
    const Predictor pred(spec, train.schema);
    std::size_t right = 0;
    for (Eigen::Index i = 0; i < test.covariates.rows(); ++i) {
      right += pred.classify(r.samples, test.covariates.row(i).transpose()).label == static_cast<std::size_t>(test.responses[i]);
    }
    CHECK(static_cast<double>(right) / 400.0 > 0.85);
  }

  TEST_CASE("band of a single known Gaussian cluster") {
    const Dataset d = random_gaussian_dataset(3, 14);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    const Predictor pred(spec, d.schema);
    const std::vector<PosteriorSample> samples{
        make_sample(spec, d, {0, 0, 0}, {gaussian_params({{0.0, 1.0}}, {0.5, 2.0}, 1.0)}, 1e-12)};
    Rng rng(15);
    const double eta = 0.5 + 2.0 * 0.25;
    const auto [lo, hi] = pred.predictive_band(samples, scalar(0.25), 0.9, 100000, rng);
    CHECK(std::abs(lo - (eta - 1.6448536)) < 0.03);
    CHECK(std::abs(hi - (eta + 1.6448536)) < 0.03);

    // Level 1 is clamped to 0.999: fresh draws still land inside.
    const auto [wlo, whi] = pred.predictive_band(samples, scalar(0.25), 1.0, 100000, rng);
    std::size_t inside = 0;
    for (int k = 0; k < 100000; ++k) {
      const double y = eta + rng.normal();
      inside += y >= wlo && y <= whi;
    }
    CHECK(inside >= 99800);
    CHECK_THROWS_AS(pred.predictive_band(samples, scalar(0.25), 0.0, 10, rng), ConfigError);
    CHECK_THROWS_AS(pred.predictive_band(samples, scalar(0.25), 0.9, 0, rng), ConfigError);
  }

  TEST_CASE("the mixture tracks a heteroscedastic curve better than a line") {
    const Dataset raw = synth_heteroscedastic(150, 16);
    const Dataset d = normalize(raw);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    ChainConfig c;
    c.burn_in = 300;
    c.total_iterations = 600;
    c.thin = 3;
    c.seed = 17;
    const ChainResult r = run_chain(d, spec, c);
    const Predictor pred(spec, d.schema);
    const OlsModel ols = fit_ols(d);
    const auto& xs = *d.norm_stats->covariates[0];
    const auto& ys = *d.norm_stats->response;
    double se_dp = 0.0, se_ols = 0.0;
    const int grid = 50;
    for (int g = 0; g < grid; ++g) {
      const double x = (g + 0.5) / grid;
      const double z = (x - xs.mean) / xs.sd;
      const double truth = (heteroscedastic_mean(x) - ys.mean) / ys.sd;
      se_dp += std::pow(pred.predict(r.samples, scalar(z)).mean[0] - truth, 2);
      se_ols += std::pow(predict_ols(ols, scalar(z)) - truth, 2);
    }
    MESSAGE("RMSE dp " << std::sqrt(se_dp / grid) << " ols " << std::sqrt(se_ols / grid));
    CHECK(se_dp < se_ols);
  }

  TEST_CASE("Monte Carlo prior term variance falls as one over the draws") {
    const Dataset d = random_gaussian_dataset(2, 18);
    ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    const PosteriorSample s = make_sample(spec, d, {0, 0}, {gaussian_params({{1.5, 0.3}}, {1.0, 0.0}, 1.0)}, 5.0);
    std::vector<double> log_n, log_var;
    for (std::size_t draws : {20u, 80u, 320u, 1280u}) {
      const Predictor pred(spec, d.schema, {PriorTermEstimator::monte_carlo(draws), ClusterTerm::ExplicitParams, 19});
      std::vector<double> values;
      for (std::uint64_t stream = 0; stream < 400; ++stream) values.push_back(pred.conditional_expectation(s, scalar(-0.5), stream)[0]);
      log_n.push_back(std::log(static_cast<double>(draws)));
      log_var.push_back(std::log(variance(values)));
    }
    const double mx = mean(log_n), my = mean(log_var);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < log_n.size(); ++k) {
      sxy += (log_n[k] - mx) * (log_var[k] - my);
      sxx += (log_n[k] - mx) * (log_n[k] - mx);
    }
    CHECK(std::abs(sxy / sxx + 1.0) < 0.2);
  }

  TEST_CASE("every weight underflowing is reported") {
    const Dataset d = random_gaussian_dataset(2, 20);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    const Predictor pred(spec, d.schema);
    const PosteriorSample s = make_sample(spec, d, {0, 0}, {gaussian_params({{0.0, 1.0}}, {0.0, 1.0}, 1.0)}, 1.0);
    CHECK_THROWS_AS(pred.conditional_expectation(s, scalar(1e300)), DegenerateWeights);
  }
}
