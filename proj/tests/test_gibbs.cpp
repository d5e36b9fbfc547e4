#include <doctest.h>

#include <algorithm>
#include <map>

#include "dpglm/errors.hpp"
#include "dpglm/gibbs.hpp"
#include "dpglm/glm.hpp"
#include "dpglm/oracle.hpp"
#include "helpers.hpp"

using namespace dpglm;
using namespace dpglm::test;

namespace {

ChainConfig short_chain(std::uint64_t seed = 1, bool collapse = true) {
  ChainConfig c;
  c.burn_in = 50;
  c.thin = 1;
  c.total_iterations = 150;
  c.seed = seed;
  c.collapse = collapse;
  return c;
}

ModelSpec fixed_alpha(ModelSpec spec, double alpha) {
  spec.alpha = FixedAlpha{alpha};
  return spec;
}

Dataset poisson_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = static_cast<double>(rng.uniform_index(2));
    y[i] = static_cast<double>(rng.poisson(std::exp(0.3 + 0.5 * x(i, 0))));
  }
  return make_dataset({continuous("a"), categorical("c", 2)}, {"n", ColumnKind::count_response(), {}}, x, y);
}

Dataset class_dataset(std::size_t n, std::uint64_t seed, int classes = 3) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.normal();
    y[i] = static_cast<double>(std::min<int>(classes - 1, static_cast<int>((x(i, 0) + 1.5) / 3.0 * classes)));
    if (y[i] < 0) y[i] = 0;
  }
  std::vector<std::string> names;
  for (int k = 0; k < classes; ++k) names.push_back("k" + std::to_string(k));
  return make_dataset({continuous("a")}, {"cls", ColumnKind::categorical_response(classes), names}, x, y);
}

std::size_t partition_index(const std::vector<std::size_t>& labels) {
  // Restricted growth form of the labelling, then its position.
  std::map<std::size_t, std::size_t> remap;
  std::vector<std::size_t> rgs;
  for (std::size_t z : labels) rgs.push_back(remap.emplace(z, remap.size()).first->second);
  const auto all = enumerate_partitions(labels.size());
  for (std::size_t k = 0; k < all.size(); ++k)
    if (restricted_growth_string(all[k], labels.size()) == rgs) return k;
  FAIL("partition not found");
  return 0;
}

}  // namespace

TEST_SUITE("gibbs_engine") {
  TEST_CASE("CRP prior weights exclude the datum itself") {
    const Dataset d = random_gaussian_dataset(4, 1);
    GibbsSampler g(fixed_alpha(default_model_spec(d.schema, Family::GaussianLinear), 1.0), d, short_chain());
    g.set_state({0, 0, 1, 2}, {}, 1.0);
    const CrpWeights w = crp_prior_logweights(g.state(), 3);
    REQUIRE(w.existing.size() == 2);
    CHECK(std::exp(w.existing[0].second) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::exp(w.existing[1].second) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(std::exp(w.new_cluster) == doctest::Approx(0.25).epsilon(1e-14));

    g.mutable_state().alpha = 1e12;
    const CrpWeights big = crp_prior_logweights(g.state(), 3);
    CHECK(std::exp(big.new_cluster) > 1.0 - 1e-10);
  }

  TEST_CASE("CRP weights sum to one") {
    Rng rng(2);
    const Dataset d = random_gaussian_dataset(12, 2);
    GibbsSampler g(default_model_spec(d.schema, Family::GaussianLinear), d, short_chain());
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<ClusterId> labels;
      for (int i = 0; i < 12; ++i) labels.push_back(rng.uniform_index(5));
      g.set_state(labels, {}, 0.1 + 5 * rng.uniform());
      for (std::size_t i = 0; i < 12; ++i) {
        const CrpWeights w = crp_prior_logweights(g.state(), i);
        double s = std::exp(w.new_cluster);
        for (const auto& e : w.existing) s += std::exp(e.second);
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("identical explicit clusters get identical probabilities") {
    const Dataset d = random_gaussian_dataset(5, 3);
    GibbsSampler g(fixed_alpha(default_model_spec(d.schema, Family::GaussianLinear), 1.0), d, short_chain(3, false));
    const ClusterParams shared = gaussian_params({{0.1, 1.3}}, {0.2, 0.4}, 0.7);
    const ClusterParams other = gaussian_params({{2.0, 0.5}}, {-1.0, 0.0}, 1.5);
    g.set_state({0, 0, 1, 1, 2}, {shared, shared, other}, 1.0);
    Rng rng(4);
    const AssignmentDistribution a = g.assignment_logprobs(4, rng);
    REQUIRE(a.num_existing() == 2);
    CHECK(a.log_probs[0] == doctest::Approx(a.log_probs[1]).epsilon(1e-14));
    double total = 0.0;
    for (double lp : a.log_probs) total += std::exp(lp);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }

  TEST_CASE("a near-degenerate matching cluster takes the datum") {
    const Dataset d = random_gaussian_dataset(5, 5);
    const double x4 = d.covariates(4, 0), y4 = d.responses[4];
    GibbsSampler g(fixed_alpha(default_model_spec(d.schema, Family::GaussianLinear), 1.0), d, short_chain(5, false));
    const ClusterParams sharp = gaussian_params({{x4, 1e-6}}, {y4, 0.0}, 1e-6);
    const ClusterParams broad = gaussian_params({{0.0, 1.0}}, {0.0, 0.0}, 1.0);
    g.set_state({0, 1, 1, 1, 0}, {sharp, broad}, 1.0);
    Rng rng(6);
    const AssignmentDistribution a = g.assignment_logprobs(4, rng);
    CHECK(std::exp(a.log_probs[0]) > 0.99);
  }

  TEST_CASE("collapsed conditionals match partition enumeration") {
    const Dataset d = random_gaussian_dataset(4, 7);
    const double alpha = 0.8;
    const ModelSpec spec = fixed_alpha(default_model_spec(d.schema, Family::GaussianLinear), alpha);
    const std::vector<double> exact = exact_partition_posterior(d, spec, alpha);
    GibbsSampler g(spec, d, short_chain(7));
    REQUIRE(g.fully_collapsed());
    const std::vector<std::vector<ClusterId>> starts{{0, 0, 1, 2}, {0, 1, 2, 3}, {0, 0, 0, 0}, {0, 1, 0, 1}};
    for (const auto& labels : starts) {
      g.set_state(labels, {}, alpha);
      for (std::size_t i = 0; i < 4; ++i) {
        Rng rng(8);
        const AssignmentDistribution a = g.assignment_logprobs(i, rng);
        std::vector<double> target;
        for (std::size_t k = 0; k < a.log_probs.size(); ++k) {
          std::vector<std::size_t> option(labels.begin(), labels.end());
          option[i] = k < a.num_existing() ? a.clusters[k] : 1000;
          target.push_back(exact[partition_index(option)]);
        }
        double total = 0.0;
        for (double t : target) total += t;
        for (std::size_t k = 0; k < target.size(); ++k) CHECK(std::abs(std::exp(a.log_probs[k]) - target[k] / total) < 1e-10);
      }
    }
  }

  TEST_CASE("chain visits partitions at their posterior frequencies") {
    const Dataset d = random_gaussian_dataset(3, 9);
    const double alpha = 1.0;
    const ModelSpec spec = fixed_alpha(default_model_spec(d.schema, Family::GaussianLinear), alpha);
    const std::vector<double> exact = exact_partition_posterior(d, spec, alpha);
    ChainConfig c;
    c.burn_in = 500;
    c.thin = 1;
    c.total_iterations = 40500;
    c.seed = 10;
    std::vector<double> freq(exact.size(), 0.0);
    run_chain(d, spec, c, [&](const PosteriorSample& s) { freq[partition_index(s.labels)] += 1.0 / 40000.0; });
    for (std::size_t k = 0; k < exact.size(); ++k) CHECK(std::abs(freq[k] - exact[k]) < 0.02);
  }

  TEST_CASE("one datum yields one cluster") {
    const Dataset d = random_gaussian_dataset(1, 11);
    GibbsSampler g(default_model_spec(d.schema, Family::GaussianLinear), d, short_chain());
    g.initialize();
    for (int t = 0; t < 5; ++t) g.sweep();
    CHECK(g.state().clusters.size() == 1);
    CHECK(g.state().check_invariants().empty());
  }

  TEST_CASE("invariants hold over many sweeps for every family") {
    const std::vector<std::pair<Dataset, Family>> cases{{random_gaussian_dataset(25, 12, 2), Family::GaussianLinear},
                                                        {poisson_dataset(25, 13), Family::PoissonLog},
                                                        {class_dataset(25, 14), Family::MultinomialLogistic}};
    for (const auto& [d, family] : cases) {
      for (bool collapse : {true, false}) {
        GibbsSampler g(default_model_spec(d.schema, family), d, short_chain(15, collapse));
        g.initialize();
        for (int t = 0; t < 100; ++t) {
          g.sweep();
          REQUIRE(g.state().check_invariants().empty());
          for (const Cluster& c : g.state().clusters) REQUIRE(check_params(c.params).empty());
          REQUIRE(std::isfinite(g.log_joint()));
        }
        CHECK(g.snapshot().check_invariants().empty());
      }
    }
  }

  TEST_CASE("alpha stays positive") {
    Rng rng(16);
    double a = 1.0;
    const GammaAlphaPrior prior{1.0, 1.0, 1.0};
    bool ok = true;
    for (int t = 0; t < 1000000; ++t) {
      a = resample_alpha(a, 1 + t % 7, 30, prior, rng);
      ok = ok && a > 0.0 && std::isfinite(a);
    }
    CHECK(ok);
  }

  TEST_CASE("alpha update leaves its conditional posterior invariant") {
    const GammaAlphaPrior prior{2.0, 0.5, 1.0};
    for (std::size_t k : {2u, 5u}) {
      const std::size_t n = 40;
      // Posterior mean by trapezoid on a fine grid.
      auto log_post = [&](double a) {
        return (prior.shape - 1 + static_cast<double>(k)) * std::log(a) - prior.rate * a + std::lgamma(a) -
               std::lgamma(a + static_cast<double>(n));
      };
      double z = 0.0, m = 0.0;
      const double h = 1e-4;
      for (double a = h; a < 80.0; a += h) {
        const double w = std::exp(log_post(a));
        z += w;
        m += a * w;
      }
      const double truth = m / z;
      Rng rng(17 + k);
      double a = 1.0, total = 0.0;
      const int draws = 200000;
      for (int t = 0; t < draws; ++t) {
        a = resample_alpha(a, k, n, prior, rng);
        total += a;
      }
      CHECK(std::abs(total / draws / truth - 1.0) < 0.02);
    }
  }

  TEST_CASE("more clusters push alpha up") {
    const GammaAlphaPrior prior{1.0, 1.0, 1.0};
    auto average = [&](std::size_t k) {
      Rng rng(18);
      double a = 1.0, total = 0.0;
      for (int t = 0; t < 20000; ++t) total += (a = resample_alpha(a, k, 100, prior, rng));
      return total / 20000.0;
    };
    CHECK(average(20) / average(2) > 1.5);
  }

  TEST_CASE("zero-width proposals leave parameters unchanged") {
    const Dataset d = poisson_dataset(20, 19);
    ModelSpec spec = default_model_spec(d.schema, Family::PoissonLog);
    spec.base.covariates[0] = LogNormalMeanVar{};
    const DesignLayout layout(d.schema, true);
    const PreparedData data(d, layout);
    std::vector<std::size_t> members(20);
    std::iota(members.begin(), members.end(), 0);
    MhKernel mh = MhKernel::fixed(spec, layout.width(), 0.0);
    Rng rng(20);
    ClusterParams p = sample_prior(spec.base, rng);
    const ClusterParams before = p;
    auto& g = std::get<GaussianParams>(p.x[0]);
    mh.update_covariate(0, std::get<LogNormalMeanVar>(spec.base.covariates[0]), g, data, members, rng);
    mh.update_response(std::get<IndependentGaussianPrior>(spec.base.response), spec.family, p.y, data, members, rng);
    CHECK(g.mean == std::get<GaussianParams>(before.x[0]).mean);
    CHECK(g.var == std::get<GaussianParams>(before.x[0]).var);
    CHECK(p.y.beta == before.y.beta);
  }

  TEST_CASE("adaptation brings acceptance into a sensible band") {
    const Dataset d = poisson_dataset(60, 21);
    ModelSpec spec = default_model_spec(d.schema, Family::PoissonLog);
    spec.base.covariates[0] = LogNormalMeanVar{};
    ChainConfig c;
    c.burn_in = 300;
    c.total_iterations = 600;
    c.thin = 3;
    c.seed = 22;
    c.mh_steps = {5.0, 5.0, 5.0, 5.0};
    const ChainResult r = run_chain(d, spec, c);
    CHECK(r.diagnostics.proposals > 0);
    CHECK(r.diagnostics.acceptance_rate >= 0.2);
    CHECK(r.diagnostics.acceptance_rate <= 0.5);
  }

  TEST_CASE("logistic posterior does not depend on seed or step size") {
    const Dataset d = class_dataset(60, 23, 2);
    const ModelSpec spec = default_model_spec(d.schema, Family::MultinomialLogistic);
    const DesignLayout layout(d.schema, true);
    const PreparedData data(d, layout);
    std::vector<std::size_t> members(60);
    std::iota(members.begin(), members.end(), 0);
    const auto& prior = std::get<IndependentGaussianPrior>(spec.base.response);
    const Eigen::Vector2d query(1.0, 0.5);
    std::vector<double> estimates;
    for (const auto& [seed, step] : std::vector<std::pair<std::uint64_t, double>>{{24, 0.2}, {25, 0.2}, {26, 0.8}}) {
      MhKernel mh = MhKernel::fixed(spec, layout.width(), step);
      Rng rng(seed);
      ResponseParams p{Eigen::MatrixXd::Zero(2, 2), 1.0};
      double total = 0.0;
      const int burn = 2000, keep = 40000;
      for (int t = 0; t < burn + keep; ++t) {
        mh.update_response(prior, spec.family, p, data, members, rng);
        if (t >= burn) total += glm_expectation(spec.family, p, query)[1];
      }
      estimates.push_back(total / keep);
    }
    CHECK(std::abs(estimates[0] - estimates[1]) < 0.05);
    CHECK(std::abs(estimates[0] - estimates[2]) < 0.05);
  }

  TEST_CASE("default chain records 200 samples and is reproducible") {
    const Dataset d = random_gaussian_dataset(20, 27);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    ChainConfig c;
    c.seed = 28;
    const ChainResult a = run_chain(d, spec, c);
    const ChainResult b = run_chain(d, spec, c);
    REQUIRE(a.samples.size() == 200);
    CHECK(a.samples.front().iteration == 1005);
    CHECK(a.samples.back().iteration == 2000);
    for (std::size_t s = 0; s < a.samples.size(); ++s) {
      CHECK(a.samples[s].labels == b.samples[s].labels);
      CHECK(a.samples[s].alpha == b.samples[s].alpha);
      CHECK(a.samples[s].check_invariants().empty());
    }
    CHECK(a.diagnostics.trace.size() == 2000);
  }

  TEST_CASE("relabelling the data leaves the joint and the conditionals unchanged") {
    Rng rng(29);
    for (std::size_t n = 2; n <= 6; ++n) {
      const Dataset d = random_gaussian_dataset(n, 30 + n);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::reverse(perm.begin(), perm.end());
      std::rotate(perm.begin(), perm.begin() + 1, perm.end());
      const Dataset shuffled = d.subset(perm);
      const ModelSpec spec = fixed_alpha(default_model_spec(d.schema, Family::GaussianLinear), 1.3);
      for (bool collapse : {true, false}) {
        GibbsSampler g1(spec, d, short_chain(31, collapse)), g2(spec, shuffled, short_chain(31, collapse));
        std::vector<ClusterId> labels(n), moved(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = rng.uniform_index(3);
        for (std::size_t i = 0; i < n; ++i) moved[i] = labels[perm[i]];
        std::vector<ClusterParams> params;
        const ClusterId k = *std::max_element(labels.begin(), labels.end()) + 1;
        for (ClusterId c = 0; c < k; ++c) params.push_back(sample_prior(spec.base, rng));
        g1.set_state(labels, params, 1.3);
        g2.set_state(moved, params, 1.3);
        CHECK(g1.log_joint() == doctest::Approx(g2.log_joint()).epsilon(1e-10));
        for (std::size_t i = 0; i < n; ++i) {
          Rng r1(40), r2(40);
          const AssignmentDistribution a = g1.assignment_logprobs(perm[i], r1);
          const AssignmentDistribution b = g2.assignment_logprobs(i, r2);
          REQUIRE(a.log_probs.size() == b.log_probs.size());
          for (std::size_t k = 0; k < a.log_probs.size(); ++k) CHECK(std::abs(a.log_probs[k] - b.log_probs[k]) < 1e-10);
        }
      }
    }
  }

  TEST_CASE("extreme variances still give a normalized assignment") {
    const Dataset d = random_gaussian_dataset(4, 41);
    GibbsSampler g(fixed_alpha(default_model_spec(d.schema, Family::GaussianLinear), 1.0), d, short_chain(42, false));
    g.set_state({0, 0, 1, 1},
                {gaussian_params({{0.0, 1e-300}}, {0.0, 0.0}, 1e-300), gaussian_params({{0.0, 1e300}}, {0.0, 0.0}, 1e300)},
                1.0);
    Rng rng(43);
    for (std::size_t i = 0; i < 4; ++i) {
      const AssignmentDistribution a = g.assignment_logprobs(i, rng);
      double total = 0.0;
      for (double lp : a.log_probs) {
        CHECK_FALSE(std::isnan(lp));
        total += std::exp(lp);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }

  TEST_CASE("bad chain settings are rejected") {
    ChainConfig c;
    c.thin = 0;
    CHECK_THROWS_AS(c.check(), ConfigError);
    c = ChainConfig{};
    c.burn_in = c.total_iterations;
    CHECK_THROWS_AS(c.check(), ConfigError);
    c = ChainConfig{};
    c.aux_count = 0;
    CHECK_THROWS_AS(c.check(), ConfigError);
    c = ChainConfig{};
    c.mh_steps.beta = -1.0;
    CHECK_THROWS_AS(c.check(), ConfigError);
    const Dataset d = random_gaussian_dataset(5, 44);
    c = ChainConfig{};
    c.thin = 0;
    CHECK_THROWS_AS(run_chain(d, default_model_spec(d.schema, Family::GaussianLinear), c), ConfigError);
  }
}
