#include <doctest.h>

#include <set>

#include "dpglm/errors.hpp"
#include "dpglm/oracle.hpp"
#include "helpers.hpp"

using namespace dpglm;
using namespace dpglm::test;

TEST_SUITE("oracle_suite") {
  TEST_CASE("Bell numbers and the enumeration cap") {
    const std::size_t bell[] = {1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975};
    for (std::size_t n = 0; n <= 10; ++n) CHECK(enumerate_partitions(n).size() == bell[n]);
    CHECK_THROWS_AS(enumerate_partitions(11), TooLarge);
  }

  TEST_CASE("partitions are distinct and cover every index once") {
    const auto all = enumerate_partitions(6);
    std::set<std::vector<std::size_t>> seen;
    for (const auto& p : all) {
      std::vector<int> hits(6, 0);
      for (const auto& block : p) {
        CHECK_FALSE(block.empty());
        for (std::size_t i : block) ++hits[i];
      }
      for (int h : hits) CHECK(h == 1);
      seen.insert(restricted_growth_string(p, 6));
    }
    CHECK(seen.size() == all.size());
  }

  TEST_CASE("CRP prior over all partitions sums to one") {
    for (std::size_t n = 1; n <= 8; ++n) {
      const auto all = enumerate_partitions(n);
      for (double alpha : {1e-3, 0.5, 1.0, 7.5, 300.0}) {
        double total = 0.0;
        for (const auto& p : all) total += std::exp(crp_partition_log_prior(p, alpha));
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("no data gives the prior predictive mean") {
    const Dataset d = random_gaussian_dataset(3, 1).subset({});
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    Eigen::VectorXd x(1);
    x << 0.8;
    CHECK(exact_posterior_expectation(d, spec, 1.0, x)[0] == doctest::Approx(0.0));
  }

  TEST_CASE("mirror-symmetric data predicts zero at the origin") {
    Eigen::MatrixXd x(4, 1);
    x << -1.2, -0.4, 0.4, 1.2;
    const Dataset d = gaussian_dataset(x, Eigen::Vector4d(-2.0, 0.3, -0.3, 2.0));
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    CHECK(std::abs(exact_posterior_expectation(d, spec, 0.9, Eigen::VectorXd::Zero(1))[0]) < 1e-12);
  }

  TEST_CASE("exact expectation ignores data order") {
    const Dataset d = random_gaussian_dataset(6, 2);
    const ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    Eigen::VectorXd q(1);
    q << 0.35;
    const double base = exact_posterior_expectation(d, spec, 1.4, q)[0];
    for (const std::vector<std::size_t>& perm : {std::vector<std::size_t>{5, 4, 3, 2, 1, 0}, {2, 0, 4, 1, 5, 3}}) {
      CHECK(std::abs(exact_posterior_expectation(d.subset(perm), spec, 1.4, q)[0] - base) < 1e-10);
    }
  }

  TEST_CASE("exact expectation needs a conjugate base and a small sample") {
    const Dataset d = random_gaussian_dataset(4, 3);
    ModelSpec spec = default_model_spec(d.schema, Family::GaussianLinear);
    CHECK_THROWS_AS(exact_posterior_expectation(random_gaussian_dataset(9, 3), spec, 1.0, Eigen::VectorXd::Zero(1)),
                    TooLarge);
    spec.base.covariates[0] = LogNormalMeanVar{};
    CHECK_THROWS_AS(exact_posterior_expectation(d, spec, 1.0, Eigen::VectorXd::Zero(1)), NonConjugateBase);
  }

  TEST_CASE("quadrature agrees with the closed forms") {
    CHECK(quadrature_check(NigPrior{}, {0.7}, -0.2) < 1e-6);
    CHECK(quadrature_check(NigPrior{3.0, 0.5, 1.0, 2.0}, {0.1, 1.9, -0.4}, 0.5) < 1e-6);
    CHECK(quadrature_check(DirichletLevels{{0.5, 2.0, 1.0}}, {0, 2, 2, 1}, 2) < 1e-6);
    MvnigPrior one{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 2.0, 1.0};
    Eigen::MatrixXd design = Eigen::MatrixXd::Ones(3, 1);
    CHECK(quadrature_check(one, design, Eigen::Vector3d(0.2, -0.5, 1.1), Eigen::VectorXd::Ones(1), 0.4) < 1e-6);
    MvnigPrior two{Eigen::Vector2d(0.1, -0.3), Eigen::Matrix2d::Identity() * 0.5, 2.5, 1.5};
    Eigen::MatrixXd d2(3, 2);
    d2 << 1, 0.3, 1, -1.0, 1, 2.0;
    CHECK(quadrature_check(two, d2, Eigen::Vector3d(0.2, -0.5, 1.1), Eigen::Vector2d(1, 0.5), 0.4) < 1e-6);
  }

  TEST_CASE("quadrature exposes a corrupted scale") {
    // One datum, as in the closed-form check; a formula evaluated with twice
    // the scale must disagree with the integral under the true prior.
    const NigPrior truth{2.0, 1.0, 0.0, 1.0}, corrupt{2.0, 2.0, 0.0, 1.0};
    const std::vector<double> data{0.3};
    CovariateStats s;
    for (double v : data) {
      s.n += 1;
      s.sum += v;
      s.sumsq += v * v;
    }
    CHECK(std::abs(nig_log_marginal(corrupt, s) - quadrature::nig_log_marginal(truth, data)) > 0.1);
    CHECK(std::abs(nig_log_marginal(truth, s) - quadrature::nig_log_marginal(truth, data)) < 1e-6);
  }

  TEST_CASE("Dirichlet quadrature") {
    const DirichletLevels p{{1.0, 1.0}};
    CovariateStats s;
    s.counts = {3, 1};
    s.n = 4;
    CHECK(std::abs(dirichlet_log_marginal(p, s) - quadrature::dirichlet_log_marginal(p, {0, 0, 0, 1})) < 1e-9);
    CHECK_THROWS_AS(quadrature::dirichlet_log_marginal(DirichletLevels{{1, 1, 1, 1}}, {0}), ValidationError);
  }
}
