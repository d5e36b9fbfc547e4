#include <doctest.h>

#include <boost/math/constants/constants.hpp>

#include "dpglm/errors.hpp"
#include "dpglm/glm.hpp"
#include "helpers.hpp"

using namespace dpglm;
using namespace dpglm::test;

namespace {

ResponseParams params(Eigen::MatrixXd beta, double var = 1.0) { return {std::move(beta), var}; }

}  // namespace

TEST_SUITE("glm_families") {
  TEST_CASE("linear predictor: intercept plus dot product") {
    const ResponseParams t = params((Eigen::MatrixXd(2, 1) << 1, 2).finished());
    CHECK(linear_predictor(t, Eigen::Vector2d(1, 3))[0] == 7.0);
  }

  TEST_CASE("linear predictor: categorical levels enter as indicators") {
    DataSchema s;
    s.columns = {categorical("c", 3), {"n", ColumnKind::count_response(), {}}};
    s.response_index = 1;
    const DesignLayout layout(s, true);
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(4, 1);
    beta(0, 0) = 0.5;
    beta(3, 0) = -0.5;  // level 2 of the first covariate
    Eigen::VectorXd x(1);
    x << 2;
    CHECK(linear_predictor(params(beta), x, layout)[0] == 0.0);
  }

  TEST_CASE("linear predictor: rejects a design of the wrong width") {
    const ResponseParams t = params(Eigen::MatrixXd::Zero(3, 1));
    CHECK_THROWS_AS(linear_predictor(t, Eigen::Vector2d(1, 3)), DimensionMismatch);
  }

  TEST_CASE("multinomial with zero coefficients") {
    const ResponseParams t = params(Eigen::MatrixXd::Zero(2, 3));
    const Eigen::Vector2d x(1, -4.2);
    CHECK(linear_predictor(t, x) == Eigen::Vector3d::Zero());
    const Eigen::VectorXd p = glm_expectation(Family::MultinomialLogistic, t, x);
    for (int k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  TEST_CASE("expectations through the links") {
    CHECK(glm_expectation(Family::GaussianLinear, params((Eigen::MatrixXd(2, 1) << 1, 2).finished()), Eigen::Vector2d(1, 3))[0] == 7.0);
    CHECK(glm_expectation(Family::PoissonLog, params(Eigen::MatrixXd::Zero(1, 1)), Eigen::VectorXd::Ones(1))[0] == 1.0);
  }

  TEST_CASE("log densities at simple points") {
    const double pi = boost::math::constants::pi<double>();
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    CHECK(glm_logpdf(Family::GaussianLinear, params((Eigen::MatrixXd(1, 1) << 0.3).finished(), 1.0), one, 0.3) ==
          doctest::Approx(-0.5 * std::log(2 * pi)).epsilon(1e-15));
    CHECK(glm_logpdf(Family::PoissonLog, params(Eigen::MatrixXd::Zero(1, 1)), one, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(glm_logpdf(Family::MultinomialLogistic, params(Eigen::MatrixXd::Zero(1, 4)), one, 2) ==
          doctest::Approx(std::log(0.25)).epsilon(1e-15));
  }

  TEST_CASE("out-of-support responses") {
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    CHECK_THROWS_AS(glm_logpdf(Family::PoissonLog, params(Eigen::MatrixXd::Zero(1, 1)), one, -1), OutOfSupport);
    CHECK_THROWS_AS(glm_logpdf(Family::PoissonLog, params(Eigen::MatrixXd::Zero(1, 1)), one, 1.5), OutOfSupport);
    CHECK_THROWS_AS(glm_logpdf(Family::MultinomialLogistic, params(Eigen::MatrixXd::Zero(1, 3)), one, 3), OutOfSupport);
  }

  TEST_CASE("large counts use log-gamma") {
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    const double lp = glm_logpdf(Family::PoissonLog, params((Eigen::MatrixXd(1, 1) << std::log(500.0)).finished()), one, 500);
    CHECK(std::isfinite(lp));
    CHECK(lp == doctest::Approx(500 * std::log(500.0) - 500 - std::lgamma(501.0)).epsilon(1e-12));
  }

  TEST_CASE("degenerate Gaussian draws sit at the mean") {
    Rng rng(1);
    const ResponseParams t = params((Eigen::MatrixXd(2, 1) << 1, 2).finished(), 1e-18);
    CHECK(glm_sample(Family::GaussianLinear, t, Eigen::Vector2d(1, 3), rng) == doctest::Approx(7.0).epsilon(1e-6));
  }

  TEST_CASE("Poisson draws have the right mean") {
    Rng rng(2);
    const ResponseParams t = params((Eigen::MatrixXd(1, 1) << std::log(4.0)).finished());
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += glm_sample(Family::PoissonLog, t, Eigen::VectorXd::Ones(1), rng);
    CHECK(std::abs(s / n - 4.0) < 0.05);
  }

  TEST_CASE("a point-mass softmax always draws that class") {
    Rng rng(3);
    const ResponseParams t = params((Eigen::MatrixXd(1, 3) << -600, -600, 600).finished());
    for (int i = 0; i < 1000; ++i) CHECK(glm_sample(Family::MultinomialLogistic, t, Eigen::VectorXd::Ones(1), rng) == 2.0);
  }

  TEST_CASE("softmax sums to one and is shift invariant") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd eta(5);
      for (int k = 0; k < 5; ++k) eta[k] = rng.normal(0, 50);
      const Eigen::VectorXd p = softmax(eta);
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      const Eigen::VectorXd q = softmax((eta.array() + rng.normal(0, 20)).matrix());
      CHECK((p - q).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("extreme linear predictors stay finite") {
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    const ResponseParams huge = params((Eigen::MatrixXd(1, 3) << 1e6, -1e6, 0).finished());
    CHECK(std::isfinite(glm_logpdf(Family::MultinomialLogistic, huge, one, 1)));
    const ResponseParams big = params((Eigen::MatrixXd(1, 1) << 1e6).finished());
    CHECK(std::isfinite(glm_logpdf(Family::PoissonLog, big, one, 3)));
    CHECK(std::isfinite(glm_expectation(Family::PoissonLog, big, one)[0]));
  }

  TEST_CASE("expectation equals the sum or integral of y times the density") {
    const Eigen::Vector2d x(1, 0.4);
    const ResponseParams pois = params((Eigen::MatrixXd(2, 1) << 0.7, 1.1).finished());
    double mass = 0.0, first = 0.0;
    for (int y = 0; y < 200; ++y) {
      const double p = std::exp(glm_logpdf(Family::PoissonLog, pois, x, y));
      mass += p;
      first += y * p;
    }
    CHECK(std::abs(mass - 1.0) < 1e-6);
    CHECK(std::abs(first - glm_expectation(Family::PoissonLog, pois, x)[0]) < 1e-6);

    const ResponseParams gauss = params((Eigen::MatrixXd(2, 1) << 0.7, 1.1).finished(), 0.49);
    const double mu = glm_expectation(Family::GaussianLinear, gauss, x)[0];
    double gm = 0.0, g1 = 0.0;
    const double h = 1e-3;
    for (double y = mu - 10; y <= mu + 10; y += h) {
      const double p = std::exp(glm_logpdf(Family::GaussianLinear, gauss, x, y));
      gm += p * h;
      g1 += y * p * h;
    }
    CHECK(std::abs(gm - 1.0) < 1e-6);
    CHECK(std::abs(g1 - mu) < 1e-6);

    const ResponseParams multi = params((Eigen::MatrixXd(2, 3) << 0.1, -0.2, 0.3, 1.0, 0.0, -1.0).finished());
    const Eigen::VectorXd probs = glm_expectation(Family::MultinomialLogistic, multi, x);
    double msum = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double p = std::exp(glm_logpdf(Family::MultinomialLogistic, multi, x, k));
      CHECK(std::abs(p - probs[k]) < 1e-12);
      msum += p;
    }
    CHECK(std::abs(msum - 1.0) < 1e-12);
  }
}
