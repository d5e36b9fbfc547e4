#include "dpglm/rng.hpp"

#include <algorithm>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <cmath>
#include <limits>
#include <sstream>

namespace dpglm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

double Rng::normal(double mean, double sd) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return mean + sd * dist(engine_);
}

double Rng::gamma(double shape, double rate) {
  boost::random::gamma_distribution<double> dist(shape, 1.0);
  return dist(engine_) / rate;
}

double Rng::inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }

double Rng::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  boost::random::poisson_distribution<std::int64_t, double> dist(mean);
  return dist(engine_);
}

std::size_t Rng::uniform_index(std::size_t n) {
  boost::random::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::vector<double> Rng::dirichlet(std::span<const double> concentration) {
  std::vector<double> out(concentration.size());
  double total = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = gamma(concentration[k], 1.0);
    total += out[k];
  }
  if (!(total > 0.0)) {
    // All gamma draws underflowed (tiny concentrations); put the mass on one level.
    std::fill(out.begin(), out.end(), 0.0);
    out[uniform_index(out.size())] = 1.0;
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

std::size_t Rng::categorical_log(std::span<const double> log_weights) {
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) top = std::max(top, w);
  if (!std::isfinite(top)) return uniform_index(log_weights.size());
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - top);
  double u = uniform() * total;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    u -= std::exp(log_weights[k] - top);
    if (u <= 0.0) return k;
  }
  // Rounding left a sliver; return the last index with positive weight.
  for (std::size_t k = log_weights.size(); k-- > 0;) {
    if (std::isfinite(log_weights[k])) return k;
  }
  return log_weights.size() - 1;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << seed_ << ' ' << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  is >> seed_ >> engine_;
}

}  // namespace dpglm
