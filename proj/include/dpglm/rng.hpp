#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dpglm {

// Portable random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; all variates come from Boost.Random
// distributions, whose algorithms do not vary between standard libraries.
// Streams are derived with SplitMix64 so that independent chains,
// replications and prediction queries get reproducible, non-overlapping
// seeds.
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0);

  // A child generator determined only by (seed, stream); it does not
  // consume state from this generator.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  Engine& engine() { return engine_; }

  double uniform();  // open interval (0, 1)
  double normal(double mean = 0.0, double sd = 1.0);
  double gamma(double shape, double rate);
  double inverse_gamma(double shape, double scale);
  double beta(double a, double b);
  std::int64_t poisson(double mean);
  std::size_t uniform_index(std::size_t n);  // in [0, n)
  std::vector<double> dirichlet(std::span<const double> concentration);

  // Draw an index from unnormalized log weights (entries may be -inf).
  std::size_t categorical_log(std::span<const double> log_weights);

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::uint64_t seed_;
  Engine engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dpglm
