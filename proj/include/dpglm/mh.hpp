#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpglm/base_measures.hpp"
#include "dpglm/model.hpp"
#include "dpglm/rng.hpp"

namespace dpglm {

// Initial random-walk scales, in unconstrained coordinates.
struct MhSteps {
  double covariate_mean = 0.5;
  double covariate_log_var = 0.5;
  double beta = 0.3;
  double response_log_var = 0.5;
};

// Component-wise Gaussian random-walk Metropolis over the non-conjugate
// parts of a cluster: (mean, log var) of log-normal covariate dimensions,
// every GLM coefficient, and log var_y. Each coordinate has its own scale;
// while adapting, scales follow a Robbins-Monro recursion towards the
// target acceptance rate.
class MhKernel {
 public:
  MhKernel(const ModelSpec& spec, std::size_t design_width, const MhSteps& initial, double target_acceptance = 0.3);

  // Every coordinate gets the same scale and adaptation is off.
  static MhKernel fixed(const ModelSpec& spec, std::size_t design_width, double step);

  void set_adapting(bool adapting) { adapting_ = adapting; }
  bool adapting() const { return adapting_; }
  void set_iteration(std::size_t iteration) { iteration_ = iteration; }

  void update_covariate(std::size_t dim, const LogNormalMeanVar& prior, GaussianParams& params,
                        const PreparedData& data, std::span<const std::size_t> members, Rng& rng);
  void update_response(const IndependentGaussianPrior& prior, Family family, ResponseParams& params,
                       const PreparedData& data, std::span<const std::size_t> members, Rng& rng);

  double acceptance_rate() const;  // over proposals since the last reset
  void reset_counts();
  std::uint64_t proposals() const { return proposals_; }
  const std::vector<double>& steps() const { return steps_; }

 private:
  std::size_t covariate_coord(std::size_t dim, bool log_var) const { return 2 * dim + (log_var ? 1 : 0); }
  std::size_t beta_coord(Eigen::Index row, Eigen::Index col) const {
    return 2 * num_covariates_ + static_cast<std::size_t>(row * width_ + col);
  }
  std::size_t response_var_coord() const { return 2 * num_covariates_ + design_width_ * static_cast<std::size_t>(width_); }
  bool accept(std::size_t coord, double log_ratio, Rng& rng);

  std::size_t num_covariates_;
  std::size_t design_width_;
  Eigen::Index width_;
  std::vector<double> steps_;
  double target_;
  bool adapting_ = false;
  std::size_t iteration_ = 0;
  std::uint64_t proposals_ = 0;
  std::uint64_t accepts_ = 0;
};

}  // namespace dpglm
