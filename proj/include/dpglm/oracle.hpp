#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dpglm/base_measures.hpp"
#include "dpglm/model.hpp"

namespace dpglm {

// Blocks of a set partition of {0..n-1}, ordered by smallest member.
using Partition = std::vector<std::vector<std::size_t>>;

inline constexpr std::size_t kMaxEnumeration = 10;
inline constexpr std::size_t kMaxExactPosterior = 8;

// All Bell(n) partitions, generated as restricted-growth strings. Throws
// TooLarge above kMaxEnumeration.
std::vector<Partition> enumerate_partitions(std::size_t n);
std::vector<std::size_t> restricted_growth_string(const Partition& partition, std::size_t n);

// alpha^K prod (n_b - 1)! / prod_{i=1..n} (alpha + i - 1), as a running
// product in log space.
double crp_partition_log_prior(const Partition& partition, double alpha);

// E[Y | x, D] by summing over every partition of the training data with
// collapsed block marginals. Fully conjugate bases and n <= 8 only.
Eigen::VectorXd exact_posterior_expectation(const Dataset& data, const ModelSpec& spec, double alpha,
                                            const Eigen::Ref<const Eigen::VectorXd>& x);

// Posterior probability of every partition (same order as
// enumerate_partitions).
std::vector<double> exact_partition_posterior(const Dataset& data, const ModelSpec& spec, double alpha);

// Numerical integration counterparts of the closed forms. Each integrates
// the prior against the likelihood directly and returns log values.
namespace quadrature {

double nig_log_marginal(const NigPrior& prior, const std::vector<double>& data);
double dirichlet_log_marginal(const DirichletLevels& prior, const std::vector<int>& data);  // 2 or 3 levels
// Integrates beta out in closed Gaussian form (covariance sigma2 (I + X V X'))
// and sigma2 numerically; any design width.
double mvnig_log_marginal(const MvnigPrior& prior, const Eigen::MatrixXd& design, const Eigen::VectorXd& y);
// Full two-dimensional integral over (beta, sigma2); intercept-only priors.
double mvnig_log_marginal_full(const MvnigPrior& prior, const Eigen::VectorXd& y);

}  // namespace quadrature

// Largest absolute discrepancy between closed-form log marginals and log
// predictives (at `query`) and their quadrature counterparts.
double quadrature_check(const NigPrior& prior, const std::vector<double>& data, double query);
double quadrature_check(const DirichletLevels& prior, const std::vector<int>& data, int query);
double quadrature_check(const MvnigPrior& prior, const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& query_row, double query_y);

}  // namespace dpglm
