#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dpglm/base_measures.hpp"
#include "dpglm/model.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/state.hpp"

namespace dpglm::test {

inline Column continuous(const std::string& name) { return {name, ColumnKind::continuous(), {}}; }
inline Column categorical(const std::string& name, int levels) {
  std::vector<std::string> names;
  for (int k = 0; k < levels; ++k) names.push_back("l" + std::to_string(k));
  return {name, ColumnKind::categorical(levels), names};
}

inline Dataset make_dataset(std::vector<Column> covariates, Column response, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& y) {
  Dataset d;
  d.schema.columns = std::move(covariates);
  d.schema.columns.push_back(std::move(response));
  d.schema.response_index = d.schema.columns.size() - 1;
  d.covariates = x;
  d.responses = y;
  return d;
}

// Continuous covariates x1..xd and a continuous response y.
inline Dataset gaussian_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  std::vector<Column> cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j) cols.push_back(continuous("x" + std::to_string(j + 1)));
  return make_dataset(cols, {"y", ColumnKind::continuous_response(), {}}, x, y);
}

inline Dataset random_gaussian_dataset(std::size_t n, std::uint64_t seed, std::size_t d = 1) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    y[i] = (x(i, 0) > 0 ? 1.0 : -1.0) + 0.5 * x(i, 0) + 0.3 * rng.normal();
  }
  return gaussian_dataset(x, y);
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Standard error of the mean of a correlated series by non-overlapping
// batch means.
inline double batch_means_se(const std::vector<double>& v, std::size_t batches = 50) {
  const std::size_t len = v.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += v[i];
    means.push_back(s / static_cast<double>(len));
  }
  return std::sqrt(variance(means) / static_cast<double>(batches));
}

// Builds a posterior sample from explicit clusters; stats come from the
// members so that collapsed terms are available too.
inline PosteriorSample make_sample(const ModelSpec& spec, const Dataset& data, const std::vector<std::size_t>& labels,
                                   const std::vector<ClusterParams>& params, double alpha) {
  const DesignLayout layout(data.schema, spec.response_uses_covariates);
  const PreparedData prepared(data, layout);
  PosteriorSample s;
  s.labels = labels;
  s.alpha = alpha;
  std::vector<std::vector<std::size_t>> members(params.size());
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  for (std::size_t c = 0; c < params.size(); ++c) {
    s.clusters.push_back({params[c], members[c].size(), stats_of(spec, layout, prepared, members[c])});
  }
  return s;
}

inline ClusterParams gaussian_params(std::vector<GaussianParams> x, std::vector<double> beta, double var) {
  ClusterParams p;
  for (const auto& g : x) p.x.emplace_back(g);
  p.y.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  p.y.var = var;
  return p;
}

}  // namespace dpglm::test
