#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpglm/base_measures.hpp"
#include "dpglm/mh.hpp"
#include "dpglm/model.hpp"
#include "dpglm/state.hpp"

namespace dpglm {

struct ChainConfig {
  std::size_t burn_in = 1000;
  std::size_t thin = 5;
  std::size_t total_iterations = 2000;
  std::size_t aux_count = 3;
  MhSteps mh_steps;
  bool adapt_during_burnin = true;
  std::uint64_t seed = 0;
  // Integrate out conjugate parts during label updates. Off, every part is
  // explicit and new clusters always come from auxiliary prior draws.
  bool collapse = true;

  void check() const;  // throws ConfigError
  std::size_t num_samples() const { return (total_iterations - burn_in) / thin; }
};

// Log CRP weights for datum i given every other label.
struct CrpWeights {
  std::vector<std::pair<ClusterId, double>> existing;
  double new_cluster = 0.0;
};

CrpWeights crp_prior_logweights(const GibbsState& state, std::size_t i);

// Normalized log probabilities over live clusters (in id order) followed by
// the new-cluster options: one entry when the model is fully collapsed,
// otherwise one per auxiliary draw.
struct AssignmentDistribution {
  std::vector<ClusterId> clusters;
  std::vector<double> log_probs;
  std::vector<ClusterParams> auxiliary;

  std::size_t num_existing() const { return clusters.size(); }
  double new_cluster_prob() const;
};

// Escobar-West auxiliary-variable update of the concentration.
double resample_alpha(double alpha, std::size_t num_clusters, std::size_t n, const GammaAlphaPrior& prior, Rng& rng);

// Log CRP probability of a partition given block sizes.
double crp_log_partition_prob(std::span<const std::size_t> block_sizes, double alpha);

struct IterationRecord {
  std::size_t iteration = 0;
  double log_joint = 0.0;
  std::size_t num_clusters = 0;
  double alpha = 0.0;
};

struct ChainDiagnostics {
  std::vector<IterationRecord> trace;
  double acceptance_rate = 0.0;  // post burn-in, non-conjugate parts only
  std::uint64_t proposals = 0;
  std::vector<double> final_steps;
};

class GibbsSampler {
 public:
  GibbsSampler(ModelSpec spec, const Dataset& data, ChainConfig config);
  GibbsSampler(ModelSpec spec, DesignLayout layout, PreparedData data, ChainConfig config);

  // Sequential CRP seating: datum i joins an existing cluster or a new one
  // with weights from the CRP and the (posterior) predictive of its
  // predecessors, then every cluster's parameters are drawn.
  void initialize();
  // Installs a given configuration; params may be omitted (prior draws).
  void set_state(const std::vector<ClusterId>& labels, const std::vector<ClusterParams>& params, double alpha);
  // Replaces the data while keeping labels and parameters.
  void set_data(PreparedData data);

  void sweep();
  void update_labels();
  void refresh_params();
  void update_alpha();

  // Does not change the state; auxiliary draws use `rng`.
  AssignmentDistribution assignment_logprobs(std::size_t i, Rng& rng);

  double log_joint() const;
  PosteriorSample snapshot() const;
  std::vector<std::vector<std::size_t>> members() const;

  const GibbsState& state() const { return state_; }
  GibbsState& mutable_state() { return state_; }
  const PreparedData& data() const { return data_; }
  const DesignLayout& layout() const { return layout_; }
  const ModelSpec& spec() const { return state_.spec; }
  const ChainConfig& config() const { return config_; }
  MhKernel& mh() { return mh_; }
  std::size_t iteration() const { return iteration_; }
  bool collapsed_covariate(std::size_t j) const { return collapse_x_[j]; }
  bool collapsed_response() const { return collapse_y_; }
  bool fully_collapsed() const { return fully_collapsed_; }

 private:
  void prepare();
  void rebuild_stats();
  double cluster_log_likelihood(const Cluster& cluster, std::size_t i) const;
  double new_cluster_log_likelihood(const ClusterParams& params, std::size_t i) const;
  const MvnigPosterior& response_posterior(const Cluster& cluster) const;
  // Fills weights_ and aux_ for datum i, excluding cluster `skip`.
  void compute_weights(std::size_t i, ClusterId skip, const ClusterParams* vacated, Rng& rng);
  void assign(std::size_t i);

  ChainConfig config_;
  DesignLayout layout_;
  PreparedData data_;
  GibbsState state_;
  MhKernel mh_;
  std::optional<MvnigPriorTerms> mvnig_terms_;
  std::vector<bool> collapse_x_;
  bool collapse_y_ = false;
  bool fully_collapsed_ = false;
  std::vector<double> prior_log_pred_;  // collapsed parts only
  std::size_t iteration_ = 0;

  std::vector<double> weights_;
  std::vector<ClusterId> weight_ids_;
  std::vector<ClusterParams> aux_;
};

using SampleVisitor = std::function<void(const PosteriorSample&)>;

struct ChainResult {
  std::vector<PosteriorSample> samples;
  ChainDiagnostics diagnostics;
};

// Validates, initializes and runs one chain. Samples are recorded after
// iterations t with t > burn_in and (t - burn_in) % thin == 0.
ChainResult run_chain(const Dataset& data, const ModelSpec& spec, const ChainConfig& config);
ChainDiagnostics run_chain(const Dataset& data, const ModelSpec& spec, const ChainConfig& config,
                           const SampleVisitor& visit);

void write_diagnostics_csv(const ChainDiagnostics& diagnostics, const std::string& path);

}  // namespace dpglm
