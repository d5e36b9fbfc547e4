#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "dpglm/base_measures.hpp"
#include "dpglm/model.hpp"
#include "dpglm/rng.hpp"

namespace dpglm {

using ClusterId = std::uint64_t;
inline constexpr ClusterId kUnassigned = std::numeric_limits<ClusterId>::max();

struct Cluster {
  ClusterId id = 0;
  ClusterParams params;
  std::size_t count = 0;
  SufficientStats stats;
  // Collapsed response posterior for the current stats; cleared on change.
  mutable std::shared_ptr<const MvnigPosterior> response_posterior;
};

// Live clusters kept sorted by id. Ids only grow, so insertion is an append.
class ClusterTable {
 public:
  Cluster* find(ClusterId id);
  const Cluster* find(ClusterId id) const;
  Cluster& at(ClusterId id);
  const Cluster& at(ClusterId id) const;
  Cluster& insert(Cluster cluster);
  void erase(ClusterId id);

  std::size_t size() const { return clusters_.size(); }
  bool empty() const { return clusters_.empty(); }
  void clear() { clusters_.clear(); }
  auto begin() { return clusters_.begin(); }
  auto end() { return clusters_.end(); }
  auto begin() const { return clusters_.begin(); }
  auto end() const { return clusters_.end(); }
  Cluster& operator[](std::size_t slot) { return clusters_[slot]; }
  const Cluster& operator[](std::size_t slot) const { return clusters_[slot]; }
  std::size_t slot_of(ClusterId id) const;  // size() when absent

 private:
  std::vector<Cluster> clusters_;
};

struct GibbsState {
  std::vector<ClusterId> labels;
  ClusterTable clusters;
  double alpha = 1.0;
  ModelSpec spec;
  Rng rng{0};
  ClusterId next_id = 0;

  std::size_t size() const { return labels.size(); }
  // Empty when counts sum to n, every label is live and no cluster is empty.
  std::string check_invariants() const;
};

struct SampleCluster {
  ClusterParams params;
  std::size_t count = 0;
  SufficientStats stats;
};

// Snapshot with labels compacted to 0..K-1 in cluster-id order.
struct PosteriorSample {
  std::vector<std::size_t> labels;
  std::vector<SampleCluster> clusters;
  double alpha = 1.0;
  std::size_t iteration = 0;

  std::size_t num_clusters() const { return clusters.size(); }
  std::string check_invariants() const;
};

}  // namespace dpglm
