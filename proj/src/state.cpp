#include "dpglm/state.hpp"

#include <algorithm>

#include "dpglm/errors.hpp"

namespace dpglm {

namespace {

template <class Vec>
auto lower(Vec& v, ClusterId id) {
  return std::lower_bound(v.begin(), v.end(), id, [](const Cluster& c, ClusterId key) { return c.id < key; });
}

}  // namespace

Cluster* ClusterTable::find(ClusterId id) {
  auto it = lower(clusters_, id);
  return it != clusters_.end() && it->id == id ? &*it : nullptr;
}

const Cluster* ClusterTable::find(ClusterId id) const {
  auto it = lower(clusters_, id);
  return it != clusters_.end() && it->id == id ? &*it : nullptr;
}

Cluster& ClusterTable::at(ClusterId id) {
  Cluster* c = find(id);
  if (!c) throw Error("no live cluster with id " + std::to_string(id));
  return *c;
}

const Cluster& ClusterTable::at(ClusterId id) const {
  const Cluster* c = find(id);
  if (!c) throw Error("no live cluster with id " + std::to_string(id));
  return *c;
}

Cluster& ClusterTable::insert(Cluster cluster) {
  if (!clusters_.empty() && clusters_.back().id >= cluster.id) {
    throw Error("cluster ids must increase; got " + std::to_string(cluster.id));
  }
  clusters_.push_back(std::move(cluster));
  return clusters_.back();
}

void ClusterTable::erase(ClusterId id) {
  auto it = lower(clusters_, id);
  if (it == clusters_.end() || it->id != id) throw Error("no live cluster with id " + std::to_string(id));
  clusters_.erase(it);
}

std::size_t ClusterTable::slot_of(ClusterId id) const {
  auto it = lower(clusters_, id);
  return it != clusters_.end() && it->id == id ? static_cast<std::size_t>(it - clusters_.begin()) : clusters_.size();
}

std::string GibbsState::check_invariants() const {
  std::vector<std::size_t> counts(clusters.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t slot = clusters.slot_of(labels[i]);
    if (slot == clusters.size()) return "datum " + std::to_string(i) + " has no live cluster";
    ++counts[slot];
  }
  for (std::size_t s = 0; s < clusters.size(); ++s) {
    const Cluster& c = clusters[s];
    if (c.count == 0) return "cluster " + std::to_string(c.id) + " is empty";
    if (c.count != counts[s]) {
      return "cluster " + std::to_string(c.id) + " records " + std::to_string(c.count) + " members, labels give " +
             std::to_string(counts[s]);
    }
    if (c.id >= next_id) return "cluster id " + std::to_string(c.id) + " not below next id";
    if (std::string why = check_params(c.params); !why.empty()) return "cluster " + std::to_string(c.id) + ": " + why;
  }
  if (!(alpha > 0.0)) return "alpha must be positive";
  return {};
}

std::string PosteriorSample::check_invariants() const {
  std::vector<std::size_t> counts(clusters.size(), 0);
  for (std::size_t z : labels) {
    if (z >= clusters.size()) return "label out of range";
    ++counts[z];
  }
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    if (clusters[k].count == 0 || clusters[k].count != counts[k]) return "member counts disagree with labels";
    if (std::string why = check_params(clusters[k].params); !why.empty()) return why;
  }
  if (!(alpha > 0.0)) return "alpha must be positive";
  return {};
}

}  // namespace dpglm
