#include "tgn/temporal_graph.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tgn {
namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

}  // namespace

std::string_view to_string(Sampling s) {
  return s == Sampling::kMostRecent ? "recent" : "uniform";
}

Sampling parse_sampling(std::string_view name) {
  if (name == "recent" || name == "most_recent") return Sampling::kMostRecent;
  if (name == "uniform") return Sampling::kUniform;
  throw std::invalid_argument("unknown sampling strategy '" +
                              std::string(name) + "'");
}

void NeighborSample::clear() {
  neighbors.clear();
  edge_ordinals.clear();
  timestamps.clear();
}

TemporalGraph::TemporalGraph(const EventLog& log) {
  adjacency_.reserve(static_cast<std::size_t>(log.num_nodes()));
  if (log.num_nodes() > 0) grow(log.num_nodes() - 1);
  for (const Event& e : log.events()) insert(e);
}

void TemporalGraph::grow(NodeId node) {
  const auto n = static_cast<std::size_t>(node + 1);
  if (adjacency_.size() >= n) return;
  adjacency_.resize(n);
  node_features_.resize(n);
  last_seen_.resize(n, -kNever);
  node_deleted_at_.resize(n, -kNever);
}

void TemporalGraph::insert(const Event& event) {
  if (event.timestamp < last_time_) {
    throw std::invalid_argument("temporal graph: event " +
                                std::to_string(event.ordinal) +
                                " arrives out of time order");
  }
  last_time_ = event.timestamp;
  switch (event.kind) {
    case EventKind::kInteraction:
      add_edge(event);
      break;
    case EventKind::kNodeUpdate:
      grow(event.source);
      node_features_[static_cast<std::size_t>(event.source)].push_back(
          {event.timestamp, event.features});
      last_seen_[static_cast<std::size_t>(event.source)] = event.timestamp;
      break;
    case EventKind::kEdgeDeletion:
    case EventKind::kNodeDeletion:
      apply_deletion(event);
      break;
  }
}

void TemporalGraph::add_edge(const Event& event) {
  grow(std::max(event.source, event.target));
  auto& src = adjacency_[static_cast<std::size_t>(event.source)];
  auto& dst = adjacency_[static_cast<std::size_t>(event.target)];
  const auto src_index = static_cast<std::int64_t>(src.size());
  // For a self loop both entries land in the same list.
  const auto dst_index = static_cast<std::int64_t>(
      dst.size() + (event.source == event.target ? 1 : 0));
  src.push_back({event.target, event.ordinal, event.timestamp, kNever,
                 dst_index, true});
  auto& dst_list = adjacency_[static_cast<std::size_t>(event.target)];
  dst_list.push_back({event.source, event.ordinal, event.timestamp, kNever,
                      src_index, false});
  last_seen_[static_cast<std::size_t>(event.source)] = event.timestamp;
  last_seen_[static_cast<std::size_t>(event.target)] = event.timestamp;
}

void TemporalGraph::apply_deletion(const Event& event) {
  const double t = event.timestamp;
  if (event.kind == EventKind::kEdgeDeletion) {
    if (event.source < 0 || event.source >= num_nodes() || event.target < 0 ||
        event.target >= num_nodes()) {
      throw std::invalid_argument("apply_deletion: edge (" +
                                  std::to_string(event.source) + ", " +
                                  std::to_string(event.target) +
                                  ") references an unknown node");
    }
    auto& list = adjacency_[static_cast<std::size_t>(event.source)];
    for (auto& entry : list) {
      if (entry.outgoing && entry.neighbor == event.target &&
          entry.timestamp == event.created_at && entry.deleted_at == kNever &&
          entry.timestamp <= t) {
        entry.deleted_at = t;
        adjacency_[static_cast<std::size_t>(event.target)]
                  [static_cast<std::size_t>(entry.twin)]
                      .deleted_at = t;
        return;
      }
    }
    throw std::invalid_argument(
        "apply_deletion: no live edge (" + std::to_string(event.source) +
        ", " + std::to_string(event.target) + ") created at " +
        std::to_string(event.created_at));
  }
  if (event.kind != EventKind::kNodeDeletion) {
    throw std::invalid_argument("apply_deletion: event " +
                                std::to_string(event.ordinal) +
                                " is not a deletion");
  }
  const NodeId node = event.source;
  if (node < 0 || node >= num_nodes() ||
      last_seen_[static_cast<std::size_t>(node)] == -kNever ||
      node_deleted_at_[static_cast<std::size_t>(node)] >=
          last_seen_[static_cast<std::size_t>(node)]) {
    throw std::invalid_argument("apply_deletion: node " + std::to_string(node) +
                                " does not exist");
  }
  node_deleted_at_[static_cast<std::size_t>(node)] = t;
  for (auto& entry : adjacency_[static_cast<std::size_t>(node)]) {
    if (entry.deleted_at != kNever || entry.timestamp > t) continue;
    entry.deleted_at = t;
    adjacency_[static_cast<std::size_t>(entry.neighbor)]
              [static_cast<std::size_t>(entry.twin)]
                  .deleted_at = t;
  }
}

bool TemporalGraph::qualifies(const Entry& e, double t,
                              std::optional<std::int64_t> exclude) const {
  if (e.deleted_at <= t) return false;
  if (exclude && e.ordinal == *exclude) return false;
  return true;
}

NeighborSample TemporalGraph::neighbors_before(
    NodeId node, double t, int k, Sampling strategy, Rng* rng,
    std::optional<std::int64_t> exclude) const {
  NeighborSample out;
  sample_into(node, t, k, strategy, rng, exclude, out);
  return out;
}

void TemporalGraph::sample_into(NodeId node, double t, int k,
                                Sampling strategy, Rng* rng,
                                std::optional<std::int64_t> exclude,
                                NeighborSample& out) const {
  if (k <= 0) {
    throw std::invalid_argument("neighbors_before: k must be >= 1, got " +
                                std::to_string(k));
  }
  if (node < 0 || node >= num_nodes()) return;
  const auto& list = adjacency_[static_cast<std::size_t>(node)];
  const auto end = std::partition_point(
      list.begin(), list.end(),
      [t](const Entry& e) { return e.timestamp < t; });
  auto push = [&](const Entry& e) {
    out.neighbors.push_back(e.neighbor);
    out.edge_ordinals.push_back(e.ordinal);
    out.timestamps.push_back(e.timestamp);
  };
  if (strategy == Sampling::kMostRecent) {
    int taken = 0;
    for (auto it = end; it != list.begin() && taken < k;) {
      --it;
      if (!qualifies(*it, t, exclude)) continue;
      push(*it);
      ++taken;
    }
    return;
  }
  if (rng == nullptr) {
    throw std::invalid_argument("neighbors_before: uniform sampling needs an rng");
  }
  std::vector<std::int64_t> pool;
  for (auto it = list.begin(); it != end; ++it) {
    if (qualifies(*it, t, exclude)) pool.push_back(it - list.begin());
  }
  const auto take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(*rng)]);
  }
  pool.resize(take);
  // Positions in the list are already (timestamp, ordinal) ordered.
  std::sort(pool.begin(), pool.end(), std::greater<>());
  for (std::int64_t idx : pool) push(list[static_cast<std::size_t>(idx)]);
}

std::span<const Scalar> TemporalGraph::node_features_before(NodeId node,
                                                            double t) const {
  if (node < 0 || node >= num_nodes()) return {};
  const auto& records = node_features_[static_cast<std::size_t>(node)];
  const auto end = std::partition_point(
      records.begin(), records.end(),
      [t](const FeatureRecord& r) { return r.timestamp < t; });
  if (end == records.begin()) return {};
  return std::prev(end)->features;
}

std::int64_t TemporalGraph::degree(NodeId node) const {
  if (node < 0 || node >= num_nodes()) return 0;
  return static_cast<std::int64_t>(
      adjacency_[static_cast<std::size_t>(node)].size());
}

}  // namespace tgn
