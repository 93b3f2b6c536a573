// Time-sorted adjacency over an event log, answering "edges incident to node
// strictly before time t" with deletion tombstones that preserve history.

#ifndef TGN_TEMPORAL_GRAPH_H_
#define TGN_TEMPORAL_GRAPH_H_

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tgn/event_log.h"
#include "tgn/ops.h"

namespace tgn {

enum class Sampling { kMostRecent, kUniform };

std::string_view to_string(Sampling s);
Sampling parse_sampling(std::string_view name);

// Up to k sampled edges, newest first. edge_ordinals index the event log,
// which holds the edge features.
struct NeighborSample {
  std::vector<NodeId> neighbors;
  std::vector<std::int64_t> edge_ordinals;
  std::vector<double> timestamps;

  std::size_t size() const { return neighbors.size(); }
  void clear();
};

class TemporalGraph {
 public:
  TemporalGraph() = default;
  // Replays every event of the log in order.
  explicit TemporalGraph(const EventLog& log);

  // Dispatches on the event kind. Events must arrive in (timestamp, ordinal)
  // order.
  void insert(const Event& event);

  // Tombstones an edge (edge_deletion) or every live edge of a node
  // (node_deletion). Queries at t >= the deletion time no longer see them;
  // earlier queries are unaffected. Throws std::invalid_argument when the
  // edge or node does not exist.
  void apply_deletion(const Event& event);

  // Up to k edges incident to `node` with timestamp < t, excluding the edge
  // with ordinal `exclude` and edges deleted at or before t. Unknown nodes
  // yield an empty sample. kUniform draws without replacement from `rng`.
  NeighborSample neighbors_before(NodeId node, double t, int k,
                                  Sampling strategy, Rng* rng = nullptr,
                                  std::optional<std::int64_t> exclude = {}) const;

  // Appends to `out` instead of allocating a fresh sample.
  void sample_into(NodeId node, double t, int k, Sampling strategy, Rng* rng,
                   std::optional<std::int64_t> exclude,
                   NeighborSample& out) const;

  // Features of the latest node_update of `node` strictly before t, or an
  // empty span.
  std::span<const Scalar> node_features_before(NodeId node, double t) const;

  std::int64_t num_nodes() const {
    return static_cast<std::int64_t>(adjacency_.size());
  }
  // Number of adjacency entries of a node (both directions, deleted included).
  std::int64_t degree(NodeId node) const;

 private:
  struct Entry {
    NodeId neighbor;
    std::int64_t ordinal;
    double timestamp;
    double deleted_at;
    // Index of the twin entry in the neighbor's list.
    std::int64_t twin;
    bool outgoing;
  };
  struct FeatureRecord {
    double timestamp;
    std::vector<Scalar> features;
  };

  void grow(NodeId node);
  void add_edge(const Event& event);
  bool qualifies(const Entry& e, double t,
                 std::optional<std::int64_t> exclude) const;

  std::vector<std::vector<Entry>> adjacency_;
  std::vector<std::vector<FeatureRecord>> node_features_;
  std::vector<double> last_seen_;
  std::vector<double> node_deleted_at_;
  double last_time_ = 0.0;
};

}  // namespace tgn

#endif  // TGN_TEMPORAL_GRAPH_H_
