// Append-only log of timestamped events on a continuous-time dynamic graph.

#ifndef TGN_EVENT_LOG_H_
#define TGN_EVENT_LOG_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tgn/tensor.h"

namespace tgn {

using NodeId = std::int64_t;
inline constexpr NodeId kNoNode = -1;

enum class EventKind { kInteraction, kNodeUpdate, kEdgeDeletion, kNodeDeletion };

std::string_view to_string(EventKind kind);

struct Event {
  EventKind kind = EventKind::kInteraction;
  NodeId source = kNoNode;
  // kNoNode for node_update and node_deletion.
  NodeId target = kNoNode;
  double timestamp = 0.0;
  // Edge features for interactions and edge deletions, node features for
  // node updates, empty for node deletions.
  std::vector<Scalar> features;
  // Position in the log; assigned by EventLog::append.
  std::int64_t ordinal = -1;
  // For edge deletions: creation time t' of the deleted edge.
  double created_at = 0.0;
  // Dynamic node label of the source (0 or 1) carried by interaction rows.
  int state_label = 0;

  bool is_interaction() const { return kind == EventKind::kInteraction; }
};

// Events in non-decreasing timestamp order. Node ids are dense in
// [0, num_nodes()).
class EventLog {
 public:
  EventLog() = default;
  // edge_feature_dim fixes the width of interaction/deletion features;
  // node_feature_dim fixes the width of node_update features.
  EventLog(std::int64_t edge_feature_dim, std::int64_t node_feature_dim);

  // Validates ordering and feature widths, assigns the ordinal and returns it.
  // Throws std::invalid_argument on violations.
  std::int64_t append(Event event);

  std::int64_t size() const { return static_cast<std::int64_t>(events_.size()); }
  bool empty() const { return events_.empty(); }
  const Event& operator[](std::int64_t i) const {
    return events_[static_cast<std::size_t>(i)];
  }
  std::span<const Event> events() const { return events_; }

  std::int64_t num_nodes() const { return num_nodes_; }
  // Grows the id space without adding events (e.g. bipartite id offsets).
  void reserve_nodes(std::int64_t n);
  std::int64_t edge_feature_dim() const { return edge_feature_dim_; }
  std::int64_t node_feature_dim() const { return node_feature_dim_; }
  bool has_node_updates() const { return has_node_updates_; }

  // Bipartite bookkeeping from CSV ingestion: destination ids were shifted by
  // destination_offset into the shared node id space.
  bool bipartite = false;
  std::int64_t destination_offset = 0;

 private:
  std::vector<Event> events_;
  std::int64_t num_nodes_ = 0;
  std::int64_t edge_feature_dim_ = 0;
  std::int64_t node_feature_dim_ = 0;
  bool has_node_updates_ = false;
};

// Nodes that appear as interaction targets in events [begin, end).
std::vector<NodeId> destination_nodes(const EventLog& log, std::int64_t begin,
                                      std::int64_t end);

}  // namespace tgn

#endif  // TGN_EVENT_LOG_H_
