#include "tgn/event_log.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tgn {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kInteraction:
      return "interaction";
    case EventKind::kNodeUpdate:
      return "node_update";
    case EventKind::kEdgeDeletion:
      return "edge_deletion";
    case EventKind::kNodeDeletion:
      return "node_deletion";
  }
  return "unknown";
}

EventLog::EventLog(std::int64_t edge_feature_dim, std::int64_t node_feature_dim)
    : edge_feature_dim_(edge_feature_dim), node_feature_dim_(node_feature_dim) {
  if (edge_feature_dim < 0 || node_feature_dim < 0) {
    throw std::invalid_argument("event log: negative feature width");
  }
}

std::int64_t EventLog::append(Event event) {
  const std::string where =
      "event " + std::to_string(events_.size()) + " (" +
      std::string(to_string(event.kind)) + ")";
  if (!std::isfinite(event.timestamp) || event.timestamp < 0) {
    throw std::invalid_argument(where + ": timestamp must be finite and >= 0");
  }
  if (!events_.empty() && event.timestamp < events_.back().timestamp) {
    throw std::invalid_argument(where + ": timestamp " +
                                std::to_string(event.timestamp) +
                                " precedes the previous event");
  }
  if (event.source < 0) throw std::invalid_argument(where + ": missing source");
  const bool pairwise = event.kind == EventKind::kInteraction ||
                        event.kind == EventKind::kEdgeDeletion;
  if (pairwise && event.target < 0) {
    throw std::invalid_argument(where + ": missing target");
  }
  if (!pairwise && event.target != kNoNode) {
    throw std::invalid_argument(where + ": node event with a target");
  }
  std::int64_t expected_width = 0;
  switch (event.kind) {
    case EventKind::kInteraction:
    case EventKind::kEdgeDeletion:
      expected_width = edge_feature_dim_;
      break;
    case EventKind::kNodeUpdate:
      expected_width = node_feature_dim_;
      break;
    case EventKind::kNodeDeletion:
      expected_width = 0;
      break;
  }
  if (static_cast<std::int64_t>(event.features.size()) != expected_width) {
    throw std::invalid_argument(
        where + ": " + std::to_string(event.features.size()) +
        " features, expected " + std::to_string(expected_width));
  }
  if (event.kind == EventKind::kEdgeDeletion &&
      !(event.created_at >= 0 && event.created_at <= event.timestamp)) {
    throw std::invalid_argument(where +
                                ": creation time must lie in [0, timestamp]");
  }
  if (event.state_label != 0 && event.state_label != 1) {
    throw std::invalid_argument(where + ": state label must be 0 or 1");
  }
  if (event.kind == EventKind::kNodeUpdate) has_node_updates_ = true;
  num_nodes_ = std::max({num_nodes_, event.source + 1, event.target + 1});
  event.ordinal = size();
  events_.push_back(std::move(event));
  return events_.back().ordinal;
}

void EventLog::reserve_nodes(std::int64_t n) {
  num_nodes_ = std::max(num_nodes_, n);
}

std::vector<NodeId> destination_nodes(const EventLog& log, std::int64_t begin,
                                      std::int64_t end) {
  std::vector<char> seen(static_cast<std::size_t>(log.num_nodes()), 0);
  std::vector<NodeId> out;
  for (std::int64_t i = begin; i < end; ++i) {
    const Event& e = log[i];
    if (!e.is_interaction()) continue;
    if (!seen[static_cast<std::size_t>(e.target)]) {
      seen[static_cast<std::size_t>(e.target)] = 1;
      out.push_back(e.target);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tgn
