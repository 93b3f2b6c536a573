#ifndef TGN_SPLIT_H_
#define TGN_SPLIT_H_

#include <cstdint>
#include <vector>

#include "tgn/event_log.h"

namespace tgn {

// 70% / 15% / 15% partition of the log by event ordinal. Segments are
// [0, train_end), [train_end, val_end), [val_end, total).
struct SplitSpec {
  std::int64_t train_end = 0;
  std::int64_t val_end = 0;
  std::int64_t total = 0;
  // Timestamps of the last training and last validation event.
  double t_train = 0.0;
  double t_val = 0.0;
  // Nodes that take part in no training event, sorted.
  std::vector<NodeId> inductive_nodes;

  bool is_inductive(NodeId node) const;
  std::int64_t train_size() const { return train_end; }
  std::int64_t val_size() const { return val_end - train_end; }
  std::int64_t test_size() const { return total - val_end; }
};

// Throws std::invalid_argument for logs with fewer than 10 events.
SplitSpec chronological_split(const EventLog& log);

}  // namespace tgn

#endif  // TGN_SPLIT_H_
