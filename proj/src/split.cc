#include "tgn/split.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace tgn {

bool SplitSpec::is_inductive(NodeId node) const {
  return std::binary_search(inductive_nodes.begin(), inductive_nodes.end(),
                            node);
}

SplitSpec chronological_split(const EventLog& log) {
  if (log.size() < 10) {
    throw std::invalid_argument("chronological_split: " +
                                std::to_string(log.size()) +
                                " events is too few for a 70/15/15 split");
  }
  SplitSpec split;
  split.total = log.size();
  split.train_end = log.size() * 70 / 100;
  split.val_end = log.size() * 85 / 100;
  split.t_train = log[split.train_end - 1].timestamp;
  split.t_val = log[split.val_end - 1].timestamp;

  std::vector<char> in_train(static_cast<std::size_t>(log.num_nodes()), 0);
  std::vector<char> later(static_cast<std::size_t>(log.num_nodes()), 0);
  for (const Event& e : log.events()) {
    auto& mark = e.ordinal < split.train_end ? in_train : later;
    mark[static_cast<std::size_t>(e.source)] = 1;
    if (e.target != kNoNode) mark[static_cast<std::size_t>(e.target)] = 1;
  }
  for (NodeId n = 0; n < log.num_nodes(); ++n) {
    if (later[static_cast<std::size_t>(n)] &&
        !in_train[static_cast<std::size_t>(n)]) {
      split.inductive_nodes.push_back(n);
    }
  }
  return split;
}

}  // namespace tgn
