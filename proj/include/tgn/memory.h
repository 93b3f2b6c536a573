// Per-node memory, raw message store, message computation, aggregation and
// recurrent memory updates.

#ifndef TGN_MEMORY_H_
#define TGN_MEMORY_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tgn/event_log.h"
#include "tgn/nn.h"
#include "tgn/tensor.h"
#include "tgn/time_encoder.h"

namespace tgn {

enum class MessageDirection {
  kSource,
  kDestination,
  kNodeWise,
  kDeletionSource,
  kDeletionDestination,
};
enum class Aggregator { kNone, kLast, kMean };
enum class UpdaterKind { kNone, kGru, kRnn };

std::string_view to_string(MessageDirection d);
std::string_view to_string(Aggregator a);
std::string_view to_string(UpdaterKind u);
Aggregator parse_aggregator(std::string_view name);
UpdaterKind parse_updater(std::string_view name);

class MemoryStore {
 public:
  MemoryStore() = default;
  MemoryStore(std::int64_t num_nodes, std::int64_t dim);

  std::int64_t num_nodes() const { return num_nodes_; }
  std::int64_t dim() const { return dim_; }

  std::span<const Scalar> state(NodeId node) const;
  double last_update(NodeId node) const;
  // Throws std::invalid_argument when timestamp < last_update(node).
  void set(NodeId node, std::span<const Scalar> values, double timestamp);
  void reset();

  // Constant (len x dim) copy of the requested rows.
  Tensor rows(std::span<const NodeId> nodes) const;

 private:
  std::size_t check(NodeId node) const;

  std::int64_t num_nodes_ = 0;
  std::int64_t dim_ = 0;
  std::vector<Scalar> values_;
  std::vector<double> last_update_;
};

// Counterpart's sampled neighborhood at event time (DyRep messages).
struct NeighborhoodSnapshot {
  std::vector<Scalar> memory;    // size() x memory_dim
  std::vector<Scalar> features;  // size() x edge_feature_dim
  std::vector<double> deltas;    // t - t_j

  std::size_t size() const { return deltas.size(); }
};

struct RawMessage {
  NodeId node = kNoNode;
  MessageDirection direction = MessageDirection::kSource;
  double timestamp = 0.0;
  // Ordinal of the event that produced the message.
  std::int64_t ordinal = -1;
  // t~ of `node` when the snapshot was taken.
  double own_last_update = 0.0;
  std::vector<Scalar> own_memory;
  // Empty for node-wise messages.
  std::vector<Scalar> counterpart_memory;
  std::vector<Scalar> features;
  // Only recorded when messages carry a neighborhood summary.
  NeighborhoodSnapshot counterpart_neighborhood;
};

class RawMessageStore {
 public:
  RawMessageStore() = default;
  RawMessageStore(Aggregator mode, std::int64_t num_nodes);

  // Under kLast only the message with the greatest (timestamp, ordinal) is
  // kept per node.
  void append(RawMessage message);
  std::span<const RawMessage> pending(NodeId node) const;
  bool has_pending(NodeId node) const { return !pending(node).empty(); }
  void clear(NodeId node);
  void clear_all();
  std::int64_t total() const { return total_; }
  Aggregator mode() const { return mode_; }

 private:
  Aggregator mode_ = Aggregator::kLast;
  std::vector<std::vector<RawMessage>> lists_;
  std::int64_t total_ = 0;
};

// Message rows are [own || counterpart || phi(dt) || features || summary].
// Node-wise messages carry a zero counterpart block; features shorter than the
// slot are zero-padded. The summary block is present only when summary_dim > 0
// and is produced by MessageFunctions::summary.
struct MessageLayout {
  std::int64_t memory_dim = 0;
  std::int64_t time_dim = 0;
  std::int64_t edge_feature_dim = 0;
  std::int64_t node_feature_dim = 0;
  std::int64_t feature_slot = 0;
  std::int64_t summary_dim = 0;

  static MessageLayout make(std::int64_t memory_dim, std::int64_t time_dim,
                            std::int64_t edge_feature_dim,
                            std::int64_t node_feature_dim,
                            bool has_node_updates, std::int64_t summary_dim);
  std::int64_t width() const {
    return 2 * memory_dim + time_dim + feature_slot + summary_dim;
  }
};

// Per-direction message functions; an empty slot is the identity.
using MessageFunction = std::function<Tensor(const Tensor&)>;
// Maps n raw messages to an n x summary_dim block.
using SummaryFunction =
    std::function<Tensor(std::span<const RawMessage* const>)>;
struct MessageFunctions {
  SummaryFunction summary;
  MessageFunction source;
  MessageFunction destination;
  MessageFunction node_wise;
  MessageFunction deletion_source;
  MessageFunction deletion_destination;

  const MessageFunction& slot(MessageDirection d) const;
};

// One message row per raw message; differentiable through the time encoder.
// Throws std::invalid_argument for snapshots or features of the wrong width.
Tensor compute_messages(std::span<const RawMessage* const> raws,
                        const MessageLayout& layout, const TimeEncoder& encoder,
                        const MessageFunctions& functions = {});

struct AggregatedMessage {
  Tensor message;  // 1 x width
  double timestamp = 0.0;
};

// messages holds one row per raw message, all for the same node.
AggregatedMessage aggregate(const Tensor& messages,
                            std::span<const RawMessage* const> raws,
                            Aggregator mode);

class MemoryUpdater {
 public:
  MemoryUpdater() = default;
  MemoryUpdater(UpdaterKind kind, std::int64_t message_dim,
                std::int64_t memory_dim, Rng& rng);

  // Rows of messages and states are independent nodes.
  Tensor operator()(const Tensor& messages, const Tensor& states) const;
  UpdaterKind kind() const { return kind_; }
  void collect(ParameterList& out, std::string_view prefix) const;

  GruParams gru;
  RnnParams rnn;

 private:
  UpdaterKind kind_ = UpdaterKind::kNone;
};

// Single-node update: s <- mem(message, s), t~ <- timestamp. Returns the new
// state as a 1 x dim tensor.
Tensor update_memory(MemoryStore& store, NodeId node,
                     const AggregatedMessage& aggregated,
                     const MemoryUpdater& updater);

// Candidate memories for every requested node with pending raw messages.
struct MemoryUpdate {
  std::vector<NodeId> nodes;
  Tensor states;  // nodes.size() x dim
  std::vector<double> timestamps;
  // Ordinals of the events whose raw messages were consumed.
  std::vector<std::int64_t> flushed_ordinals;

  std::int64_t index_of(NodeId node) const;
  std::unordered_map<NodeId, std::int64_t> index;
};

struct MemoryContext {
  const MessageLayout* layout = nullptr;
  const TimeEncoder* encoder = nullptr;
  const MemoryUpdater* updater = nullptr;
  const MessageFunctions* functions = nullptr;
};

MemoryUpdate compute_memory_update(std::span<const NodeId> candidates,
                                   const MemoryStore& store,
                                   const RawMessageStore& raw,
                                   const MemoryContext& ctx);

// Writes the updated rows of `persist` (nodes absent from the update are
// skipped) and clears their pending raw messages.
void commit_memory_update(const MemoryUpdate& update,
                          std::span<const NodeId> persist, MemoryStore& store,
                          RawMessageStore& raw);

// Memory as read by the embedder within one batch: rows from the update when
// present, stored rows otherwise, or zeros for memoryless models.
class MemoryView {
 public:
  static MemoryView zeros(std::int64_t dim);
  MemoryView(const MemoryStore& store, const MemoryUpdate* update);

  Tensor rows(std::span<const NodeId> nodes) const;
  // Values of one row without building a tensor.
  std::vector<Scalar> row_values(NodeId node) const;
  double last_update(NodeId node) const;
  std::int64_t dim() const { return dim_; }

 private:
  MemoryView() = default;

  const MemoryStore* store_ = nullptr;
  const MemoryUpdate* update_ = nullptr;
  std::int64_t dim_ = 0;
};

// Text checkpoint:
//   tgn-memory v1
//   nodes <N> dim <d>
//   node <id> <t~> <s_1> ... <s_d>      (N lines, ids ascending)
//   param <name> <rows> <cols> <values...>
//   end
// Numbers use the shortest round-trip representation.
void save_memory_checkpoint(std::ostream& out, const MemoryStore& store,
                            const ParameterList& params);
// Restores the store and copies parameter values into matching entries of
// `params` by name. Throws std::runtime_error on malformed input, unknown
// versions or shape mismatches.
MemoryStore load_memory_checkpoint(std::istream& in, ParameterList& params);

}  // namespace tgn

#endif  // TGN_MEMORY_H_
