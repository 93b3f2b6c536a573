// Variant presets and the TGN model: memory pipeline, embedding module and
// link decoder wired together for batch-at-a-time processing of an event log.

#ifndef TGN_MODEL_H_
#define TGN_MODEL_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tgn/embedding.h"
#include "tgn/event_log.h"
#include "tgn/memory.h"
#include "tgn/nn.h"
#include "tgn/temporal_graph.h"
#include "tgn/time_encoder.h"

namespace tgn {

enum class MessageFunctionKind { kIdentity, kDyRepAttention };

std::string_view to_string(MessageFunctionKind m);

struct VariantConfig {
  std::string name = "custom";
  bool use_memory = true;
  UpdaterKind updater = UpdaterKind::kGru;
  EmbeddingMode embedding = EmbeddingMode::kAttention;
  int layers = 1;
  int neighbors = 10;
  Aggregator aggregator = Aggregator::kLast;
  MessageFunctionKind message_function = MessageFunctionKind::kIdentity;
  Sampling sampling = Sampling::kMostRecent;

  // Throws std::invalid_argument for inconsistent combinations.
  void validate() const;
};

// Names are case-insensitive: tgn-attn, tgn-2l, tgn-no-mem, tgn-time, tgn-id,
// tgn-sum, tgn-mean, jodie, dyrep, tgat.
VariantConfig variant_preset(std::string_view name);
std::vector<std::string> preset_names();

struct ModelDims {
  std::int64_t memory_dim = 172;
  std::int64_t embedding_dim = 100;
  std::int64_t time_dim = 100;
  std::int64_t heads = 2;
  double dropout = 0.1;
};

struct BatchOptions {
  bool training = false;
  // Embed source, destination and negative of every interaction and decode.
  bool score = true;
  // Embed only the sources (node classification); ignored when score is set.
  bool embed_sources = false;
};

// Everything a batch computed before its state changes are applied.
struct BatchResult {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  // Ordinals of the interactions in the batch, in order.
  std::vector<std::int64_t> interactions;
  Tensor positive_logits;  // interactions.size() x 1
  Tensor negative_logits;
  Tensor source_embeddings;
  MemoryUpdate update;
  std::vector<NodeId> persist;
  std::vector<RawMessage> messages;
};

// Memory and pending raw messages, enough to resume the event stream.
struct ModelState {
  MemoryStore memory;
  RawMessageStore raw;
};

class TgnModel {
 public:
  // `log` and `graph` must outlive the model; the graph covers the whole log
  // and is queried strictly before each event's time.
  TgnModel(VariantConfig variant, ModelDims dims, const EventLog& log,
           const TemporalGraph& graph, std::uint64_t seed);
  TgnModel(const TgnModel&) = delete;
  TgnModel& operator=(const TgnModel&) = delete;

  // Pure with respect to model state; `negatives` holds one node per
  // interaction of events [begin, end) when scoring.
  BatchResult forward_batch(std::int64_t begin, std::int64_t end,
                            std::span<const NodeId> negatives,
                            const BatchOptions& options);
  // Persists updated memories of the batch's nodes, clears their raw
  // messages, then stores the batch's raw messages.
  void commit(BatchResult& result);

  // Zero memory, empty raw message store.
  void reset_state();
  ModelState state() const { return {memory_, raw_}; }
  // Throws std::invalid_argument when the state was taken from a model with
  // different node count or memory width.
  void restore_state(ModelState state);
  // Memory after flushing every pending raw message, without modifying the
  // model.
  MemoryStore flushed_memory() const;

  Tensor decode(const Tensor& source, const Tensor& destination) const;

  ParameterList parameters() const;
  std::vector<std::vector<Scalar>> parameter_values() const;
  void load_parameter_values(const std::vector<std::vector<Scalar>>& values);

  const VariantConfig& variant() const { return variant_; }
  const ModelDims& dims() const { return dims_; }
  bool has_memory() const { return variant_.use_memory; }
  const MemoryStore& memory() const { return memory_; }
  MemoryStore& mutable_memory() { return memory_; }
  const RawMessageStore& raw_messages() const { return raw_; }
  const Embedder& embedder() const { return *embedder_; }
  const MessageLayout& message_layout() const { return layout_; }
  const TimeEncoder& time_encoder() const { return encoder_; }
  const MemoryUpdater& updater() const { return updater_; }
  MemoryUpdater& mutable_updater() { return updater_; }
  std::int64_t embedding_dim() const { return embedder_->output_dim(); }
  Rng& rng() { return rng_; }
  const EventLog& log() const { return *log_; }
  const TemporalGraph& graph() const { return *graph_; }

 private:
  MemoryContext memory_context() const;
  void build_messages(std::int64_t begin, std::int64_t end,
                      const MemoryView& view, BatchResult& result) const;

  VariantConfig variant_;
  ModelDims dims_;
  const EventLog* log_;
  const TemporalGraph* graph_;
  Rng rng_;

  TimeEncoder encoder_;
  MessageLayout layout_;
  MemoryUpdater updater_;
  std::unique_ptr<NeighborhoodSummary> summary_;
  MessageFunctions functions_;
  std::unique_ptr<Embedder> embedder_;
  MergeLayer decoder_;

  MemoryStore memory_;
  RawMessageStore raw_;
};

}  // namespace tgn

#endif  // TGN_MODEL_H_
