// Node embedding modules: identity, time projection, temporal graph sum and
// temporal graph attention.
//
// Embedding is two-phase. plan() samples the temporal neighborhoods of every
// query (recursively, one level per layer) so the caller can learn which
// nodes' memories are read; embed() then evaluates the layers on a memory
// view that covers those nodes.

#ifndef TGN_EMBEDDING_H_
#define TGN_EMBEDDING_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "tgn/event_log.h"
#include "tgn/memory.h"
#include "tgn/nn.h"
#include "tgn/temporal_graph.h"
#include "tgn/time_encoder.h"

namespace tgn {

enum class EmbeddingMode { kIdentity, kTime, kSum, kAttention };

std::string_view to_string(EmbeddingMode m);
EmbeddingMode parse_embedding_mode(std::string_view name);

struct EmbeddingConfig {
  EmbeddingMode mode = EmbeddingMode::kAttention;
  int layers = 1;
  int neighbors = 10;
  std::int64_t heads = 2;
  double dropout = 0.1;
  Sampling sampling = Sampling::kMostRecent;
  // Output width of sum/attn; id/time return memory-width embeddings.
  std::int64_t embedding_dim = 100;
};

struct EmbeddingContext {
  const EventLog* log = nullptr;
  const TemporalGraph* graph = nullptr;
  const MemoryView* memory = nullptr;
  const TimeEncoder* encoder = nullptr;
  Rng* rng = nullptr;
  bool training = false;
};

// Queries at one level of the recursion. Level 0 reads node inputs directly.
struct NeighborhoodPlan {
  int depth = 0;
  std::vector<NodeId> nodes;
  std::vector<double> times;

  // depth > 0 only. k slots per query; slot q*k + j.
  int k = 0;
  std::vector<std::uint8_t> valid;
  std::vector<NodeId> neighbor_ids;
  std::vector<std::int64_t> edge_ordinals;
  std::vector<double> edge_times;
  // Number of sampled neighbors per query (they occupy the first slots).
  std::vector<std::int64_t> counts;
  // Same queries one level down.
  std::unique_ptr<NeighborhoodPlan> self;
  // One query per valid slot, in slot order, at the query time of its parent.
  std::unique_ptr<NeighborhoodPlan> neighbors;

  // Appends every node read at depth 0.
  void input_nodes(std::vector<NodeId>& out) const;
};

NeighborhoodPlan plan_neighborhoods(std::span<const NodeId> nodes,
                                    std::span<const double> times, int depth,
                                    int k, Sampling sampling,
                                    const TemporalGraph& graph, Rng* rng);

// h0 = memory + node features (zero when the node has none).
Tensor node_input_repr(std::span<const NodeId> nodes,
                       std::span<const double> times,
                       const EmbeddingContext& ctx);

class Embedder {
 public:
  virtual ~Embedder() = default;

  NeighborhoodPlan plan(std::span<const NodeId> nodes,
                        std::span<const double> times,
                        const EmbeddingContext& ctx) const;
  // One row per query of `plan`.
  virtual Tensor embed(const NeighborhoodPlan& plan,
                       const EmbeddingContext& ctx) const = 0;

  virtual std::int64_t output_dim() const = 0;
  virtual void collect(ParameterList& out, std::string_view prefix) const = 0;
  const EmbeddingConfig& config() const { return config_; }

 protected:
  explicit Embedder(EmbeddingConfig config) : config_(config) {}
  virtual int depth() const { return 0; }

  EmbeddingConfig config_;
};

// z = s
class IdentityEmbedder : public Embedder {
 public:
  IdentityEmbedder(EmbeddingConfig config, std::int64_t memory_dim);
  Tensor embed(const NeighborhoodPlan& plan,
               const EmbeddingContext& ctx) const override;
  std::int64_t output_dim() const override { return memory_dim_; }
  void collect(ParameterList&, std::string_view) const override {}

 private:
  std::int64_t memory_dim_;
};

// z = (1 + dt * w) * s with dt = t - t~.
class TimeProjectionEmbedder : public Embedder {
 public:
  // w starts at zero so the module begins as the identity.
  TimeProjectionEmbedder(EmbeddingConfig config, std::int64_t memory_dim);
  Tensor embed(const NeighborhoodPlan& plan,
               const EmbeddingContext& ctx) const override;
  std::int64_t output_dim() const override { return weight.cols(); }
  void collect(ParameterList& out, std::string_view prefix) const override;

  Tensor weight;  // 1 x memory_dim
};

// h~ = ReLU(sum_j W1 (h_j || e_ij || phi(t - t_j))); h = W2 (h || h~).
class GraphSumEmbedder : public Embedder {
 public:
  GraphSumEmbedder(EmbeddingConfig config, std::int64_t input_dim,
                   std::int64_t edge_dim, std::int64_t time_dim, Rng& rng);
  Tensor embed(const NeighborhoodPlan& plan,
               const EmbeddingContext& ctx) const override;
  std::int64_t output_dim() const override { return config_.embedding_dim; }
  void collect(ParameterList& out, std::string_view prefix) const override;

  struct Layer {
    Linear neighbor;
    Linear combine;
  };
  std::vector<Layer> layers;

 protected:
  int depth() const override { return config_.layers; }
};

// q = h || phi(0); keys/values C_j = h_j || e_ij || phi(t - t_j);
// h~ = MultiHeadAttention(q, C); h = MergeLayer(h, h~).
class GraphAttentionEmbedder : public Embedder {
 public:
  GraphAttentionEmbedder(EmbeddingConfig config, std::int64_t input_dim,
                         std::int64_t edge_dim, std::int64_t time_dim, Rng& rng);
  Tensor embed(const NeighborhoodPlan& plan,
               const EmbeddingContext& ctx) const override;
  std::int64_t output_dim() const override { return config_.embedding_dim; }
  void collect(ParameterList& out, std::string_view prefix) const override;

  struct Layer {
    MultiHeadAttention attention;
    MergeLayer merge;
  };
  std::vector<Layer> layers;

 protected:
  int depth() const override { return config_.layers; }
};

std::unique_ptr<Embedder> make_embedder(const EmbeddingConfig& config,
                                        std::int64_t memory_dim,
                                        std::int64_t edge_dim,
                                        std::int64_t time_dim, Rng& rng);

// Attention of a counterpart's memory snapshot over its recorded neighborhood,
// used as the DyRep message summary. Output width is memory_dim + time_dim.
class NeighborhoodSummary {
 public:
  NeighborhoodSummary() = default;
  NeighborhoodSummary(std::int64_t memory_dim, std::int64_t edge_dim,
                      const TimeEncoder* encoder, std::int64_t heads, Rng& rng);

  // Node-wise messages (no counterpart) summarize to zero rows.
  Tensor operator()(std::span<const RawMessage* const> raws) const;
  std::int64_t output_dim() const { return attention.model_dim(); }
  void collect(ParameterList& out, std::string_view prefix) const;

  // Snapshot of `node`'s neighborhood strictly before t.
  NeighborhoodSnapshot snapshot(NodeId node, double t, int k,
                                const TemporalGraph& graph, const EventLog& log,
                                const MemoryView& memory) const;

  MultiHeadAttention attention;

 private:
  const TimeEncoder* encoder_ = nullptr;
  std::int64_t memory_dim_ = 0;
  std::int64_t edge_dim_ = 0;
};

}  // namespace tgn

#endif  // TGN_EMBEDDING_H_
