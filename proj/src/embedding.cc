#include "tgn/embedding.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

#include "tgn/ops.h"

namespace tgn {
namespace {

std::string join(std::string_view prefix, std::string_view name) {
  return std::string(prefix) + "." + std::string(name);
}

void check_context(const EmbeddingContext& ctx, bool needs_graph) {
  if (ctx.memory == nullptr) {
    throw std::invalid_argument("embedding: context has no memory view");
  }
  if (needs_graph &&
      (ctx.graph == nullptr || ctx.log == nullptr || ctx.encoder == nullptr ||
       ctx.rng == nullptr)) {
    throw std::invalid_argument(
        "embedding: graph embedders need log, graph, time encoder and rng");
  }
}

// Slot layout shared by the graph embedders.
struct SlotInputs {
  Tensor neighbor_repr;  // (B*k) x in, zero rows for padding
  Tensor edge_features;  // (B*k) x E
  Tensor time_codes;     // (B*k) x T
};

Tensor edge_feature_rows(std::span<const std::int64_t> ordinals,
                         const EventLog& log) {
  const std::int64_t e = log.edge_feature_dim();
  const auto n = static_cast<std::int64_t>(ordinals.size());
  Tensor out = Tensor::zeros({n, e});
  auto dst = out.mutable_values();
  for (std::int64_t r = 0; r < n; ++r) {
    const std::int64_t o = ordinals[static_cast<std::size_t>(r)];
    if (o < 0) continue;
    const auto& f = log[o].features;
    std::copy(f.begin(), f.end(), dst.begin() + r * e);
  }
  return out;
}

SlotInputs slot_inputs(const NeighborhoodPlan& plan, const Tensor& valid_repr,
                       const EmbeddingContext& ctx) {
  const auto slots = static_cast<std::int64_t>(plan.valid.size());
  const std::int64_t n_valid = valid_repr.rows();
  std::vector<std::int64_t> index(static_cast<std::size_t>(slots));
  std::int64_t v = 0;
  for (std::int64_t s = 0; s < slots; ++s) {
    index[static_cast<std::size_t>(s)] =
        plan.valid[static_cast<std::size_t>(s)] ? v++ : n_valid;
  }
  const Tensor padded_parts[] = {valid_repr,
                                 Tensor::zeros({1, valid_repr.cols()})};
  SlotInputs in;
  in.neighbor_repr = gather_rows(concat_rows(padded_parts), index);
  in.edge_features = edge_feature_rows(plan.edge_ordinals, *ctx.log);
  std::vector<double> deltas(static_cast<std::size_t>(slots), 0.0);
  for (std::int64_t s = 0; s < slots; ++s) {
    if (!plan.valid[static_cast<std::size_t>(s)]) continue;
    const double t = plan.times[static_cast<std::size_t>(s / plan.k)];
    deltas[static_cast<std::size_t>(s)] =
        t - plan.edge_times[static_cast<std::size_t>(s)];
  }
  in.time_codes = (*ctx.encoder)(deltas);
  return in;
}

}  // namespace

std::string_view to_string(EmbeddingMode m) {
  switch (m) {
    case EmbeddingMode::kIdentity: return "id";
    case EmbeddingMode::kTime: return "time";
    case EmbeddingMode::kSum: return "sum";
    case EmbeddingMode::kAttention: return "attn";
  }
  return "?";
}

EmbeddingMode parse_embedding_mode(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "id" || lower == "identity") return EmbeddingMode::kIdentity;
  if (lower == "time") return EmbeddingMode::kTime;
  if (lower == "sum") return EmbeddingMode::kSum;
  if (lower == "attn" || lower == "attention") return EmbeddingMode::kAttention;
  throw std::invalid_argument("unknown embedding mode '" + std::string(name) + "'");
}

void NeighborhoodPlan::input_nodes(std::vector<NodeId>& out) const {
  if (depth == 0) {
    out.insert(out.end(), nodes.begin(), nodes.end());
    return;
  }
  self->input_nodes(out);
  neighbors->input_nodes(out);
}

NeighborhoodPlan plan_neighborhoods(std::span<const NodeId> nodes,
                                    std::span<const double> times, int depth,
                                    int k, Sampling sampling,
                                    const TemporalGraph& graph, Rng* rng) {
  if (nodes.size() != times.size()) {
    throw std::invalid_argument("plan_neighborhoods: " +
                                std::to_string(nodes.size()) + " nodes but " +
                                std::to_string(times.size()) + " times");
  }
  NeighborhoodPlan plan;
  plan.depth = depth;
  plan.nodes.assign(nodes.begin(), nodes.end());
  plan.times.assign(times.begin(), times.end());
  if (depth == 0) return plan;
  if (k <= 0) {
    throw std::invalid_argument("plan_neighborhoods: k must be positive");
  }

  const std::size_t slots = nodes.size() * static_cast<std::size_t>(k);
  plan.k = k;
  plan.valid.assign(slots, 0);
  plan.neighbor_ids.assign(slots, kNoNode);
  plan.edge_ordinals.assign(slots, -1);
  plan.edge_times.assign(slots, 0.0);
  plan.counts.assign(nodes.size(), 0);
  std::vector<NodeId> next_nodes;
  std::vector<double> next_times;
  NeighborSample sample;
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    sample.clear();
    graph.sample_into(nodes[q], times[q], k, sampling, rng, std::nullopt, sample);
    plan.counts[q] = static_cast<std::int64_t>(sample.size());
    for (std::size_t j = 0; j < sample.size(); ++j) {
      const std::size_t s = q * static_cast<std::size_t>(k) + j;
      plan.valid[s] = 1;
      plan.neighbor_ids[s] = sample.neighbors[j];
      plan.edge_ordinals[s] = sample.edge_ordinals[j];
      plan.edge_times[s] = sample.timestamps[j];
      next_nodes.push_back(sample.neighbors[j]);
      next_times.push_back(times[q]);
    }
  }
  plan.self = std::make_unique<NeighborhoodPlan>(plan_neighborhoods(
      nodes, times, depth - 1, k, sampling, graph, rng));
  plan.neighbors = std::make_unique<NeighborhoodPlan>(plan_neighborhoods(
      next_nodes, next_times, depth - 1, k, sampling, graph, rng));
  return plan;
}

Tensor node_input_repr(std::span<const NodeId> nodes,
                       std::span<const double> times,
                       const EmbeddingContext& ctx) {
  check_context(ctx, false);
  Tensor memory = ctx.memory->rows(nodes);
  if (ctx.graph == nullptr) return memory;
  const std::int64_t d = ctx.memory->dim();
  Tensor features;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto v = ctx.graph->node_features_before(nodes[i], times[i]);
    if (v.empty()) continue;
    if (static_cast<std::int64_t>(v.size()) != d) {
      throw std::invalid_argument(
          "node_input_repr: node " + std::to_string(nodes[i]) + " has " +
          std::to_string(v.size()) + " features but memory width " +
          std::to_string(d));
    }
    if (!features.defined()) {
      features = Tensor::zeros({static_cast<std::int64_t>(nodes.size()), d});
    }
    std::copy(v.begin(), v.end(),
              features.mutable_values().begin() + static_cast<std::ptrdiff_t>(i) * d);
  }
  return features.defined() ? add(memory, features) : memory;
}

NeighborhoodPlan Embedder::plan(std::span<const NodeId> nodes,
                                std::span<const double> times,
                                const EmbeddingContext& ctx) const {
  const int d = depth();
  if (d > 0 && ctx.graph == nullptr) {
    throw std::invalid_argument("embedding: graph embedders need a graph");
  }
  if (d == 0) {
    NeighborhoodPlan plan;
    plan.nodes.assign(nodes.begin(), nodes.end());
    plan.times.assign(times.begin(), times.end());
    return plan;
  }
  return plan_neighborhoods(nodes, times, d, config_.neighbors,
                            config_.sampling, *ctx.graph, ctx.rng);
}

IdentityEmbedder::IdentityEmbedder(EmbeddingConfig config,
                                   std::int64_t memory_dim)
    : Embedder(config), memory_dim_(memory_dim) {}

Tensor IdentityEmbedder::embed(const NeighborhoodPlan& plan,
                               const EmbeddingContext& ctx) const {
  check_context(ctx, false);
  return ctx.memory->rows(plan.nodes);
}

TimeProjectionEmbedder::TimeProjectionEmbedder(EmbeddingConfig config,
                                               std::int64_t memory_dim)
    : Embedder(config), weight(Tensor::zeros({1, memory_dim}, true)) {}

Tensor TimeProjectionEmbedder::embed(const NeighborhoodPlan& plan,
                                     const EmbeddingContext& ctx) const {
  check_context(ctx, false);
  const auto n = static_cast<std::int64_t>(plan.nodes.size());
  std::vector<Scalar> deltas(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const NodeId node = plan.nodes[static_cast<std::size_t>(i)];
    const double dt = plan.times[static_cast<std::size_t>(i)] -
                      ctx.memory->last_update(node);
    if (!(dt >= 0.0)) {
      throw std::invalid_argument("embed_time: node " + std::to_string(node) +
                                  " queried at " +
                                  std::to_string(plan.times[static_cast<std::size_t>(i)]) +
                                  " before its last update");
    }
    deltas[static_cast<std::size_t>(i)] = static_cast<Scalar>(dt);
  }
  const Tensor dt = Tensor::from_values({n, 1}, std::move(deltas));
  const Tensor factor = add_scalar(matmul(dt, weight), Scalar{1});
  return mul(factor, ctx.memory->rows(plan.nodes));
}

void TimeProjectionEmbedder::collect(ParameterList& out,
                                     std::string_view prefix) const {
  out.push_back({join(prefix, "weight"), weight});
}

GraphSumEmbedder::GraphSumEmbedder(EmbeddingConfig config,
                                   std::int64_t input_dim,
                                   std::int64_t edge_dim,
                                   std::int64_t time_dim, Rng& rng)
    : Embedder(config) {
  if (config.layers <= 0) {
    throw std::invalid_argument("sum embedding needs at least one layer");
  }
  std::int64_t in = input_dim;
  for (int l = 0; l < config.layers; ++l) {
    Layer layer;
    layer.neighbor = Linear(in + edge_dim + time_dim, config.embedding_dim, rng);
    layer.combine = Linear(in + config.embedding_dim, config.embedding_dim, rng);
    layers.push_back(std::move(layer));
    in = config.embedding_dim;
  }
}

Tensor GraphSumEmbedder::embed(const NeighborhoodPlan& plan,
                               const EmbeddingContext& ctx) const {
  check_context(ctx, true);
  if (plan.depth == 0) return node_input_repr(plan.nodes, plan.times, ctx);
  const Layer& layer = layers[static_cast<std::size_t>(plan.depth - 1)];
  const Tensor self = embed(*plan.self, ctx);
  const Tensor neighbor_repr = embed(*plan.neighbors, ctx);

  std::vector<std::int64_t> valid_ordinals;
  std::vector<double> deltas;
  std::vector<std::int64_t> offsets{0};
  for (std::size_t q = 0; q < plan.nodes.size(); ++q) {
    for (std::int64_t j = 0; j < plan.counts[q]; ++j) {
      const std::size_t s = q * static_cast<std::size_t>(plan.k) +
                            static_cast<std::size_t>(j);
      valid_ordinals.push_back(plan.edge_ordinals[s]);
      deltas.push_back(plan.times[q] - plan.edge_times[s]);
    }
    offsets.push_back(static_cast<std::int64_t>(deltas.size()));
  }
  const Tensor terms[] = {neighbor_repr,
                          edge_feature_rows(valid_ordinals, *ctx.log),
                          (*ctx.encoder)(deltas)};
  const Tensor aggregated =
      relu(segment_sum(layer.neighbor(concat_cols(terms)), offsets));
  const Tensor combined[] = {self, aggregated};
  return layer.combine(concat_cols(combined));
}

void GraphSumEmbedder::collect(ParameterList& out,
                               std::string_view prefix) const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = join(prefix, "layer" + std::to_string(l));
    layers[l].neighbor.collect(out, join(p, "neighbor"));
    layers[l].combine.collect(out, join(p, "combine"));
  }
}

GraphAttentionEmbedder::GraphAttentionEmbedder(EmbeddingConfig config,
                                               std::int64_t input_dim,
                                               std::int64_t edge_dim,
                                               std::int64_t time_dim, Rng& rng)
    : Embedder(config) {
  if (config.layers <= 0) {
    throw std::invalid_argument("attention embedding needs at least one layer");
  }
  std::int64_t in = input_dim;
  for (int l = 0; l < config.layers; ++l) {
    Layer layer;
    layer.attention = MultiHeadAttention(in + time_dim, in + edge_dim + time_dim,
                                         config.heads, rng);
    layer.merge = MergeLayer(in, in + time_dim, config.embedding_dim,
                             config.embedding_dim, rng);
    layers.push_back(std::move(layer));
    in = config.embedding_dim;
  }
}

Tensor GraphAttentionEmbedder::embed(const NeighborhoodPlan& plan,
                                     const EmbeddingContext& ctx) const {
  check_context(ctx, true);
  if (plan.depth == 0) return node_input_repr(plan.nodes, plan.times, ctx);
  const Layer& layer = layers[static_cast<std::size_t>(plan.depth - 1)];
  const Tensor self = embed(*plan.self, ctx);
  const Tensor neighbor_repr = embed(*plan.neighbors, ctx);
  const SlotInputs in = slot_inputs(plan, neighbor_repr, ctx);

  const std::vector<double> zero_deltas(plan.nodes.size(), 0.0);
  const Tensor query_parts[] = {self, (*ctx.encoder)(zero_deltas)};
  const Tensor queries = concat_cols(query_parts);
  const Tensor key_parts[] = {in.neighbor_repr, in.edge_features, in.time_codes};
  const Tensor keys = concat_cols(key_parts);
  const AttentionOutput attended = layer.attention(
      queries, keys, keys, plan.valid, config_.dropout, *ctx.rng, ctx.training);
  return layer.merge(self, attended.output);
}

void GraphAttentionEmbedder::collect(ParameterList& out,
                                     std::string_view prefix) const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = join(prefix, "layer" + std::to_string(l));
    layers[l].attention.collect(out, join(p, "attention"));
    layers[l].merge.collect(out, join(p, "merge"));
  }
}

std::unique_ptr<Embedder> make_embedder(const EmbeddingConfig& config,
                                        std::int64_t memory_dim,
                                        std::int64_t edge_dim,
                                        std::int64_t time_dim, Rng& rng) {
  switch (config.mode) {
    case EmbeddingMode::kIdentity:
      return std::make_unique<IdentityEmbedder>(config, memory_dim);
    case EmbeddingMode::kTime:
      return std::make_unique<TimeProjectionEmbedder>(config, memory_dim);
    case EmbeddingMode::kSum:
      return std::make_unique<GraphSumEmbedder>(config, memory_dim, edge_dim,
                                                time_dim, rng);
    case EmbeddingMode::kAttention:
      return std::make_unique<GraphAttentionEmbedder>(config, memory_dim,
                                                      edge_dim, time_dim, rng);
  }
  throw std::invalid_argument("make_embedder: unknown mode");
}

NeighborhoodSummary::NeighborhoodSummary(std::int64_t memory_dim,
                                         std::int64_t edge_dim,
                                         const TimeEncoder* encoder,
                                         std::int64_t heads, Rng& rng)
    : attention(memory_dim + encoder->dim(),
                memory_dim + edge_dim + encoder->dim(), heads, rng),
      encoder_(encoder),
      memory_dim_(memory_dim),
      edge_dim_(edge_dim) {}

Tensor NeighborhoodSummary::operator()(
    std::span<const RawMessage* const> raws) const {
  const auto n = static_cast<std::int64_t>(raws.size());
  const std::int64_t d = memory_dim_;
  const std::int64_t e = edge_dim_;
  std::size_t k = 1;
  for (const RawMessage* m : raws) k = std::max(k, m->counterpart_neighborhood.size());
  const auto slots = static_cast<std::int64_t>(n * static_cast<std::int64_t>(k));

  std::vector<Scalar> query(static_cast<std::size_t>(n * d), Scalar{0});
  std::vector<Scalar> memory(static_cast<std::size_t>(slots * d), Scalar{0});
  std::vector<Scalar> features(static_cast<std::size_t>(slots * e), Scalar{0});
  std::vector<double> deltas(static_cast<std::size_t>(slots), 0.0);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(slots), 0);
  for (std::int64_t r = 0; r < n; ++r) {
    const RawMessage& m = *raws[static_cast<std::size_t>(r)];
    if (m.direction == MessageDirection::kNodeWise) continue;
    const NeighborhoodSnapshot& nb = m.counterpart_neighborhood;
    if (nb.memory.size() != nb.size() * static_cast<std::size_t>(d) ||
        nb.features.size() != nb.size() * static_cast<std::size_t>(e)) {
      throw std::invalid_argument("neighborhood summary: malformed snapshot for node " +
                                  std::to_string(m.node));
    }
    std::copy(m.counterpart_memory.begin(), m.counterpart_memory.end(),
              query.begin() + r * d);
    for (std::size_t j = 0; j < nb.size(); ++j) {
      const auto s = static_cast<std::int64_t>(static_cast<std::size_t>(r) * k + j);
      valid[static_cast<std::size_t>(s)] = 1;
      deltas[static_cast<std::size_t>(s)] = nb.deltas[j];
      std::copy_n(nb.memory.begin() + static_cast<std::ptrdiff_t>(j) * d, d,
                  memory.begin() + s * d);
      std::copy_n(nb.features.begin() + static_cast<std::ptrdiff_t>(j) * e, e,
                  features.begin() + s * e);
    }
  }
  const std::vector<double> zero_deltas(static_cast<std::size_t>(n), 0.0);
  const Tensor query_parts[] = {Tensor::from_values({n, d}, std::move(query)),
                                (*encoder_)(zero_deltas)};
  const Tensor key_parts[] = {Tensor::from_values({slots, d}, std::move(memory)),
                              Tensor::from_values({slots, e}, std::move(features)),
                              (*encoder_)(deltas)};
  const Tensor keys = concat_cols(key_parts);
  Rng unused(0);
  return attention(concat_cols(query_parts), keys, keys, valid, 0.0, unused, false)
      .output;
}

void NeighborhoodSummary::collect(ParameterList& out,
                                  std::string_view prefix) const {
  attention.collect(out, join(prefix, "attention"));
}

NeighborhoodSnapshot NeighborhoodSummary::snapshot(
    NodeId node, double t, int k, const TemporalGraph& graph,
    const EventLog& log, const MemoryView& memory) const {
  const NeighborSample sample =
      graph.neighbors_before(node, t, k, Sampling::kMostRecent);
  NeighborhoodSnapshot snap;
  for (std::size_t j = 0; j < sample.size(); ++j) {
    const auto row = memory.row_values(sample.neighbors[j]);
    snap.memory.insert(snap.memory.end(), row.begin(), row.end());
    const auto& f = log[sample.edge_ordinals[j]].features;
    snap.features.insert(snap.features.end(), f.begin(), f.end());
    snap.deltas.push_back(t - sample.timestamps[j]);
  }
  return snap;
}

}  // namespace tgn
