#include "tgn/model.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "tgn/ops.h"

namespace tgn {
namespace {

std::string normalize(std::string_view name) {
  std::string out(name);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_' || c == ' ') c = '-';
  }
  return out;
}

VariantConfig memory_variant(std::string name, EmbeddingMode embedding) {
  VariantConfig v;
  v.name = std::move(name);
  v.use_memory = true;
  v.updater = UpdaterKind::kGru;
  v.embedding = embedding;
  v.aggregator = Aggregator::kLast;
  return v;
}

VariantConfig memoryless_variant(std::string name, int layers, int neighbors,
                                 Sampling sampling) {
  VariantConfig v;
  v.name = std::move(name);
  v.use_memory = false;
  v.updater = UpdaterKind::kNone;
  v.aggregator = Aggregator::kNone;
  v.embedding = EmbeddingMode::kAttention;
  v.layers = layers;
  v.neighbors = neighbors;
  v.sampling = sampling;
  return v;
}

}  // namespace

std::string_view to_string(MessageFunctionKind m) {
  switch (m) {
    case MessageFunctionKind::kIdentity: return "identity";
    case MessageFunctionKind::kDyRepAttention: return "dyrep_attn";
  }
  return "?";
}

void VariantConfig::validate() const {
  const std::string who = "variant '" + name + "': ";
  const bool graph = embedding == EmbeddingMode::kSum ||
                     embedding == EmbeddingMode::kAttention;
  if (!use_memory) {
    if (updater != UpdaterKind::kNone) {
      throw std::invalid_argument(who + "memory updater without memory");
    }
    if (aggregator != Aggregator::kNone) {
      throw std::invalid_argument(who + "message aggregator without memory");
    }
    if (message_function != MessageFunctionKind::kIdentity) {
      throw std::invalid_argument(who + "DyRep messages need memory");
    }
    if (!graph) {
      throw std::invalid_argument(who + std::string(to_string(embedding)) +
                                  " embedding reads memory, which is disabled");
    }
  } else {
    if (updater == UpdaterKind::kNone) {
      throw std::invalid_argument(who + "memory needs an updater");
    }
    if (aggregator == Aggregator::kNone) {
      throw std::invalid_argument(who + "memory needs a message aggregator");
    }
  }
  if ((graph || message_function == MessageFunctionKind::kDyRepAttention) &&
      neighbors <= 0) {
    throw std::invalid_argument(who + "neighbors must be positive");
  }
  if (graph && layers <= 0) {
    throw std::invalid_argument(who + "layers must be positive");
  }
}

VariantConfig variant_preset(std::string_view name) {
  const std::string key = normalize(name);
  if (key == "tgn-attn" || key == "tgn") {
    return memory_variant("tgn-attn", EmbeddingMode::kAttention);
  }
  if (key == "tgn-2l") {
    VariantConfig v = memory_variant("tgn-2l", EmbeddingMode::kAttention);
    v.layers = 2;
    return v;
  }
  if (key == "tgn-no-mem") {
    return memoryless_variant("tgn-no-mem", 1, 10, Sampling::kMostRecent);
  }
  if (key == "tgn-time") return memory_variant("tgn-time", EmbeddingMode::kTime);
  if (key == "tgn-id") return memory_variant("tgn-id", EmbeddingMode::kIdentity);
  if (key == "tgn-sum") return memory_variant("tgn-sum", EmbeddingMode::kSum);
  if (key == "tgn-mean") {
    VariantConfig v = memory_variant("tgn-mean", EmbeddingMode::kAttention);
    v.aggregator = Aggregator::kMean;
    return v;
  }
  if (key == "jodie") {
    VariantConfig v = memory_variant("jodie", EmbeddingMode::kTime);
    v.updater = UpdaterKind::kRnn;
    return v;
  }
  if (key == "dyrep") {
    VariantConfig v = memory_variant("dyrep", EmbeddingMode::kIdentity);
    v.updater = UpdaterKind::kRnn;
    v.message_function = MessageFunctionKind::kDyRepAttention;
    return v;
  }
  if (key == "tgat" || key == "tgat-style") {
    return memoryless_variant("tgat", 2, 20, Sampling::kUniform);
  }
  throw std::invalid_argument("unknown variant preset '" + std::string(name) +
                              "'");
}

std::vector<std::string> preset_names() {
  return {"tgn-attn", "tgn-2l", "tgn-no-mem", "tgn-time", "tgn-id",
          "tgn-sum",  "tgn-mean", "jodie",    "dyrep",    "tgat"};
}

TgnModel::TgnModel(VariantConfig variant, ModelDims dims, const EventLog& log,
                   const TemporalGraph& graph, std::uint64_t seed)
    : variant_(std::move(variant)),
      dims_(dims),
      log_(&log),
      graph_(&graph),
      rng_(seed) {
  variant_.validate();
  if (dims.memory_dim <= 0 || dims.embedding_dim <= 0 || dims.time_dim <= 0) {
    throw std::invalid_argument("model: dimensions must be positive");
  }
  if (log.has_node_updates() && log.node_feature_dim() != dims.memory_dim) {
    throw std::invalid_argument(
        "model: node features of width " + std::to_string(log.node_feature_dim()) +
        " cannot be added to memory of width " + std::to_string(dims.memory_dim));
  }
  encoder_ = TimeEncoder(dims.time_dim);
  if (variant_.use_memory) {
    std::int64_t summary_dim = 0;
    if (variant_.message_function == MessageFunctionKind::kDyRepAttention) {
      summary_ = std::make_unique<NeighborhoodSummary>(
          dims.memory_dim, log.edge_feature_dim(), &encoder_, dims.heads, rng_);
      summary_dim = summary_->output_dim();
      const NeighborhoodSummary* summary = summary_.get();
      functions_.summary = [summary](std::span<const RawMessage* const> raws) {
        return (*summary)(raws);
      };
    }
    layout_ = MessageLayout::make(dims.memory_dim, dims.time_dim,
                                  log.edge_feature_dim(), log.node_feature_dim(),
                                  log.has_node_updates(), summary_dim);
    updater_ = MemoryUpdater(variant_.updater, layout_.width(), dims.memory_dim,
                             rng_);
    memory_ = MemoryStore(log.num_nodes(), dims.memory_dim);
    raw_ = RawMessageStore(variant_.aggregator, log.num_nodes());
  }
  EmbeddingConfig ec;
  ec.mode = variant_.embedding;
  ec.layers = variant_.layers;
  ec.neighbors = variant_.neighbors;
  ec.heads = dims.heads;
  ec.dropout = dims.dropout;
  ec.sampling = variant_.sampling;
  ec.embedding_dim = dims.embedding_dim;
  embedder_ = make_embedder(ec, dims.memory_dim, log.edge_feature_dim(),
                            dims.time_dim, rng_);
  const std::int64_t z = embedder_->output_dim();
  decoder_ = MergeLayer(z, z, z, 1, rng_);
}

MemoryContext TgnModel::memory_context() const {
  MemoryContext ctx;
  ctx.layout = &layout_;
  ctx.encoder = &encoder_;
  ctx.updater = &updater_;
  ctx.functions = &functions_;
  return ctx;
}

BatchResult TgnModel::forward_batch(std::int64_t begin, std::int64_t end,
                                    std::span<const NodeId> negatives,
                                    const BatchOptions& options) {
  if (begin < 0 || end < begin || end > log_->size()) {
    throw std::invalid_argument("forward_batch: range [" + std::to_string(begin) +
                                ", " + std::to_string(end) +
                                ") outside the log of " +
                                std::to_string(log_->size()) + " events");
  }
  BatchResult result;
  result.begin = begin;
  result.end = end;
  std::vector<NodeId> batch_nodes;
  for (std::int64_t o = begin; o < end; ++o) {
    const Event& e = (*log_)[o];
    if (o > begin && e.timestamp < (*log_)[o - 1].timestamp) {
      throw std::invalid_argument("forward_batch: events out of chronological order");
    }
    if (e.is_interaction()) result.interactions.push_back(o);
    batch_nodes.push_back(e.source);
    if (e.target != kNoNode) batch_nodes.push_back(e.target);
  }
  const auto n = static_cast<std::int64_t>(result.interactions.size());

  std::vector<NodeId> queries;
  std::vector<double> times;
  const auto add_queries = [&](auto node_of) {
    for (std::int64_t i = 0; i < n; ++i) {
      const Event& e = (*log_)[result.interactions[static_cast<std::size_t>(i)]];
      queries.push_back(node_of(e, i));
      times.push_back(e.timestamp);
    }
  };
  if (options.score) {
    if (static_cast<std::int64_t>(negatives.size()) != n) {
      throw std::invalid_argument("forward_batch: " +
                                  std::to_string(negatives.size()) +
                                  " negatives for " + std::to_string(n) +
                                  " interactions");
    }
    add_queries([](const Event& e, std::int64_t) { return e.source; });
    add_queries([](const Event& e, std::int64_t) { return e.target; });
    add_queries([&](const Event&, std::int64_t i) {
      return negatives[static_cast<std::size_t>(i)];
    });
  } else if (options.embed_sources) {
    add_queries([](const Event& e, std::int64_t) { return e.source; });
  }

  EmbeddingContext ctx;
  ctx.log = log_;
  ctx.graph = graph_;
  ctx.encoder = &encoder_;
  ctx.rng = &rng_;
  ctx.training = options.training;
  const NeighborhoodPlan plan = embedder_->plan(queries, times, ctx);

  std::optional<MemoryView> view;
  if (variant_.use_memory) {
    std::vector<NodeId> needed;
    plan.input_nodes(needed);
    needed.insert(needed.end(), batch_nodes.begin(), batch_nodes.end());
    if (summary_) {
      for (std::int64_t o : result.interactions) {
        const Event& e = (*log_)[o];
        for (NodeId side : {e.source, e.target}) {
          const NeighborSample s = graph_->neighbors_before(
              side, e.timestamp, variant_.neighbors, Sampling::kMostRecent);
          needed.insert(needed.end(), s.neighbors.begin(), s.neighbors.end());
        }
      }
    }
    result.update = compute_memory_update(needed, memory_, raw_, memory_context());
    view.emplace(memory_, &result.update);
  } else {
    view.emplace(MemoryView::zeros(dims_.memory_dim));
  }
  ctx.memory = &*view;

  if (!queries.empty()) {
    const Tensor z = embedder_->embed(plan, ctx);
    if (options.score) {
      const Tensor src = slice_rows(z, 0, n);
      result.positive_logits = decode(src, slice_rows(z, n, 2 * n));
      result.negative_logits = decode(src, slice_rows(z, 2 * n, 3 * n));
      result.source_embeddings = src;
    } else {
      result.source_embeddings = z;
    }
  } else {
    result.positive_logits = Tensor::zeros({0, 1});
    result.negative_logits = Tensor::zeros({0, 1});
    result.source_embeddings = Tensor::zeros({0, embedder_->output_dim()});
  }

  if (variant_.use_memory) {
    build_messages(begin, end, *view, result);
    result.persist = std::move(batch_nodes);
  }
  return result;
}

void TgnModel::build_messages(std::int64_t begin, std::int64_t end,
                              const MemoryView& view,
                              BatchResult& result) const {
  NoGradGuard no_grad;
  const auto snapshot = [&](NodeId node) { return view.row_values(node); };
  const auto make = [&](NodeId node, MessageDirection direction,
                        const Event& e, NodeId counterpart) {
    RawMessage m;
    m.node = node;
    m.direction = direction;
    m.timestamp = e.timestamp;
    m.ordinal = e.ordinal;
    m.own_last_update = view.last_update(node);
    m.own_memory = snapshot(node);
    m.features = e.features;
    if (counterpart != kNoNode) {
      m.counterpart_memory = snapshot(counterpart);
      if (summary_) {
        m.counterpart_neighborhood = summary_->snapshot(
            counterpart, e.timestamp, variant_.neighbors, *graph_, *log_, view);
      }
    }
    result.messages.push_back(std::move(m));
  };
  for (std::int64_t o = begin; o < end; ++o) {
    const Event& e = (*log_)[o];
    switch (e.kind) {
      case EventKind::kInteraction:
        make(e.source, MessageDirection::kSource, e, e.target);
        make(e.target, MessageDirection::kDestination, e, e.source);
        break;
      case EventKind::kNodeUpdate:
        make(e.source, MessageDirection::kNodeWise, e, kNoNode);
        break;
      case EventKind::kEdgeDeletion:
        make(e.source, MessageDirection::kDeletionSource, e, e.target);
        make(e.target, MessageDirection::kDeletionDestination, e, e.source);
        break;
      case EventKind::kNodeDeletion:
        break;
    }
  }
}

void TgnModel::commit(BatchResult& result) {
  if (!variant_.use_memory) return;
  commit_memory_update(result.update, result.persist, memory_, raw_);
  for (RawMessage& m : result.messages) raw_.append(std::move(m));
  result.messages.clear();
}

void TgnModel::reset_state() {
  if (!variant_.use_memory) return;
  memory_.reset();
  raw_.clear_all();
}

void TgnModel::restore_state(ModelState state) {
  if (state.memory.num_nodes() != memory_.num_nodes() ||
      state.memory.dim() != memory_.dim()) {
    throw std::invalid_argument("restore_state: memory shape does not match the model");
  }
  memory_ = std::move(state.memory);
  raw_ = std::move(state.raw);
}

MemoryStore TgnModel::flushed_memory() const {
  MemoryStore store = memory_;
  if (!variant_.use_memory) return store;
  NoGradGuard no_grad;
  RawMessageStore raw = raw_;
  std::vector<NodeId> all(static_cast<std::size_t>(memory_.num_nodes()));
  for (NodeId i = 0; i < memory_.num_nodes(); ++i) all[static_cast<std::size_t>(i)] = i;
  const MemoryUpdate update =
      compute_memory_update(all, memory_, raw_, memory_context());
  commit_memory_update(update, all, store, raw);
  return store;
}

Tensor TgnModel::decode(const Tensor& source, const Tensor& destination) const {
  return decoder_(source, destination);
}

ParameterList TgnModel::parameters() const {
  ParameterList out;
  encoder_.collect(out, "time_encoder");
  if (variant_.use_memory) updater_.collect(out, "memory_updater");
  if (summary_) summary_->collect(out, "message_summary");
  embedder_->collect(out, "embedding");
  decoder_.collect(out, "decoder");
  return out;
}

std::vector<std::vector<Scalar>> TgnModel::parameter_values() const {
  std::vector<std::vector<Scalar>> values;
  for (const Parameter& p : parameters()) {
    values.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }
  return values;
}

void TgnModel::load_parameter_values(
    const std::vector<std::vector<Scalar>>& values) {
  ParameterList params = parameters();
  if (values.size() != params.size()) {
    throw std::invalid_argument("load_parameter_values: " +
                                std::to_string(values.size()) +
                                " tensors for " + std::to_string(params.size()) +
                                " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    if (dst.size() != values[i].size()) {
      throw std::invalid_argument("load_parameter_values: size mismatch for " +
                                  params[i].name);
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace tgn
