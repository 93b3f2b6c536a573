#include "tgn/memory.h"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "tgn/ops.h"

namespace tgn {
namespace {

bool later(const RawMessage& a, const RawMessage& b) {
  if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
  return a.ordinal > b.ordinal;
}

std::size_t latest_index(std::span<const RawMessage* const> raws) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < raws.size(); ++i) {
    if (later(*raws[i], *raws[best])) best = i;
  }
  return best;
}

template <typename T>
std::string shortest(T value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("checkpoint: number overflow");
  return std::string(buf, ptr);
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw std::runtime_error("checkpoint: unexpected end of input");
    return w;
  }
  void expect(std::string_view w) {
    const std::string got = word();
    if (got != w) {
      throw std::runtime_error("checkpoint: expected '" + std::string(w) +
                               "', got '" + got + "'");
    }
  }
  template <typename T>
  T number() {
    const std::string w = word();
    T value{};
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      throw std::runtime_error("checkpoint: bad number '" + w + "'");
    }
    return value;
  }

 private:
  std::istream& in_;
};

}  // namespace

std::string_view to_string(MessageDirection d) {
  switch (d) {
    case MessageDirection::kSource: return "source";
    case MessageDirection::kDestination: return "destination";
    case MessageDirection::kNodeWise: return "node_wise";
    case MessageDirection::kDeletionSource: return "deletion_source";
    case MessageDirection::kDeletionDestination: return "deletion_destination";
  }
  return "?";
}

std::string_view to_string(Aggregator a) {
  switch (a) {
    case Aggregator::kNone: return "none";
    case Aggregator::kLast: return "last";
    case Aggregator::kMean: return "mean";
  }
  return "?";
}

std::string_view to_string(UpdaterKind u) {
  switch (u) {
    case UpdaterKind::kNone: return "none";
    case UpdaterKind::kGru: return "gru";
    case UpdaterKind::kRnn: return "rnn";
  }
  return "?";
}

Aggregator parse_aggregator(std::string_view name) {
  if (name == "none") return Aggregator::kNone;
  if (name == "last") return Aggregator::kLast;
  if (name == "mean") return Aggregator::kMean;
  throw std::invalid_argument("unknown aggregator '" + std::string(name) + "'");
}

UpdaterKind parse_updater(std::string_view name) {
  if (name == "none") return UpdaterKind::kNone;
  if (name == "gru") return UpdaterKind::kGru;
  if (name == "rnn") return UpdaterKind::kRnn;
  throw std::invalid_argument("unknown memory updater '" + std::string(name) + "'");
}

MemoryStore::MemoryStore(std::int64_t num_nodes, std::int64_t dim)
    : num_nodes_(num_nodes), dim_(dim) {
  if (num_nodes < 0 || dim <= 0) {
    throw std::invalid_argument("memory store: bad size " +
                                std::to_string(num_nodes) + " x " +
                                std::to_string(dim));
  }
  reset();
}

std::size_t MemoryStore::check(NodeId node) const {
  if (node < 0 || node >= num_nodes_) {
    throw std::out_of_range("memory store: node " + std::to_string(node) +
                            " outside [0, " + std::to_string(num_nodes_) + ")");
  }
  return static_cast<std::size_t>(node);
}

std::span<const Scalar> MemoryStore::state(NodeId node) const {
  const std::size_t i = check(node);
  return std::span<const Scalar>(values_).subspan(
      i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_));
}

double MemoryStore::last_update(NodeId node) const {
  return last_update_[check(node)];
}

void MemoryStore::set(NodeId node, std::span<const Scalar> values,
                      double timestamp) {
  const std::size_t i = check(node);
  if (static_cast<std::int64_t>(values.size()) != dim_) {
    throw std::invalid_argument("memory store: state of width " +
                                std::to_string(values.size()) + ", expected " +
                                std::to_string(dim_));
  }
  if (timestamp < last_update_[i]) {
    throw std::invalid_argument(
        "memory store: out-of-order update of node " + std::to_string(node) +
        " at t=" + std::to_string(timestamp) +
        " before last update t=" + std::to_string(last_update_[i]));
  }
  std::copy(values.begin(), values.end(),
            values_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
  last_update_[i] = timestamp;
}

void MemoryStore::reset() {
  values_.assign(static_cast<std::size_t>(num_nodes_ * dim_), Scalar{0});
  last_update_.assign(static_cast<std::size_t>(num_nodes_), 0.0);
}

Tensor MemoryStore::rows(std::span<const NodeId> nodes) const {
  const auto n = static_cast<std::int64_t>(nodes.size());
  Tensor out = Tensor::zeros({n, dim_});
  auto dst = out.mutable_values();
  for (std::int64_t r = 0; r < n; ++r) {
    const auto row = state(nodes[static_cast<std::size_t>(r)]);
    std::copy(row.begin(), row.end(), dst.begin() + r * dim_);
  }
  return out;
}

RawMessageStore::RawMessageStore(Aggregator mode, std::int64_t num_nodes)
    : mode_(mode), lists_(static_cast<std::size_t>(num_nodes)) {
  if (mode == Aggregator::kNone) {
    throw std::invalid_argument("raw message store needs an aggregator");
  }
}

void RawMessageStore::append(RawMessage message) {
  if (message.node < 0 ||
      message.node >= static_cast<NodeId>(lists_.size())) {
    throw std::out_of_range("raw message store: node " +
                            std::to_string(message.node) + " out of range");
  }
  auto& list = lists_[static_cast<std::size_t>(message.node)];
  if (mode_ == Aggregator::kLast && !list.empty()) {
    if (later(message, list.front())) list.front() = std::move(message);
    return;
  }
  list.push_back(std::move(message));
  ++total_;
}

std::span<const RawMessage> RawMessageStore::pending(NodeId node) const {
  if (node < 0 || node >= static_cast<NodeId>(lists_.size())) return {};
  return lists_[static_cast<std::size_t>(node)];
}

void RawMessageStore::clear(NodeId node) {
  if (node < 0 || node >= static_cast<NodeId>(lists_.size())) return;
  auto& list = lists_[static_cast<std::size_t>(node)];
  total_ -= static_cast<std::int64_t>(list.size());
  list.clear();
}

void RawMessageStore::clear_all() {
  for (auto& list : lists_) list.clear();
  total_ = 0;
}

MessageLayout MessageLayout::make(std::int64_t memory_dim, std::int64_t time_dim,
                                  std::int64_t edge_feature_dim,
                                  std::int64_t node_feature_dim,
                                  bool has_node_updates,
                                  std::int64_t summary_dim) {
  MessageLayout l;
  l.memory_dim = memory_dim;
  l.time_dim = time_dim;
  l.edge_feature_dim = edge_feature_dim;
  l.node_feature_dim = node_feature_dim;
  l.feature_slot = has_node_updates
                       ? std::max(edge_feature_dim, node_feature_dim)
                       : edge_feature_dim;
  l.summary_dim = summary_dim;
  return l;
}

const MessageFunction& MessageFunctions::slot(MessageDirection d) const {
  switch (d) {
    case MessageDirection::kSource: return source;
    case MessageDirection::kDestination: return destination;
    case MessageDirection::kNodeWise: return node_wise;
    case MessageDirection::kDeletionSource: return deletion_source;
    case MessageDirection::kDeletionDestination: return deletion_destination;
  }
  return source;
}

Tensor compute_messages(std::span<const RawMessage* const> raws,
                        const MessageLayout& layout, const TimeEncoder& encoder,
                        const MessageFunctions& functions) {
  const auto n = static_cast<std::int64_t>(raws.size());
  const std::int64_t d = layout.memory_dim;
  const std::int64_t slot = layout.feature_slot;
  if (encoder.dim() != layout.time_dim) {
    throw std::invalid_argument("compute_messages: encoder width " +
                                std::to_string(encoder.dim()) +
                                " does not match layout time width " +
                                std::to_string(layout.time_dim));
  }
  std::vector<Scalar> memory_block(static_cast<std::size_t>(n * 2 * d), Scalar{0});
  std::vector<Scalar> feature_block(static_cast<std::size_t>(n * slot), Scalar{0});
  std::vector<double> deltas(static_cast<std::size_t>(n));
  bool any_function = false;
  for (std::int64_t r = 0; r < n; ++r) {
    const RawMessage& m = *raws[static_cast<std::size_t>(r)];
    const bool node_wise = m.direction == MessageDirection::kNodeWise;
    const std::string where = "compute_messages: " +
                              std::string(to_string(m.direction)) +
                              " message of node " + std::to_string(m.node);
    if (static_cast<std::int64_t>(m.own_memory.size()) != d) {
      throw std::invalid_argument(where + " has own snapshot of width " +
                                  std::to_string(m.own_memory.size()));
    }
    if (!node_wise && static_cast<std::int64_t>(m.counterpart_memory.size()) != d) {
      throw std::invalid_argument(where + " has counterpart snapshot of width " +
                                  std::to_string(m.counterpart_memory.size()));
    }
    const std::int64_t expected_features =
        node_wise ? layout.node_feature_dim : layout.edge_feature_dim;
    if (static_cast<std::int64_t>(m.features.size()) != expected_features ||
        expected_features > slot) {
      throw std::invalid_argument(where + " has " +
                                  std::to_string(m.features.size()) +
                                  " features, expected " +
                                  std::to_string(expected_features));
    }
    auto* mem = memory_block.data() + r * 2 * d;
    std::copy(m.own_memory.begin(), m.own_memory.end(), mem);
    if (!node_wise) {
      std::copy(m.counterpart_memory.begin(), m.counterpart_memory.end(), mem + d);
    }
    std::copy(m.features.begin(), m.features.end(), feature_block.data() + r * slot);
    deltas[static_cast<std::size_t>(r)] = m.timestamp - m.own_last_update;
    if (functions.slot(m.direction)) any_function = true;
  }
  std::vector<Tensor> parts = {
      Tensor::from_values({n, 2 * d}, std::move(memory_block)),
      encoder(deltas),
      Tensor::from_values({n, slot}, std::move(feature_block)),
  };
  if (layout.summary_dim > 0) {
    if (!functions.summary) {
      throw std::invalid_argument(
          "compute_messages: layout has a summary block but no summary function");
    }
    Tensor summary = functions.summary(raws);
    if (summary.rows() != n || summary.cols() != layout.summary_dim) {
      throw std::invalid_argument("compute_messages: summary function returned " +
                                  summary.shape().str());
    }
    parts.push_back(std::move(summary));
  }
  Tensor messages = concat_cols(parts);
  if (!any_function) return messages;

  std::vector<Tensor> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (std::int64_t r = 0; r < n; ++r) {
    Tensor row = slice_rows(messages, r, r + 1);
    const auto& fn = functions.slot(raws[static_cast<std::size_t>(r)]->direction);
    if (fn) {
      row = fn(row);
      if (row.rows() != 1 || row.cols() != layout.width()) {
        throw std::invalid_argument("compute_messages: message function returned " +
                                    row.shape().str());
      }
    }
    rows.push_back(std::move(row));
  }
  return concat_rows(rows);
}

AggregatedMessage aggregate(const Tensor& messages,
                            std::span<const RawMessage* const> raws,
                            Aggregator mode) {
  if (raws.empty()) {
    throw std::invalid_argument("aggregate: no messages to aggregate");
  }
  if (messages.rows() != static_cast<std::int64_t>(raws.size())) {
    throw std::invalid_argument("aggregate: " + std::to_string(raws.size()) +
                                " raw messages but message tensor " +
                                messages.shape().str());
  }
  const NodeId node = raws.front()->node;
  double latest = raws.front()->timestamp;
  for (const RawMessage* m : raws) {
    if (m->node != node) {
      throw std::invalid_argument("aggregate: messages for nodes " +
                                  std::to_string(node) + " and " +
                                  std::to_string(m->node));
    }
    latest = std::max(latest, m->timestamp);
  }
  AggregatedMessage out;
  out.timestamp = latest;
  switch (mode) {
    case Aggregator::kLast: {
      const auto i = static_cast<std::int64_t>(latest_index(raws));
      out.message = slice_rows(messages, i, i + 1);
      break;
    }
    case Aggregator::kMean: {
      const std::int64_t offsets[] = {0, messages.rows()};
      out.message = segment_mean(messages, offsets);
      break;
    }
    case Aggregator::kNone:
      throw std::invalid_argument("aggregate: no aggregator configured");
  }
  return out;
}

MemoryUpdater::MemoryUpdater(UpdaterKind kind, std::int64_t message_dim,
                             std::int64_t memory_dim, Rng& rng)
    : kind_(kind) {
  switch (kind) {
    case UpdaterKind::kGru:
      gru = GruParams::init(message_dim, memory_dim, rng);
      break;
    case UpdaterKind::kRnn:
      rnn = RnnParams::init(message_dim, memory_dim, rng);
      break;
    case UpdaterKind::kNone:
      throw std::invalid_argument("memory updater: kind 'none' has no cell");
  }
}

Tensor MemoryUpdater::operator()(const Tensor& messages,
                                 const Tensor& states) const {
  switch (kind_) {
    case UpdaterKind::kGru: return gru_cell(messages, states, gru);
    case UpdaterKind::kRnn: return rnn_cell(messages, states, rnn);
    case UpdaterKind::kNone: break;
  }
  throw std::logic_error("memory updater: not initialized");
}

void MemoryUpdater::collect(ParameterList& out, std::string_view prefix) const {
  if (kind_ == UpdaterKind::kGru) gru.collect(out, prefix);
  if (kind_ == UpdaterKind::kRnn) rnn.collect(out, prefix);
}

Tensor update_memory(MemoryStore& store, NodeId node,
                     const AggregatedMessage& aggregated,
                     const MemoryUpdater& updater) {
  if (aggregated.timestamp < store.last_update(node)) {
    throw std::invalid_argument(
        "update_memory: message at t=" + std::to_string(aggregated.timestamp) +
        " precedes last update t=" + std::to_string(store.last_update(node)) +
        " of node " + std::to_string(node));
  }
  const NodeId nodes[] = {node};
  Tensor next = updater(aggregated.message, store.rows(nodes));
  store.set(node, next.values(), aggregated.timestamp);
  return next;
}

std::int64_t MemoryUpdate::index_of(NodeId node) const {
  const auto it = index.find(node);
  return it == index.end() ? -1 : it->second;
}

MemoryUpdate compute_memory_update(std::span<const NodeId> candidates,
                                   const MemoryStore& store,
                                   const RawMessageStore& raw,
                                   const MemoryContext& ctx) {
  MemoryUpdate update;
  for (NodeId node : candidates) {
    if (!raw.has_pending(node) || update.index.count(node)) continue;
    update.index.emplace(node, static_cast<std::int64_t>(update.nodes.size()));
    update.nodes.push_back(node);
  }
  if (update.nodes.empty()) {
    update.states = Tensor::zeros({0, store.dim()});
    return update;
  }

  std::vector<const RawMessage*> selected;
  std::vector<std::int64_t> offsets{0};
  for (NodeId node : update.nodes) {
    const auto pending = raw.pending(node);
    std::vector<const RawMessage*> ptrs;
    ptrs.reserve(pending.size());
    double latest = pending.front().timestamp;
    for (const RawMessage& m : pending) {
      ptrs.push_back(&m);
      latest = std::max(latest, m.timestamp);
      update.flushed_ordinals.push_back(m.ordinal);
    }
    if (latest < store.last_update(node)) {
      throw std::invalid_argument(
          "memory update: pending message at t=" + std::to_string(latest) +
          " precedes last update of node " + std::to_string(node));
    }
    update.timestamps.push_back(latest);
    if (raw.mode() == Aggregator::kLast) {
      selected.push_back(ptrs[latest_index(ptrs)]);
    } else {
      selected.insert(selected.end(), ptrs.begin(), ptrs.end());
    }
    offsets.push_back(static_cast<std::int64_t>(selected.size()));
  }
  static const MessageFunctions kIdentity;
  Tensor messages = compute_messages(
      selected, *ctx.layout, *ctx.encoder,
      ctx.functions != nullptr ? *ctx.functions : kIdentity);
  if (raw.mode() == Aggregator::kMean) messages = segment_mean(messages, offsets);
  update.states = (*ctx.updater)(messages, store.rows(update.nodes));
  return update;
}

void commit_memory_update(const MemoryUpdate& update,
                          std::span<const NodeId> persist, MemoryStore& store,
                          RawMessageStore& raw) {
  for (NodeId node : persist) {
    const std::int64_t i = update.index_of(node);
    if (i < 0) continue;
    store.set(node, update.states.row_values(i),
              update.timestamps[static_cast<std::size_t>(i)]);
    raw.clear(node);
  }
}

MemoryView MemoryView::zeros(std::int64_t dim) {
  MemoryView v;
  v.dim_ = dim;
  return v;
}

MemoryView::MemoryView(const MemoryStore& store, const MemoryUpdate* update)
    : store_(&store), update_(update), dim_(store.dim()) {}

Tensor MemoryView::rows(std::span<const NodeId> nodes) const {
  const auto n = static_cast<std::int64_t>(nodes.size());
  if (store_ == nullptr) return Tensor::zeros({n, dim_});
  if (update_ == nullptr || update_->nodes.empty()) return store_->rows(nodes);

  const auto fresh = static_cast<std::int64_t>(update_->nodes.size());
  std::vector<NodeId> stale;
  std::vector<std::int64_t> idx;
  idx.reserve(nodes.size());
  for (NodeId node : nodes) {
    const std::int64_t i = update_->index_of(node);
    if (i >= 0) {
      idx.push_back(i);
    } else {
      idx.push_back(fresh + static_cast<std::int64_t>(stale.size()));
      stale.push_back(node);
    }
  }
  if (stale.size() == nodes.size()) return store_->rows(nodes);
  const Tensor parts[] = {update_->states, store_->rows(stale)};
  return gather_rows(concat_rows(parts), idx);
}

std::vector<Scalar> MemoryView::row_values(NodeId node) const {
  if (store_ == nullptr) return std::vector<Scalar>(static_cast<std::size_t>(dim_));
  std::span<const Scalar> row;
  const std::int64_t i = update_ != nullptr ? update_->index_of(node) : -1;
  row = i >= 0 ? update_->states.row_values(i) : store_->state(node);
  return std::vector<Scalar>(row.begin(), row.end());
}

double MemoryView::last_update(NodeId node) const {
  if (store_ == nullptr) return 0.0;
  if (update_ != nullptr) {
    const std::int64_t i = update_->index_of(node);
    if (i >= 0) return update_->timestamps[static_cast<std::size_t>(i)];
  }
  return store_->last_update(node);
}

void save_memory_checkpoint(std::ostream& out, const MemoryStore& store,
                            const ParameterList& params) {
  out << "tgn-memory v1\n";
  out << "nodes " << store.num_nodes() << " dim " << store.dim() << '\n';
  for (NodeId node = 0; node < store.num_nodes(); ++node) {
    out << "node " << node << ' ' << shortest(store.last_update(node));
    for (Scalar v : store.state(node)) out << ' ' << shortest(v);
    out << '\n';
  }
  for (const Parameter& p : params) {
    out << "param " << p.name << ' ' << p.tensor.rows() << ' '
        << p.tensor.cols();
    for (Scalar v : p.tensor.values()) out << ' ' << shortest(v);
    out << '\n';
  }
  out << "end\n";
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

MemoryStore load_memory_checkpoint(std::istream& in, ParameterList& params) {
  TokenReader r(in);
  r.expect("tgn-memory");
  const std::string version = r.word();
  if (version != "v1") {
    throw std::runtime_error("checkpoint: unsupported version '" + version + "'");
  }
  r.expect("nodes");
  const auto num_nodes = r.number<std::int64_t>();
  r.expect("dim");
  const auto dim = r.number<std::int64_t>();
  MemoryStore store(num_nodes, dim);
  std::vector<Scalar> row(static_cast<std::size_t>(dim));
  for (NodeId expected = 0; expected < num_nodes; ++expected) {
    r.expect("node");
    const auto node = r.number<NodeId>();
    if (node != expected) {
      throw std::runtime_error("checkpoint: node " + std::to_string(node) +
                               " out of order");
    }
    const auto t = r.number<double>();
    for (auto& v : row) v = r.number<Scalar>();
    store.set(node, row, t);
  }
  while (true) {
    const std::string tag = r.word();
    if (tag == "end") break;
    if (tag != "param") {
      throw std::runtime_error("checkpoint: unexpected token '" + tag + "'");
    }
    const std::string name = r.word();
    const auto rows = r.number<std::int64_t>();
    const auto cols = r.number<std::int64_t>();
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const Parameter& p) { return p.name == name; });
    if (it == params.end()) {
      throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
    }
    if (it->tensor.rows() != rows || it->tensor.cols() != cols) {
      throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " +
                               it->tensor.shape().str() + ", file has [" +
                               std::to_string(rows) + "x" +
                               std::to_string(cols) + "]");
    }
    auto dst = it->tensor.mutable_values();
    for (auto& v : dst) v = r.number<Scalar>();
  }
  return store;
}

}  // namespace tgn
