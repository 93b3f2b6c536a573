#include "tgn/trainer.h"

#include <algorithm>
#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

#include "tgn/metrics.h"
#include "tgn/ops.h"

namespace tgn {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::int64_t count_interactions(const EventLog& log, std::int64_t begin,
                                std::int64_t end) {
  std::int64_t n = 0;
  for (std::int64_t o = begin; o < end; ++o) n += log[o].is_interaction();
  return n;
}

Tensor link_labels(std::int64_t n) {
  std::vector<Scalar> labels(static_cast<std::size_t>(2 * n), Scalar{0});
  std::fill(labels.begin(), labels.begin() + n, Scalar{1});
  return Tensor::from_values({2 * n, 1}, std::move(labels));
}

LinkMetrics link_metrics(const std::vector<double>& positive,
                         const std::vector<double>& negative) {
  LinkMetrics m;
  m.count = static_cast<std::int64_t>(positive.size());
  if (positive.empty()) return m;
  std::vector<double> scores = positive;
  scores.insert(scores.end(), negative.begin(), negative.end());
  std::vector<int> labels(scores.size(), 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(positive.size()), 1);
  m.ap = average_precision(scores, labels);
  m.auc = roc_auc(scores, labels);
  return m;
}

}  // namespace

UniformNegativeSampler::UniformNegativeSampler(std::vector<NodeId> candidates,
                                               std::uint64_t seed)
    : candidates_(std::move(candidates)), rng_(seed) {}

std::vector<NodeId> UniformNegativeSampler::sample(std::size_t n) {
  if (n > 0 && candidates_.empty()) {
    throw std::invalid_argument("negative sampler: no candidate destinations");
  }
  std::vector<NodeId> out(n);
  if (n == 0) return out;
  std::uniform_int_distribution<std::size_t> pick(0, candidates_.size() - 1);
  for (auto& node : out) node = candidates_[pick(rng_)];
  return out;
}

Trainer::Trainer(TgnModel& model, const EventLog& log, const SplitSpec& split,
                 TrainConfig config)
    : model_(model),
      log_(log),
      split_(split),
      config_(config),
      params_(model.parameters()),
      optimizer_(params_, config.learning_rate),
      train_negatives_(destination_nodes(log, 0, split.train_end),
                       config.seed * 2 + 1),
      eval_negatives_(destination_nodes(log, 0, log.size()), config.seed * 2 + 2) {
  if (config.batch_size <= 0) {
    throw std::invalid_argument("trainer: batch size must be positive");
  }
  if (config.epochs < 0 || config.patience <= 0) {
    throw std::invalid_argument("trainer: epochs must be >= 0 and patience > 0");
  }
}

double Trainer::train_epoch() {
  model_.reset_state();
  double total = 0.0;
  std::int64_t batches = 0;
  for (std::int64_t begin = 0; begin < split_.train_end;
       begin += config_.batch_size) {
    const std::int64_t end =
        std::min<std::int64_t>(begin + config_.batch_size, split_.train_end);
    const std::int64_t n = count_interactions(log_, begin, end);
    const std::vector<NodeId> negatives =
        train_negatives_.sample(static_cast<std::size_t>(n));
    optimizer_.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    BatchOptions options;
    options.training = true;
    BatchResult result = model_.forward_batch(begin, end, negatives, options);
    if (on_batch) on_batch(result);
    if (n > 0) {
      const Tensor parts[] = {result.positive_logits, result.negative_logits};
      const Tensor loss = bce_with_logits(concat_rows(parts), link_labels(n));
      tape.backward(loss);
      optimizer_.step();
      total += loss.item();
      ++batches;
    }
    model_.commit(result);
  }
  return batches > 0 ? total / static_cast<double>(batches) : 0.0;
}

EvalResult Trainer::evaluate(std::int64_t begin, std::int64_t end) {
  if (end <= begin) {
    throw std::invalid_argument("evaluate: empty segment [" +
                                std::to_string(begin) + ", " +
                                std::to_string(end) + ")");
  }
  const auto start = Clock::now();
  NoGradGuard no_grad;
  eval_negatives_.reseed(config_.seed * 1000003 + static_cast<std::uint64_t>(begin));
  std::vector<double> pos;
  std::vector<double> neg;
  std::vector<double> pos_inductive;
  std::vector<double> neg_inductive;
  for (std::int64_t b = begin; b < end; b += config_.batch_size) {
    const std::int64_t e = std::min<std::int64_t>(b + config_.batch_size, end);
    const std::int64_t n = count_interactions(log_, b, e);
    const std::vector<NodeId> negatives =
        eval_negatives_.sample(static_cast<std::size_t>(n));
    BatchResult result = model_.forward_batch(b, e, negatives, BatchOptions{});
    if (on_batch) on_batch(result);
    for (std::int64_t i = 0; i < n; ++i) {
      const Event& ev = log_[result.interactions[static_cast<std::size_t>(i)]];
      const double p = result.positive_logits(i, 0);
      const double q = result.negative_logits(i, 0);
      pos.push_back(p);
      neg.push_back(q);
      if (split_.is_inductive(ev.source) || split_.is_inductive(ev.target)) {
        pos_inductive.push_back(p);
        neg_inductive.push_back(q);
      }
    }
    model_.commit(result);
  }
  if (pos.empty()) {
    throw std::invalid_argument("evaluate: segment has no interactions to score");
  }
  EvalResult out;
  out.transductive = link_metrics(pos, neg);
  out.inductive = link_metrics(pos_inductive, neg_inductive);
  out.seconds = seconds_since(start);
  return out;
}

void Trainer::replay(std::int64_t begin, std::int64_t end) {
  NoGradGuard no_grad;
  BatchOptions options;
  options.score = false;
  for (std::int64_t b = begin; b < end; b += config_.batch_size) {
    const std::int64_t e = std::min<std::int64_t>(b + config_.batch_size, end);
    BatchResult result = model_.forward_batch(b, e, {}, options);
    if (on_batch) on_batch(result);
    model_.commit(result);
  }
}

EvalResult Trainer::test() {
  model_.reset_state();
  replay(0, split_.val_end);
  return evaluate(split_.val_end, split_.total);
}

LinkRunResult Trainer::fit() {
  LinkRunResult run;
  double best_ap = -1.0;
  auto best_values = model_.parameter_values();
  // Without any epoch the untrained model has never seen the stream.
  std::optional<ModelState> best_state;
  int since_best = 0;
  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    const auto start = Clock::now();
    record.loss = train_epoch();
    record.train_seconds = seconds_since(start);
    record.validation = evaluate(split_.train_end, split_.val_end);
    run.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    if (record.validation.transductive.ap > best_ap) {
      best_ap = record.validation.transductive.ap;
      best_values = model_.parameter_values();
      if (config_.test_memory == TestMemory::kContinue) best_state = model_.state();
      run.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config_.patience) {
      run.stopped_early = true;
      break;
    }
  }
  model_.load_parameter_values(best_values);
  if (best_state) {
    model_.restore_state(std::move(*best_state));
    run.test = evaluate(split_.val_end, split_.total);
  } else {
    run.test = test();
  }
  return run;
}

SourceEmbeddings collect_source_embeddings(TgnModel& model, int batch_size) {
  if (batch_size <= 0) {
    throw std::invalid_argument("collect_source_embeddings: bad batch size");
  }
  const EventLog& log = model.log();
  SourceEmbeddings out;
  model.reset_state();
  NoGradGuard no_grad;
  BatchOptions options;
  options.score = false;
  options.embed_sources = true;
  for (std::int64_t b = 0; b < log.size(); b += batch_size) {
    const std::int64_t e = std::min<std::int64_t>(b + batch_size, log.size());
    BatchResult result = model.forward_batch(b, e, {}, options);
    for (std::size_t i = 0; i < result.interactions.size(); ++i) {
      const auto row = result.source_embeddings.row_values(static_cast<std::int64_t>(i));
      out.rows.emplace_back(row.begin(), row.end());
      out.labels.push_back(log[result.interactions[i]].state_label);
      out.ordinals.push_back(result.interactions[i]);
    }
    model.commit(result);
  }
  return out;
}

NodeClassificationResult train_node_classifier(
    TgnModel& model, const SplitSpec& split,
    const NodeClassificationConfig& config) {
  const SourceEmbeddings data = collect_source_embeddings(model, config.batch_size);
  const std::int64_t dim = model.embedding_dim();
  std::vector<std::size_t> train, val, test;
  for (std::size_t i = 0; i < data.ordinals.size(); ++i) {
    const std::int64_t o = data.ordinals[i];
    (o < split.train_end ? train : o < split.val_end ? val : test).push_back(i);
  }
  if (train.empty() || val.empty() || test.empty()) {
    throw std::invalid_argument("node classification: a split segment has no interactions");
  }

  Rng rng(config.seed * 2 + 11);
  const Linear hidden(dim, config.hidden, rng);
  const Linear output(config.hidden, 1, rng);
  ParameterList params;
  hidden.collect(params, "classifier.hidden");
  output.collect(params, "classifier.output");
  Adam optimizer(params, config.learning_rate);

  const auto rows_of = [&](std::span<const std::size_t> idx) {
    std::vector<Scalar> values;
    values.reserve(idx.size() * static_cast<std::size_t>(dim));
    for (std::size_t i : idx) {
      values.insert(values.end(), data.rows[i].begin(), data.rows[i].end());
    }
    return Tensor::from_values({static_cast<std::int64_t>(idx.size()), dim},
                               std::move(values));
  };
  const auto forward = [&](const Tensor& x, bool training) {
    return output(dropout(relu(hidden(x)), config.dropout, rng, training));
  };
  const auto auc_of = [&](const std::vector<std::size_t>& idx) {
    NoGradGuard no_grad;
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t b = 0; b < idx.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(idx.size(), b + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> chunk(idx.data() + b, e - b);
      const Tensor logits = forward(rows_of(chunk), false);
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        scores.push_back(logits(static_cast<std::int64_t>(i), 0));
        labels.push_back(data.labels[chunk[i]]);
      }
    }
    return roc_auc(scores, labels);
  };

  NodeClassificationResult result;
  double best = -1.0;
  std::vector<std::vector<Scalar>> best_values;
  const auto snapshot = [&] {
    std::vector<std::vector<Scalar>> v;
    for (const Parameter& p : params) v.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    return v;
  };
  best_values = snapshot();
  int since_best = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double total = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < train.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(train.size(), b + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> chunk(train.data() + b, e - b);
      std::vector<Scalar> labels;
      for (std::size_t i : chunk) labels.push_back(static_cast<Scalar>(data.labels[i]));
      optimizer.zero_grad();
      Tape tape;
      TapeScope scope(tape);
      const Tensor loss = bce_with_logits(
          forward(rows_of(chunk), true),
          Tensor::from_values({static_cast<std::int64_t>(chunk.size()), 1}, std::move(labels)));
      tape.backward(loss);
      optimizer.step();
      total += loss.item();
      ++batches;
    }
    result.losses.push_back(total / std::max(batches, 1));
    const double auc = auc_of(val);
    result.validation_auc.push_back(auc);
    if (auc > best) {
      best = auc;
      best_values = snapshot();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    std::copy(best_values[i].begin(), best_values[i].end(), dst.begin());
  }
  result.test_auc = auc_of(test);
  return result;
}

}  // namespace tgn
