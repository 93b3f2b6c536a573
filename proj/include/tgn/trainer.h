// Self-supervised link prediction training, evaluation with continued memory
// updates, early stopping, and frozen-encoder node classification.

#ifndef TGN_TRAINER_H_
#define TGN_TRAINER_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "tgn/model.h"
#include "tgn/optim.h"
#include "tgn/split.h"

namespace tgn {

// Memory that test scoring starts from. kContinue resumes the state left by
// the best epoch's validation pass, i.e. memory built along the training
// trajectory plus the validation events. kReplay zeroes memory and replays
// train + validation under the final parameters.
enum class TestMemory { kContinue, kReplay };

struct TrainConfig {
  int epochs = 50;
  int batch_size = 200;
  double learning_rate = 1e-4;
  int patience = 5;
  std::uint64_t seed = 0;
  TestMemory test_memory = TestMemory::kContinue;
};

struct LinkMetrics {
  double ap = std::numeric_limits<double>::quiet_NaN();
  double auc = std::numeric_limits<double>::quiet_NaN();
  // Number of scored positive interactions.
  std::int64_t count = 0;
};

struct EvalResult {
  LinkMetrics transductive;
  // Interactions touching at least one inductive node.
  LinkMetrics inductive;
  double seconds = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double train_seconds = 0.0;
  EvalResult validation;
};

struct LinkRunResult {
  std::vector<EpochRecord> epochs;
  // 0 when no epoch improved on the untrained model.
  int best_epoch = 0;
  bool stopped_early = false;
  EvalResult test;
};

class UniformNegativeSampler {
 public:
  UniformNegativeSampler(std::vector<NodeId> candidates, std::uint64_t seed);
  std::vector<NodeId> sample(std::size_t n);
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  std::vector<NodeId> candidates_;
  Rng rng_;
};

class Trainer {
 public:
  Trainer(TgnModel& model, const EventLog& log, const SplitSpec& split,
          TrainConfig config);

  // One pass over the training segment starting from zero memory. Returns
  // the mean batch loss.
  double train_epoch();
  // Scores events [begin, end) against uniform negatives over all
  // destinations while memory keeps absorbing the positives. Throws for an
  // empty segment.
  EvalResult evaluate(std::int64_t begin, std::int64_t end);
  // Feeds events [begin, end) through memory without scoring.
  void replay(std::int64_t begin, std::int64_t end);

  // Epochs with validation after each, early stopping on validation
  // transductive AP, best parameters (and with kContinue the matching memory)
  // restored, then test scoring.
  LinkRunResult fit();
  // Zero-memory replay of train + validation, then test scoring.
  EvalResult test();

  // Called after every forward pass, before the state is committed.
  std::function<void(const BatchResult&)> on_batch;
  // Called by fit() after each epoch's validation.
  std::function<void(const EpochRecord&)> on_epoch;

 private:
  TgnModel& model_;
  const EventLog& log_;
  const SplitSpec& split_;
  TrainConfig config_;
  ParameterList params_;
  Adam optimizer_;
  UniformNegativeSampler train_negatives_;
  UniformNegativeSampler eval_negatives_;
  std::int64_t eval_calls_ = 0;
};

struct NodeClassificationConfig {
  int epochs = 50;
  int patience = 5;
  int batch_size = 200;
  double learning_rate = 1e-4;
  std::int64_t hidden = 80;
  double dropout = 0.1;
  std::uint64_t seed = 0;
};

struct NodeClassificationResult {
  std::vector<double> losses;
  std::vector<double> validation_auc;
  int best_epoch = 0;
  double test_auc = std::numeric_limits<double>::quiet_NaN();
};

// Source embeddings of every interaction from the (frozen) encoder, with
// memory replayed from zero over the whole log.
struct SourceEmbeddings {
  std::vector<std::vector<Scalar>> rows;
  std::vector<int> labels;
  std::vector<std::int64_t> ordinals;
};
SourceEmbeddings collect_source_embeddings(TgnModel& model, int batch_size);

// MLP on frozen embeddings predicting the source's state label, early
// stopping on validation ROC AUC.
NodeClassificationResult train_node_classifier(TgnModel& model,
                                               const SplitSpec& split,
                                               const NodeClassificationConfig& config);

}  // namespace tgn

#endif  // TGN_TRAINER_H_
