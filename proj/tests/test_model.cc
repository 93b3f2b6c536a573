#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "model_oracles.h"
#include "test_util.h"
#include "tgn/gradcheck.h"
#include "tgn/model.h"
#include "tgn/ops.h"
#include "tgn/split.h"
#include "tgn/synthetic.h"
#include "tgn/temporal_graph.h"
#include "tgn/trainer.h"

namespace tgn {
namespace {


using testing::toy_log;

ModelDims tiny_dims() { return testing::oracle_dims(4, 2); }

void expect_model_gradients(const std::string& preset) {
  SCOPED_TRACE(preset);
  const GradCheckResult result = testing::model_gradient_check(preset);
  for (const auto& e : result.entries) {
    EXPECT_LT(e.relative_error, 1e-4)
        << e.name << " analytic " << e.analytic_norm << " numeric " << e.numeric_norm;
  }
  // The updater must receive gradient through the flushed messages.
  if (variant_preset(preset).use_memory) {
    bool updater_grad = false;
    for (const auto& e : result.entries) {
      if (e.name.rfind("memory_updater", 0) == 0 && e.analytic_norm > 0) updater_grad = true;
    }
    EXPECT_TRUE(updater_grad);
  }
}

TEST(ModelGradientTest, FullTgnAttnLossMatchesFiniteDifferences) {
  expect_model_gradients("tgn-attn");
}

TEST(ModelGradientTest, OtherVariantsMatchFiniteDifferences) {
  for (const char* p : {"tgn-2l", "tgn-sum", "tgn-mean", "tgn-time", "tgn-id",
                        "jodie", "dyrep", "tgn-no-mem"}) {
    expect_model_gradients(p);
  }
}

bool has_prefix(const ParameterList& params, std::string_view prefix) {
  return std::any_of(params.begin(), params.end(), [&](const Parameter& p) {
    return p.name.rfind(prefix, 0) == 0;
  });
}

TEST(PresetTest, RowsOfTheVariantTable) {
  struct Row {
    const char* name;
    bool memory;
    UpdaterKind updater;
    EmbeddingMode embedding;
    int layers;
    int neighbors;
    Aggregator aggregator;
    MessageFunctionKind message;
    Sampling sampling;
  };
  using E = EmbeddingMode;
  using U = UpdaterKind;
  using A = Aggregator;
  const auto id = MessageFunctionKind::kIdentity;
  const auto recent = Sampling::kMostRecent;
  const Row rows[] = {
      {"tgn-attn", true, U::kGru, E::kAttention, 1, 10, A::kLast, id, recent},
      {"tgn-2l", true, U::kGru, E::kAttention, 2, 10, A::kLast, id, recent},
      {"tgn-no-mem", false, U::kNone, E::kAttention, 1, 10, A::kNone, id, recent},
      {"tgn-time", true, U::kGru, E::kTime, 1, 10, A::kLast, id, recent},
      {"tgn-id", true, U::kGru, E::kIdentity, 1, 10, A::kLast, id, recent},
      {"tgn-sum", true, U::kGru, E::kSum, 1, 10, A::kLast, id, recent},
      {"tgn-mean", true, U::kGru, E::kAttention, 1, 10, A::kMean, id, recent},
      {"jodie", true, U::kRnn, E::kTime, 1, 10, A::kLast, id, recent},
      {"dyrep", true, U::kRnn, E::kIdentity, 1, 10, A::kLast,
       MessageFunctionKind::kDyRepAttention, recent},
      {"tgat", false, U::kNone, E::kAttention, 2, 20, A::kNone, id, Sampling::kUniform},
  };
  ASSERT_EQ(preset_names().size(), std::size(rows));
  for (const Row& r : rows) {
    SCOPED_TRACE(r.name);
    const VariantConfig v = variant_preset(r.name);
    EXPECT_EQ(v.name, r.name);
    EXPECT_EQ(v.use_memory, r.memory);
    EXPECT_EQ(v.updater, r.updater);
    EXPECT_EQ(v.embedding, r.embedding);
    EXPECT_EQ(v.aggregator, r.aggregator);
    EXPECT_EQ(v.message_function, r.message);
    if (r.embedding == E::kAttention || r.embedding == E::kSum) {
      EXPECT_EQ(v.layers, r.layers);
      EXPECT_EQ(v.neighbors, r.neighbors);
      EXPECT_EQ(v.sampling, r.sampling);
    }
  }
  EXPECT_EQ(variant_preset("TGN-Attn").name, "tgn-attn");
  EXPECT_THROW(variant_preset("tgn-lstm"), std::invalid_argument);
}

TEST(PresetTest, RejectsInconsistentConfigs) {
  VariantConfig v = variant_preset("tgn-no-mem");
  v.aggregator = Aggregator::kLast;
  EXPECT_THROW(v.validate(), std::invalid_argument);
  v = variant_preset("tgn-no-mem");
  v.embedding = EmbeddingMode::kIdentity;
  EXPECT_THROW(v.validate(), std::invalid_argument);
  v = variant_preset("tgn-attn");
  v.updater = UpdaterKind::kNone;
  EXPECT_THROW(v.validate(), std::invalid_argument);
  v = variant_preset("tgn-attn");
  v.neighbors = 0;
  EXPECT_THROW(v.validate(), std::invalid_argument);
  v = variant_preset("tgn-no-mem");
  v.message_function = MessageFunctionKind::kDyRepAttention;
  EXPECT_THROW(v.validate(), std::invalid_argument);
}

TEST(ModelTest, MemorylessPresetsHaveNoMemoryParameters) {
  const EventLog log = toy_log();
  const TemporalGraph graph(log);
  for (const char* p : {"tgn-no-mem", "tgat"}) {
    TgnModel model(variant_preset(p), tiny_dims(), log, graph, 1);
    const ParameterList params = model.parameters();
    EXPECT_FALSE(has_prefix(params, "memory_updater")) << p;
    EXPECT_FALSE(has_prefix(params, "message_summary")) << p;
  }
  TgnModel with(variant_preset("tgn-attn"), tiny_dims(), log, graph, 1);
  EXPECT_TRUE(has_prefix(with.parameters(), "memory_updater"));
  TgnModel dyrep(variant_preset("dyrep"), tiny_dims(), log, graph, 1);
  EXPECT_TRUE(has_prefix(dyrep.parameters(), "message_summary"));
}

// Committing earlier batches must not change a memoryless forward pass.
TEST(ModelTest, MemorylessForwardIgnoresHistory) {
  Rng rng(2);
  const EventLog log = testing::random_log(40, 8, 3, rng);
  const TemporalGraph graph(log);
  const std::vector<NodeId> negatives(5, 1);
  TgnModel used(variant_preset("tgat"), tiny_dims(), log, graph, 3);
  for (std::int64_t b = 0; b < 30; b += 5) {
    BatchResult r = used.forward_batch(b, b + 5, negatives, BatchOptions{});
    used.commit(r);
  }
  // Uniform sampling consumes the rng, so compare after matching draws.
  TgnModel aligned(variant_preset("tgat"), tiny_dims(), log, graph, 3);
  for (std::int64_t b = 0; b < 30; b += 5) {
    (void)aligned.forward_batch(b, b + 5, negatives, BatchOptions{});
  }
  const BatchResult a = used.forward_batch(30, 35, negatives, BatchOptions{});
  const BatchResult b = aligned.forward_batch(30, 35, negatives, BatchOptions{});
  EXPECT_EQ(testing::max_abs_diff(a.positive_logits.values(), b.positive_logits.values()), 0.0);
  EXPECT_EQ(testing::max_abs_diff(a.negative_logits.values(), b.negative_logits.values()), 0.0);
}

TEST(ModelTest, IdEmbeddingEqualsMemory) {
  Rng rng(4);
  const EventLog log = testing::random_log(30, 6, 2, rng);
  const TemporalGraph graph(log);
  TgnModel model(variant_preset("tgn-id"), tiny_dims(), log, graph, 5);
  BatchOptions options;
  options.score = false;
  options.embed_sources = true;
  for (std::int64_t b = 0; b < 30; b += 6) {
    BatchResult r = model.forward_batch(b, b + 6, {}, options);
    const MemoryView view(model.memory(), &r.update);
    for (std::size_t i = 0; i < r.interactions.size(); ++i) {
      const auto want = view.row_values(log[r.interactions[i]].source);
      const auto got = r.source_embeddings.row_values(static_cast<std::int64_t>(i));
      EXPECT_EQ(testing::max_abs_diff(got, want), 0.0);
    }
    model.commit(r);
  }
}

TEST(DecoderTest, GradientReachesBothEmbeddingsAndRejectsMismatch) {
  const EventLog log = toy_log();
  const TemporalGraph graph(log);
  TgnModel model(variant_preset("tgn-attn"), tiny_dims(), log, graph, 6);
  Rng rng(7);
  const Tensor src = testing::random_tensor({3, 4}, rng);
  const Tensor dst = testing::random_tensor({3, 4}, rng);
  Tape tape;
  TapeScope scope(tape);
  const Tensor logits = model.decode(src, dst);
  ASSERT_EQ(logits.shape(), (Shape{3, 1}));
  for (Scalar v : logits.values()) EXPECT_TRUE(std::isfinite(v));
  tape.backward(sum(logits));
  const auto norm = [](std::span<const Scalar> g) {
    double n = 0;
    for (Scalar v : g) n += std::abs(v);
    return n;
  };
  EXPECT_GT(norm(src.grad()), 0.0);
  EXPECT_GT(norm(dst.grad()), 0.0);
  const Tensor again = model.decode(src, dst);
  EXPECT_EQ(testing::max_abs_diff(again.values(), logits.values()), 0.0);
  EXPECT_THROW(model.decode(src, testing::random_tensor({3, 5}, rng)), std::invalid_argument);
}

// Delete each interaction in turn and rerun up to its batch: the memory read
// for every other interaction of that batch must not move by a single bit.
TEST(LeakageTest, DeleteAndReplayIsBitIdentical) {
  Rng rng(8);
  const EventLog log = testing::random_log(30, 7, 2, rng);
  // n events in a batch give n * (n - 1) comparisons; 7 leaves a batch of 2.
  for (auto [batch, pairs] : {std::pair{5, 120}, std::pair{7, 170}}) {
    const testing::LeakageReport r = testing::leakage_probe(log, batch);
    EXPECT_EQ(r.compared, pairs) << "batch " << batch;
    EXPECT_EQ(r.mismatched, 0) << "batch " << batch;
    EXPECT_EQ(r.late_flushes, 0) << "batch " << batch;
  }
}

TEST(ModelTest, WholeLogBatchSeesOnlyZeroMemory) {
  Rng rng(10);
  const EventLog log = testing::random_log(50, 9, 2, rng);
  const TemporalGraph graph(log);
  TgnModel model(variant_preset("tgn-attn"), tiny_dims(), log, graph, 11);
  const std::vector<NodeId> negatives(50, 0);
  const BatchResult r = model.forward_batch(0, log.size(), negatives, BatchOptions{});
  EXPECT_TRUE(r.update.flushed_ordinals.empty());
  const MemoryView view(model.memory(), &r.update);
  for (NodeId n = 0; n < log.num_nodes(); ++n) {
    for (Scalar v : view.row_values(n)) EXPECT_EQ(v, 0.0);
  }
}

TEST(ModelTest, StateRoundTripsAndRejectsForeignShapes) {
  Rng rng(12);
  const EventLog log = testing::random_log(20, 5, 2, rng);
  const TemporalGraph graph(log);
  TgnModel model(variant_preset("tgn-attn"), tiny_dims(), log, graph, 13);
  BatchOptions options;
  options.score = false;
  BatchResult r = model.forward_batch(0, 10, {}, options);
  model.commit(r);
  const ModelState saved = model.state();
  r = model.forward_batch(10, 20, {}, options);
  model.commit(r);
  model.restore_state(saved);
  EXPECT_EQ(model.raw_messages().total(), saved.raw.total());
  for (NodeId n = 0; n < log.num_nodes(); ++n) {
    EXPECT_EQ(testing::max_abs_diff(model.memory().state(n), saved.memory.state(n)), 0.0);
  }
  ModelState wrong = saved;
  wrong.memory = MemoryStore(log.num_nodes(), 7);
  EXPECT_THROW(model.restore_state(wrong), std::invalid_argument);
}

struct SmallRun {
  EventLog log;
  TemporalGraph graph;
  SplitSpec split;

  explicit SmallRun(GeneratorKind kind = GeneratorKind::kPeriodic) {
    GeneratorSpec g;
    g.kind = kind;
    g.nodes = 12;
    g.events = 300;
    g.seed = 3;
    log = generate_log(g);
    graph = TemporalGraph(log);
    split = chronological_split(log);
  }
};

TEST(TrainerTest, FixedSeedReproducesEveryMetric) {
  SmallRun data;
  const auto run = [&] {
    TgnModel model(variant_preset("tgn-attn"), tiny_dims(), data.log, data.graph, 4);
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 25;
    c.seed = 4;
    Trainer trainer(model, data.log, data.split, c);
    return trainer.fit();
  };
  const LinkRunResult a = run();
  const LinkRunResult b = run();
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    EXPECT_EQ(a.epochs[i].loss, b.epochs[i].loss);
    EXPECT_EQ(a.epochs[i].validation.transductive.ap, b.epochs[i].validation.transductive.ap);
  }
  EXPECT_EQ(a.test.transductive.ap, b.test.transductive.ap);
  EXPECT_EQ(a.test.transductive.auc, b.test.transductive.auc);
}

// Continued test memory is the state validation left behind; replay rebuilds
// memory under the final parameters. Both must score the same events.
TEST(TrainerTest, TestMemoryProtocols) {
  SmallRun data;
  for (TestMemory mode : {TestMemory::kContinue, TestMemory::kReplay}) {
    TgnModel model(variant_preset("tgn-attn"), tiny_dims(), data.log, data.graph, 5);
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 30;
    c.test_memory = mode;
    Trainer trainer(model, data.log, data.split, c);
    const LinkRunResult run = trainer.fit();
    EXPECT_EQ(run.test.transductive.count,
              [&] {
                std::int64_t n = 0;
                for (std::int64_t o = data.split.val_end; o < data.log.size(); ++o) {
                  n += data.log[o].is_interaction();
                }
                return n;
              }());
    EXPECT_GE(run.test.transductive.ap, 0.0);
    EXPECT_LE(run.test.transductive.ap, 1.0);
  }
}

TEST(TrainerTest, ContinuedTestMemoryMatchesSingleEpochTrajectory) {
  SmallRun data;
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 30;
  TgnModel a(variant_preset("tgn-attn"), tiny_dims(), data.log, data.graph, 6);
  Trainer fit_trainer(a, data.log, data.split, c);
  const LinkRunResult run = fit_trainer.fit();

  // By hand: one epoch, validation, then test without touching memory.
  TgnModel b(variant_preset("tgn-attn"), tiny_dims(), data.log, data.graph, 6);
  Trainer manual(b, data.log, data.split, c);
  manual.train_epoch();
  manual.evaluate(data.split.train_end, data.split.val_end);
  const EvalResult test = manual.evaluate(data.split.val_end, data.split.total);
  EXPECT_EQ(run.best_epoch, 1);
  EXPECT_EQ(run.test.transductive.ap, test.transductive.ap);
}

TEST(TrainerTest, RejectsBadConfigAndEmptySegments) {
  SmallRun data;
  TgnModel model(variant_preset("tgn-attn"), tiny_dims(), data.log, data.graph, 7);
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(Trainer(model, data.log, data.split, c), std::invalid_argument);
  c.batch_size = 10;
  Trainer trainer(model, data.log, data.split, c);
  EXPECT_THROW(trainer.evaluate(5, 5), std::invalid_argument);
}

TEST(NodeClassificationTest, FrozenEncoderClassifierReportsAuc) {
  SmallRun data(GeneratorKind::kLongMemory);
  TgnModel model(variant_preset("tgn-attn"), tiny_dims(), data.log, data.graph, 8);
  const auto before = model.parameter_values();
  const SourceEmbeddings emb = collect_source_embeddings(model, 50);
  EXPECT_EQ(emb.rows.size(), static_cast<std::size_t>(data.log.size()));
  EXPECT_EQ(emb.rows[0].size(), static_cast<std::size_t>(model.embedding_dim()));
  NodeClassificationConfig nc;
  nc.epochs = 3;
  nc.batch_size = 50;
  const NodeClassificationResult r = train_node_classifier(model, data.split, nc);
  EXPECT_GE(r.test_auc, 0.0);
  EXPECT_LE(r.test_auc, 1.0);
  EXPECT_FALSE(r.losses.empty());
  // The encoder stays frozen.
  EXPECT_EQ(model.parameter_values(), before);
}

}  // namespace
}  // namespace tgn
