#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tgn/runner.h"
#include "tgn/synthetic.h"

namespace {

struct RunFlags {
  std::string data;
  std::string generate;
  std::int64_t nodes = 100;
  std::int64_t events = 10000;
  int cycle_length = 3;
  int groups = 4;
  int feature_dim = 4;
  std::string variant = "tgn-attn";
  std::string task = "link";
  bool inductive = false;
  int epochs = 50;
  int batch_size = 200;
  std::uint64_t seed = 0;
  double lr = 1e-4;
  int patience = 5;
  std::string test_memory = "continue";
  std::int64_t memory_dim = 172;
  std::int64_t embedding_dim = 100;
  std::int64_t time_dim = 100;
  std::int64_t heads = 2;
  double dropout = 0.1;
  std::optional<int> neighbors;
  std::optional<int> layers;
  std::string sampling;
  std::string out;
  bool quiet = false;
};

void add_generator_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--nodes", f.nodes, "Synthetic node count")->capture_default_str();
  app->add_option("--events", f.events, "Synthetic event count")->capture_default_str();
  app->add_option("--cycle-length", f.cycle_length, "periodic: destinations per source cycle")
      ->capture_default_str();
  app->add_option("--groups", f.groups, "long_memory: destination groups")
      ->capture_default_str();
  app->add_option("--feature-dim", f.feature_dim, "Synthetic edge feature width")
      ->capture_default_str();
}

void add_run_flags(CLI::App* app, RunFlags& f, bool with_variant) {
  app->add_option("--data", f.data, "Interaction CSV to ingest");
  app->add_option("--generate", f.generate, "Synthetic generator: periodic | long_memory");
  add_generator_flags(app, f);
  if (with_variant) {
    app->add_option("--variant", f.variant, "Variant preset")->capture_default_str();
  }
  app->add_option("--task", f.task, "link | node")
      ->check(CLI::IsMember({"link", "node"}))
      ->capture_default_str();
  app->add_flag("--inductive", f.inductive, "Headline the inductive setting");
  app->add_option("--epochs", f.epochs)->capture_default_str();
  app->add_option("--batch-size", f.batch_size)->capture_default_str();
  app->add_option("--seed", f.seed)->capture_default_str();
  app->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--patience", f.patience)->capture_default_str();
  app->add_option("--test-memory", f.test_memory,
                  "Memory before test scoring: continue (best epoch's validation state) | replay")
      ->check(CLI::IsMember({"continue", "replay"}))
      ->capture_default_str();
  app->add_option("--memory-dim", f.memory_dim,
                  "Memory width; embedding and time widths follow unless set")
      ->capture_default_str();
  app->add_option("--embedding-dim", f.embedding_dim)->capture_default_str();
  app->add_option("--time-dim", f.time_dim)->capture_default_str();
  app->add_option("--heads", f.heads)->capture_default_str();
  app->add_option("--dropout", f.dropout)->capture_default_str();
  app->add_option("--neighbors", f.neighbors, "Override neighbors per hop");
  app->add_option("--layers", f.layers, "Override embedding layers");
  app->add_option("--sampling", f.sampling, "Override sampling: recent | uniform")
      ->check(CLI::IsMember({"recent", "uniform", "most_recent"}));
  app->add_option("--out", f.out, "Report path (JSON)");
  app->add_flag("--quiet", f.quiet, "No progress output");
}

tgn::GeneratorSpec generator_spec(const RunFlags& f, const std::string& kind) {
  tgn::GeneratorSpec g;
  g.kind = tgn::parse_generator(kind);
  g.nodes = f.nodes;
  g.events = f.events;
  g.seed = f.seed;
  g.cycle_length = f.cycle_length;
  g.groups = f.groups;
  g.feature_dim = f.feature_dim;
  return g;
}

tgn::RunSpec to_spec(const RunFlags& f, const CLI::App* app) {
  tgn::RunSpec spec;
  if (!f.data.empty() && !f.generate.empty()) {
    throw std::invalid_argument("--data and --generate are mutually exclusive");
  }
  spec.data_path = f.data;
  if (!f.generate.empty()) spec.generator = generator_spec(f, f.generate);
  spec.variant = f.variant;
  spec.task = f.task == "node" ? tgn::Task::kNode : tgn::Task::kLink;
  spec.inductive = f.inductive;
  spec.train.epochs = f.epochs;
  spec.train.batch_size = f.batch_size;
  spec.train.seed = f.seed;
  spec.train.learning_rate = f.lr;
  spec.train.patience = f.patience;
  spec.train.test_memory =
      f.test_memory == "replay" ? tgn::TestMemory::kReplay : tgn::TestMemory::kContinue;
  spec.dims.memory_dim = f.memory_dim;
  const bool memory_set = app->count("--memory-dim") > 0;
  spec.dims.embedding_dim =
      memory_set && app->count("--embedding-dim") == 0 ? f.memory_dim : f.embedding_dim;
  spec.dims.time_dim =
      memory_set && app->count("--time-dim") == 0 ? f.memory_dim : f.time_dim;
  spec.dims.heads = f.heads;
  spec.dims.dropout = f.dropout;
  spec.neighbors = f.neighbors;
  spec.layers = f.layers;
  if (!f.sampling.empty()) spec.sampling = tgn::parse_sampling(f.sampling);
  spec.out_path = f.out;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal graph network experiments"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Train and evaluate one variant");
  add_run_flags(run, run_flags, true);

  RunFlags sweep_flags;
  std::vector<std::string> variants;
  CLI::App* sweep = app.add_subcommand("sweep", "Compare presets on the same data");
  add_run_flags(sweep, sweep_flags, false);
  sweep->add_option("--variants", variants, "Comma-separated presets")
      ->delimiter(',')
      ->required();

  RunFlags gen_flags;
  std::string kind;
  CLI::App* generate = app.add_subcommand("generate", "Write a synthetic CSV");
  generate->add_option("kind", kind, "periodic | long_memory")->required();
  add_generator_flags(generate, gen_flags);
  generate->add_option("--seed", gen_flags.seed)->capture_default_str();
  generate->add_option("--out", gen_flags.out, "CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const tgn::RunSpec spec = to_spec(run_flags, run);
      const auto report =
          tgn::run_experiment(spec, run_flags.quiet ? nullptr : &std::cerr);
      if (spec.out_path.empty()) std::cout << report.dump(2) << '\n';
    } else if (sweep->parsed()) {
      const tgn::RunSpec spec = to_spec(sweep_flags, sweep);
      const auto table =
          tgn::sweep(variants, spec, sweep_flags.quiet ? nullptr : &std::cerr);
      std::cout << tgn::format_sweep_table(table);
    } else if (generate->parsed()) {
      tgn::write_synthetic_csv(generator_spec(gen_flags, kind), gen_flags.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
