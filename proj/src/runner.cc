#include "tgn/runner.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tgn/csv.h"
#include "tgn/split.h"
#include "tgn/temporal_graph.h"

namespace tgn {
namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isnan(v) ? json() : json(v); }

json to_json(const LinkMetrics& m) {
  return {{"ap", number_or_null(m.ap)},
          {"auc", number_or_null(m.auc)},
          {"count", m.count}};
}

json to_json(const EvalResult& r) {
  return {{"transductive", to_json(r.transductive)},
          {"inductive", to_json(r.inductive)},
          {"seconds", r.seconds}};
}

json to_json(const VariantConfig& v) {
  return {{"name", v.name},
          {"memory", v.use_memory},
          {"updater", std::string(to_string(v.updater))},
          {"embedding", std::string(to_string(v.embedding))},
          {"layers", v.layers},
          {"neighbors", v.neighbors},
          {"aggregator", std::string(to_string(v.aggregator))},
          {"message_function", std::string(to_string(v.message_function))},
          {"sampling", std::string(to_string(v.sampling))}};
}

json data_json(const RunSpec& spec) {
  if (spec.generator) {
    const GeneratorSpec& g = *spec.generator;
    return {{"generator", std::string(to_string(g.kind))},
            {"nodes", g.nodes},
            {"events", g.events},
            {"seed", g.seed},
            {"cycle_length", g.cycle_length},
            {"groups", g.groups},
            {"feature_dim", g.feature_dim}};
  }
  return {{"path", spec.data_path}};
}

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

VariantConfig RunSpec::resolved_variant() const {
  VariantConfig v = variant_preset(variant);
  if (neighbors) v.neighbors = *neighbors;
  if (layers) v.layers = *layers;
  if (sampling) v.sampling = *sampling;
  v.validate();
  return v;
}

nlohmann::json run_experiment(const RunSpec& spec, std::ostream* progress) {
  const VariantConfig variant = spec.resolved_variant();
  EventLog log;
  if (spec.generator) {
    log = generate_log(*spec.generator);
  } else if (!spec.data_path.empty()) {
    log = ingest_csv(spec.data_path);
  } else {
    throw std::invalid_argument("run: provide --data or --generate");
  }
  const SplitSpec split = chronological_split(log);
  const TemporalGraph graph(log);
  TgnModel model(variant, spec.dims, log, graph, spec.train.seed);
  Trainer trainer(model, log, split, spec.train);

  json report;
  report["format"] = "tgn-report v1";
  report["config"] = {
      {"variant", to_json(variant)},
      {"task", spec.task == Task::kLink ? "link" : "node"},
      {"setting", spec.inductive ? "inductive" : "transductive"},
      {"seed", spec.train.seed},
      {"data", data_json(spec)},
      {"dims",
       {{"memory", spec.dims.memory_dim},
        {"embedding", spec.dims.embedding_dim},
        {"time", spec.dims.time_dim},
        {"heads", spec.dims.heads},
        {"dropout", spec.dims.dropout}}},
      {"training",
       {{"epochs", spec.train.epochs},
        {"batch_size", spec.train.batch_size},
        {"learning_rate", spec.train.learning_rate},
        {"patience", spec.train.patience},
        {"test_memory",
         spec.train.test_memory == TestMemory::kReplay ? "replay" : "continue"}}}};
  report["dataset"] = {{"events", log.size()},
                       {"nodes", log.num_nodes()},
                       {"edge_feature_dim", log.edge_feature_dim()},
                       {"train_events", split.train_size()},
                       {"val_events", split.val_size()},
                       {"test_events", split.test_size()},
                       {"inductive_nodes", split.inductive_nodes.size()}};
  std::int64_t param_count = 0;
  for (const Parameter& p : model.parameters()) param_count += p.tensor.numel();
  report["parameters"] = param_count;

  if (progress != nullptr) {
    *progress << variant.name << ": " << log.size() << " events, "
              << log.num_nodes() << " nodes\n";
    trainer.on_epoch = [progress](const EpochRecord& r) {
      *progress << "  epoch " << r.epoch << " loss " << fixed(r.loss, 4)
                << " val AP " << fixed(r.validation.transductive.ap, 4) << " ("
                << fixed(r.train_seconds, 1) << "s)\n"
                << std::flush;
    };
  }
  const LinkRunResult run = trainer.fit();

  json epochs = json::array();
  for (const EpochRecord& r : run.epochs) {
    epochs.push_back({{"epoch", r.epoch},
                      {"loss", r.loss},
                      {"train_seconds", r.train_seconds},
                      {"validation", to_json(r.validation)}});
  }
  report["epochs"] = epochs;
  report["best_epoch"] = run.best_epoch;
  report["stopped_early"] = run.stopped_early;
  report["test"] = to_json(run.test);
  const LinkMetrics& headline =
      spec.inductive ? run.test.inductive : run.test.transductive;
  report["result"] = {{"metric", "link_ap"},
                      {"value", number_or_null(headline.ap)},
                      {"auc", number_or_null(headline.auc)}};

  if (spec.task == Task::kNode) {
    if (spec.inductive) {
      throw std::invalid_argument("run: node classification is transductive only");
    }
    NodeClassificationConfig nc;
    nc.epochs = spec.train.epochs;
    nc.patience = spec.train.patience;
    nc.batch_size = spec.train.batch_size;
    nc.learning_rate = spec.train.learning_rate;
    nc.dropout = spec.dims.dropout;
    nc.seed = spec.train.seed;
    const NodeClassificationResult node = train_node_classifier(model, split, nc);
    json val = json::array();
    for (double a : node.validation_auc) val.push_back(number_or_null(a));
    report["node_classification"] = {{"losses", node.losses},
                                      {"validation_auc", val},
                                      {"best_epoch", node.best_epoch},
                                      {"test_auc", number_or_null(node.test_auc)}};
    report["result"] = {{"metric", "node_auc"},
                        {"value", number_or_null(node.test_auc)}};
  }
  if (progress != nullptr) {
    *progress << "  test AP transductive " << fixed(run.test.transductive.ap, 4)
              << " inductive " << fixed(run.test.inductive.ap, 4) << "\n";
  }
  if (!spec.out_path.empty()) write_report(report, spec.out_path);
  return report;
}

nlohmann::json sweep(const std::vector<std::string>& presets,
                     const RunSpec& spec, std::ostream* progress) {
  if (presets.size() < 2) {
    throw std::invalid_argument("sweep: needs at least two presets");
  }
  json rows = json::array();
  for (const std::string& name : presets) {
    RunSpec one = spec;
    one.variant = name;
    one.out_path.clear();
    const json report = run_experiment(one, progress);
    double seconds = 0.0;
    for (const auto& e : report["epochs"]) seconds += e["train_seconds"].get<double>();
    const auto epochs = report["epochs"].size();
    rows.push_back(
        {{"variant", report["config"]["variant"]["name"]},
         {"transductive_ap", report["test"]["transductive"]["ap"]},
         {"inductive_ap", report["test"]["inductive"]["ap"]},
         {"seconds_per_epoch",
          epochs > 0 ? json(seconds / static_cast<double>(epochs)) : json()},
         {"report", report}});
  }
  json out = {{"format", "tgn-sweep v1"}, {"runs", rows}};
  if (!spec.out_path.empty()) write_report(out, spec.out_path);
  return out;
}

std::string format_sweep_table(const nlohmann::json& sweep_report) {
  std::ostringstream out;
  out << "variant       trans_AP  induct_AP  sec/epoch\n";
  const auto cell = [](const json& v, int digits) {
    return v.is_number() ? fixed(v.get<double>(), digits) : std::string("n/a");
  };
  for (const auto& row : sweep_report["runs"]) {
    std::string name = row["variant"].get<std::string>();
    name.resize(std::max<std::size_t>(name.size(), 13), ' ');
    char line[160];
    std::snprintf(line, sizeof(line), "%s %9s  %9s  %9s\n", name.c_str(),
                  cell(row["transductive_ap"], 4).c_str(),
                  cell(row["inductive_ap"], 4).c_str(),
                  cell(row["seconds_per_epoch"], 2).c_str());
    out << line;
  }
  return out.str();
}

void write_report(const nlohmann::json& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report '" + path + "'");
  out << report.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace tgn
