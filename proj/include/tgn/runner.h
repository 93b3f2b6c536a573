// End-to-end experiment runs and preset sweeps producing JSON reports.

#ifndef TGN_RUNNER_H_
#define TGN_RUNNER_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tgn/model.h"
#include "tgn/synthetic.h"
#include "tgn/trainer.h"

namespace tgn {

enum class Task { kLink, kNode };

struct RunSpec {
  std::string data_path;
  std::optional<GeneratorSpec> generator;
  std::string variant = "tgn-attn";
  Task task = Task::kLink;
  bool inductive = false;
  TrainConfig train;
  ModelDims dims;
  std::optional<int> neighbors;
  std::optional<int> layers;
  std::optional<Sampling> sampling;
  std::string out_path;

  // Preset with overrides applied; validated.
  VariantConfig resolved_variant() const;
};

// Ingest or generate, split, train with early stopping, evaluate and return
// the report. Progress lines go to `progress` when given.
nlohmann::json run_experiment(const RunSpec& spec,
                              std::ostream* progress = nullptr);

// Runs each preset on the same data and seed, one after another.
nlohmann::json sweep(const std::vector<std::string>& presets,
                     const RunSpec& spec, std::ostream* progress = nullptr);
// Plain-text table: variant, transductive AP, inductive AP, seconds/epoch.
std::string format_sweep_table(const nlohmann::json& sweep_report);

void write_report(const nlohmann::json& report, const std::string& path);

}  // namespace tgn

#endif  // TGN_RUNNER_H_
