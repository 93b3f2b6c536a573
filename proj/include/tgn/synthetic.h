// Synthetic interaction streams with a known generating rule.
//
// periodic: sources are split from destinations; every source owns a fixed
// cycle of distinct destinations and visits them in rotation, so the next
// destination is a function of how often the source has interacted.
//
// long_memory: a source's first destination is uniform; every later
// destination is drawn uniformly from the group of that first partner
// (group(d) = d mod groups). The source's state label is 1 iff that group is
// 0. Only a model that remembers the first partner can predict either.

#ifndef TGN_SYNTHETIC_H_
#define TGN_SYNTHETIC_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tgn/event_log.h"

namespace tgn {

enum class GeneratorKind { kPeriodic, kLongMemory };

std::string_view to_string(GeneratorKind k);
GeneratorKind parse_generator(std::string_view name);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kPeriodic;
  std::int64_t nodes = 100;
  std::int64_t events = 10000;
  std::uint64_t seed = 0;
  int cycle_length = 3;
  int groups = 4;
  int feature_dim = 4;

  // Throws std::invalid_argument for degenerate parameters.
  void validate() const;
  std::int64_t sources() const { return nodes / 2; }
  std::int64_t destinations() const { return nodes - nodes / 2; }
};

// Rows in original (unshifted) id spaces.
struct SyntheticRow {
  std::int64_t source;
  std::int64_t target;
  double timestamp;
  int label;
  std::vector<Scalar> features;
};

std::vector<SyntheticRow> generate_rows(const GeneratorSpec& spec);
// CSV text in the ingestion schema.
std::string generate_csv(const GeneratorSpec& spec);
// The generated CSV ingested back into an event log.
EventLog generate_log(const GeneratorSpec& spec);
void write_synthetic_csv(const GeneratorSpec& spec,
                         const std::filesystem::path& path);

}  // namespace tgn

#endif  // TGN_SYNTHETIC_H_
