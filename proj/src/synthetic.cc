#include "tgn/synthetic.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tgn/csv.h"
#include "tgn/ops.h"

namespace tgn {
namespace {

std::string shortest(Scalar v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("generator: number overflow");
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::kPeriodic: return "periodic";
    case GeneratorKind::kLongMemory: return "long_memory";
  }
  return "?";
}

GeneratorKind parse_generator(std::string_view name) {
  std::string key(name);
  for (char& c : key) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '-') c = '_';
  }
  if (key == "periodic") return GeneratorKind::kPeriodic;
  if (key == "long_memory") return GeneratorKind::kLongMemory;
  throw std::invalid_argument("unknown generator '" + std::string(name) +
                              "' (expected periodic or long_memory)");
}

void GeneratorSpec::validate() const {
  if (nodes < 4) {
    throw std::invalid_argument("generator: needs at least 4 nodes, got " +
                                std::to_string(nodes));
  }
  if (events < 100) {
    throw std::invalid_argument("generator: needs at least 100 events, got " +
                                std::to_string(events));
  }
  if (feature_dim < 0) {
    throw std::invalid_argument("generator: negative feature width");
  }
  if (kind == GeneratorKind::kPeriodic &&
      (cycle_length < 1 || cycle_length > destinations())) {
    throw std::invalid_argument("generator: cycle length " +
                                std::to_string(cycle_length) + " outside [1, " +
                                std::to_string(destinations()) + "]");
  }
  if (kind == GeneratorKind::kLongMemory &&
      (groups < 2 || groups > destinations())) {
    throw std::invalid_argument("generator: group count " +
                                std::to_string(groups) + " outside [2, " +
                                std::to_string(destinations()) + "]");
  }
}

std::vector<SyntheticRow> generate_rows(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::int64_t sources = spec.sources();
  const std::int64_t destinations = spec.destinations();
  std::uniform_int_distribution<std::int64_t> pick_source(0, sources - 1);
  std::uniform_int_distribution<std::int64_t> pick_destination(0, destinations - 1);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> feature(-1.0, 1.0);

  std::vector<std::vector<std::int64_t>> cycles;
  std::vector<std::int64_t> visits(static_cast<std::size_t>(sources), 0);
  if (spec.kind == GeneratorKind::kPeriodic) {
    std::vector<std::int64_t> all(static_cast<std::size_t>(destinations));
    std::iota(all.begin(), all.end(), std::int64_t{0});
    for (std::int64_t s = 0; s < sources; ++s) {
      for (int j = 0; j < spec.cycle_length; ++j) {
        std::uniform_int_distribution<std::int64_t> pick(j, destinations - 1);
        std::swap(all[static_cast<std::size_t>(j)],
                  all[static_cast<std::size_t>(pick(rng))]);
      }
      cycles.emplace_back(all.begin(), all.begin() + spec.cycle_length);
    }
  }
  std::vector<std::int64_t> first(static_cast<std::size_t>(sources), -1);
  std::vector<std::vector<std::int64_t>> members(static_cast<std::size_t>(spec.groups));
  for (std::int64_t d = 0; d < destinations; ++d) {
    members[static_cast<std::size_t>(d % spec.groups)].push_back(d);
  }

  std::vector<SyntheticRow> rows;
  rows.reserve(static_cast<std::size_t>(spec.events));
  double t = 0.0;
  for (std::int64_t n = 0; n < spec.events; ++n) {
    t += 0.5 + jitter(rng);
    SyntheticRow row;
    row.source = pick_source(rng);
    row.timestamp = t;
    row.label = 0;
    const auto s = static_cast<std::size_t>(row.source);
    if (spec.kind == GeneratorKind::kPeriodic) {
      const auto& cycle = cycles[s];
      row.target = cycle[static_cast<std::size_t>(
          visits[s] % static_cast<std::int64_t>(cycle.size()))];
      ++visits[s];
    } else {
      if (first[s] < 0) {
        row.target = pick_destination(rng);
        first[s] = row.target;
      } else {
        const auto& group = members[static_cast<std::size_t>(first[s] % spec.groups)];
        std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
        row.target = group[pick(rng)];
      }
      row.label = first[s] % spec.groups == 0 ? 1 : 0;
    }
    row.features.resize(static_cast<std::size_t>(spec.feature_dim));
    for (Scalar& f : row.features) f = static_cast<Scalar>(feature(rng));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string generate_csv(const GeneratorSpec& spec) {
  const auto rows = generate_rows(spec);
  std::ostringstream out;
  out << "source_id,target_id,timestamp,state_label";
  for (int f = 1; f <= spec.feature_dim; ++f) out << ",f_" << f;
  out << '\n';
  for (const SyntheticRow& r : rows) {
    out << r.source << ',' << r.target << ',' << format_number(r.timestamp)
        << ',' << r.label;
    for (Scalar v : r.features) out << ',' << shortest(v);
    out << '\n';
  }
  return out.str();
}

EventLog generate_log(const GeneratorSpec& spec) {
  std::istringstream in(generate_csv(spec));
  return read_csv(in, CsvSchema{}, "<" + std::string(to_string(spec.kind)) + ">");
}

void write_synthetic_csv(const GeneratorSpec& spec,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << generate_csv(spec);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace tgn
