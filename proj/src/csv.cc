#include "tgn/csv.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace tgn {
namespace {

struct Row {
  std::int64_t source;
  std::int64_t target;
  double timestamp;
  int label;
  std::vector<Scalar> features;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void fail(std::string_view source, std::int64_t line,
                       const std::string& what) {
  throw std::runtime_error(std::string(source) + ":" + std::to_string(line) +
                           ": " + what);
}

template <typename T>
T parse_field(std::string_view field, std::string_view source,
              std::int64_t line, std::string_view column) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    fail(source, line,
         "cannot parse " + std::string(column) + " '" + std::string(field) + "'");
  }
  return value;
}

template <typename T>
std::string shortest(T value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_number: overflow");
  return std::string(buf, ptr);
}

}  // namespace

std::string format_number(double value) { return shortest(value); }

EventLog read_csv(std::istream& in, const CsvSchema& schema,
                  std::string_view source_name) {
  std::vector<Row> rows;
  std::string line;
  std::int64_t line_no = 0;
  bool header_seen = false;
  std::int64_t width = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (split_fields(line).size() < 4) {
        fail(source_name, line_no, "header needs at least 4 columns");
      }
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() < 4) {
      fail(source_name, line_no, "expected at least 4 columns, got " +
                                     std::to_string(fields.size()));
    }
    const auto d = static_cast<std::int64_t>(fields.size()) - 4;
    if (width < 0) width = d;
    if (d != width) {
      fail(source_name, line_no,
           "ragged row: " + std::to_string(d) + " features, expected " +
               std::to_string(width));
    }
    Row row;
    row.source = parse_field<std::int64_t>(fields[0], source_name, line_no,
                                           "source_id");
    row.target = parse_field<std::int64_t>(fields[1], source_name, line_no,
                                           "target_id");
    if (row.source < 0 || row.target < 0) {
      fail(source_name, line_no, "node ids must be non-negative");
    }
    row.timestamp =
        parse_field<double>(fields[2], source_name, line_no, "timestamp");
    if (!(row.timestamp >= 0) || !std::isfinite(row.timestamp)) {
      fail(source_name, line_no,
           "negative or non-finite timestamp '" + std::string(fields[2]) + "'");
    }
    const double label =
        parse_field<double>(fields[3], source_name, line_no, "state_label");
    if (label != 0.0 && label != 1.0) {
      fail(source_name, line_no, "state_label must be 0 or 1");
    }
    row.label = static_cast<int>(label);
    row.features.reserve(static_cast<std::size_t>(d));
    for (std::int64_t f = 0; f < d; ++f) {
      row.features.push_back(parse_field<Scalar>(
          fields[static_cast<std::size_t>(4 + f)], source_name, line_no,
          "feature"));
    }
    rows.push_back(std::move(row));
  }
  if (width < 0) width = 0;

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.timestamp < b.timestamp;
  });

  std::int64_t max_source = -1;
  std::int64_t max_target = -1;
  for (const Row& r : rows) {
    max_source = std::max(max_source, r.source);
    max_target = std::max(max_target, r.target);
  }
  EventLog log(width, 0);
  log.bipartite = schema.bipartite;
  log.destination_offset = schema.bipartite ? max_source + 1 : 0;
  if (schema.bipartite && !rows.empty()) {
    log.reserve_nodes(max_source + 1 + max_target + 1);
  }
  for (Row& r : rows) {
    Event e;
    e.kind = EventKind::kInteraction;
    e.source = r.source;
    e.target = r.target + log.destination_offset;
    e.timestamp = r.timestamp;
    e.features = std::move(r.features);
    e.state_label = r.label;
    log.append(std::move(e));
  }
  return log;
}

EventLog ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "'");
  }
  return read_csv(in, schema, path.string());
}

void write_csv(const EventLog& log, std::ostream& out) {
  out << "source_id,target_id,timestamp,state_label";
  for (std::int64_t f = 1; f <= log.edge_feature_dim(); ++f) out << ",f_" << f;
  out << '\n';
  for (const Event& e : log.events()) {
    if (!e.is_interaction()) continue;
    out << e.source << ',' << (e.target - log.destination_offset) << ','
        << shortest(e.timestamp) << ',' << e.state_label;
    for (Scalar v : e.features) out << ',' << shortest(v);
    out << '\n';
  }
}

void write_csv_file(const EventLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_csv(log, out);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace tgn
