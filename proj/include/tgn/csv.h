// Interaction CSV ingestion and serialization.
//
// Header row followed by `source_id,target_id,timestamp,state_label,f_1..f_d`
// rows. The feature width d is taken from the first data row; the header's
// column names are not interpreted (public exports name the feature block
// with a single column).

#ifndef TGN_CSV_H_
#define TGN_CSV_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "tgn/event_log.h"

namespace tgn {

struct CsvSchema {
  // Source and target ids live in separate id spaces; targets are shifted by
  // (max source id + 1) so the two never collide.
  bool bipartite = true;
};

// Throws std::runtime_error naming the line for malformed input.
EventLog read_csv(std::istream& in, const CsvSchema& schema = {},
                  std::string_view source_name = "<stream>");
EventLog ingest_csv(const std::filesystem::path& path,
                    const CsvSchema& schema = {});

// Writes the interaction events with their original ids. Numbers use the
// shortest representation that parses back to the same value, so files in
// that form round-trip byte for byte.
void write_csv(const EventLog& log, std::ostream& out);
void write_csv_file(const EventLog& log, const std::filesystem::path& path);

std::string format_number(double value);

}  // namespace tgn

#endif  // TGN_CSV_H_
