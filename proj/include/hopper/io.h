#ifndef HOPPER_IO_H
#define HOPPER_IO_H

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hopper/annealing.h"
#include "hopper/insertion.h"
#include "hopper/model.h"

namespace hopper {

inline constexpr int format_version = 1;

enum class ParseErrorCode {
  malformed,
  unsupported_version,
  unknown_field,
  missing_field,
  wrong_type,
  missing_matrix_entry,
  negative_quantity,
  unknown_reference,
  duplicate_id,
  unsorted_rate_bands,
  invalid_value,
};

const char* to_string(ParseErrorCode code);

// Diagnostic for a rejected document. `path` is a JSON pointer to the
// offending field.
class ParseError : public std::runtime_error {
public:
  ParseError(ParseErrorCode code, std::string path, const std::string& message);

  ParseErrorCode code() const { return code_; }
  const std::string& path() const { return path_; }

private:
  ParseErrorCode code_;
  std::string path_;
};

// Matrices may be given as {"full": [[...]]} or, mirroring the usual printed
// layout, {"upper": [[d00, d01, ...], [d11, d12, ...], ...]} whose row i
// starts on the diagonal. Upper input is mirrored into a symmetric matrix.
Instance parse_instance(std::string_view text);
std::string serialize_instance(const Instance& instance);

// The plan document embeds a derived summary (cost, distance, objective).
// Parsing ignores the summary and recomputes it on demand.
Plan parse_plan(std::string_view text, const Instance& instance);
std::string serialize_plan(const Plan& plan, const Instance& instance);

enum class RunPhase { queued, constructing, annealing, done, cancelled, failed };
const char* to_string(RunPhase phase);
std::optional<RunPhase> parse_run_phase(std::string_view text);
bool is_terminal(RunPhase phase);

struct RunRecord {
  std::string id;
  std::string instance;
  RunPhase phase = RunPhase::queued;
  InsertionParams insertion;
  AnnealParams anneal;
  std::uint64_t iterations = 0;
  double elapsed_seconds = 0;
  double initial_scalar = 0;
  double best_scalar = 0;
  Objective initial_objective;
  Objective best_objective;
  // File name of the best plan, relative to the run file.
  std::string plan;
  Trace trace;
  std::string error;

  // (initial - best) / initial, in percent. Zero when initial is zero.
  double improvement_percent() const;
  bool operator==(const RunRecord&) const = default;
};

RunRecord parse_run(std::string_view text);
std::string serialize_run(const RunRecord& run);

// Comma-separated trace table with a header row.
std::string trace_to_csv(const Trace& trace);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

} // namespace hopper

#endif
