#ifndef HOPPER_ORACLE_H
#define HOPPER_ORACLE_H

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "hopper/model.h"

namespace hopper {

struct OracleLimits {
  std::size_t max_customers = 7;
  std::size_t max_trucks = 3;
  bool single_day_only = true;
};

enum class OracleMode {
  // Deliver every order in full, minimise total kilometres.
  min_distance,
  // Maximise tons delivered, then minimise optimised cost.
  lexicographic,
};

const char* to_string(OracleMode mode);
std::optional<OracleMode> parse_oracle_mode(std::string_view text);

class LimitExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct OracleResult {
  Plan plan;
  Km total_km = 0;
  Objective objective;
  // Number of complete solutions evaluated.
  std::uint64_t explored = 0;
};

// Exhaustive search over single-day plans in which every visited customer is
// served by exactly one journey. Hopper packing is searched completely.
// Returns nothing when no plan satisfies the mode (min_distance with an
// undeliverable order). Throws LimitExceeded above `limits`.
std::optional<OracleResult> solve_exact(const Instance& instance,
                                        const OracleLimits& limits,
                                        OracleMode mode);

} // namespace hopper

#endif
