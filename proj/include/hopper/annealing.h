#ifndef HOPPER_ANNEALING_H
#define HOPPER_ANNEALING_H

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <stop_token>
#include <string_view>
#include <vector>

#include "hopper/model.h"
#include "hopper/rng.h"

namespace hopper {

// The seven neighbourhoods. A "block" is every load of one customer on one
// journey, moved or swapped as a unit.
enum class MoveKind : std::uint8_t {
  // Block to another (day, truck, journey).
  relocate_anywhere = 1,
  // Block to another journey of the same truck and day.
  relocate_same_truck_day,
  // Block to any truck and journey of the same day.
  relocate_same_day,
  // Swap two blocks on different journeys of one truck and day.
  swap_same_truck_day,
  // Swap two blocks on any two different journeys.
  swap_anywhere,
  // Exchange the visiting order of two stops on one journey.
  swap_visit_order,
  // Swap two blocks between journeys of two trucks on the same day.
  swap_between_trucks,
};

inline constexpr std::size_t move_kind_count = 7;
const char* to_string(MoveKind kind);

class InfeasiblePlanError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Returns a feasible neighbour, or nothing for a null move (degenerate draw or
// an infeasible result). Hoppers of every touched journey are reloaded.
std::optional<Plan> propose_move(MoveKind kind,
                                 const Plan& plan,
                                 const Instance& instance,
                                 Rng& rng);

struct AnnealParams {
  std::uint64_t max_iterations = 750000;
  double max_wall_seconds = 300;
  // Unset: calibrated so the median uphill step from the initial plan is
  // accepted with probability 0.8.
  std::optional<double> initial_temp;
  double cooling_factor = 0.95;
  // Unset: max_iterations / 500, at least 1.
  std::optional<std::uint64_t> steps_per_temp;
  std::uint64_t rng_seed = 1;
  std::array<double, move_kind_count> move_weights{1, 1, 1, 1, 1, 1, 1};
  // Trace sampling stride. Zero: max_iterations / 1000, at least 1.
  // Rows where the best improves are always kept.
  std::uint64_t trace_stride = 0;

  bool operator==(const AnnealParams&) const = default;
};

// Throws ConfigError.
void validate(const AnnealParams& params);

struct TraceRow {
  std::uint64_t iteration = 0;
  double elapsed = 0;
  double current = 0;
  double best = 0;
  double temperature = 0;
  MoveKind move = MoveKind::relocate_anywhere;
  bool accepted = false;
  bool operator==(const TraceRow&) const = default;
};

struct Trace {
  std::vector<TraceRow> rows;
  bool operator==(const Trace&) const = default;
};

struct AnnealProgress {
  std::uint64_t iteration = 0;
  double elapsed = 0;
  double initial = 0;
  double current = 0;
  double best = 0;
  double temperature = 0;
  const Plan* best_plan = nullptr;
};

// One evaluated (non-null) candidate.
struct StepEvent {
  std::uint64_t iteration = 0;
  MoveKind move = MoveKind::relocate_anywhere;
  double delta = 0;
  double temperature = 0;
  double probability = 0;
  bool accepted = false;
};

struct AnnealControl {
  std::stop_token stop;
  // Called roughly every 256 iterations from the annealing thread.
  std::function<void(const AnnealProgress&)> on_progress;
  // Instrumentation: called for every evaluated candidate.
  std::function<void(const StepEvent&)> on_step;
};

struct AnnealResult {
  Plan best;
  Trace trace;
  double initial_scalar = 0;
  double best_scalar = 0;
  double initial_temperature = 0;
  std::uint64_t iterations = 0;
  std::uint64_t null_moves = 0;
  std::uint64_t accepted = 0;
  bool stopped_by_time = false;
  bool cancelled = false;
};

// Metropolis acceptance probability for a worsening of `delta` at `temp`.
double acceptance_probability(double delta, double temperature);

// Throws InfeasiblePlanError if `initial` breaks a constraint.
AnnealResult anneal(const Plan& initial,
                    const Instance& instance,
                    const AnnealParams& params,
                    const AnnealControl& control = {});

double calibrate_temperature(const Plan& initial,
                             const Instance& instance,
                             const AnnealParams& params);

// Independent runs, one per seed, on separate threads. Returns the run whose
// best plan wins the lexicographic comparison (lowest seed on ties).
AnnealResult anneal_restarts(const Plan& initial,
                             const Instance& instance,
                             const AnnealParams& params,
                             std::span<const std::uint64_t> seeds);

} // namespace hopper

#endif
