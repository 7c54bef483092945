#ifndef HOPPER_INSERTION_H
#define HOPPER_INSERTION_H

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hopper/model.h"
#include "hopper/rng.h"

namespace hopper {

enum class SeedStrategy { farthest, most_pending_orders, random };
enum class TruckStrategy { lowest_mileage, highest_capacity, random };

const char* to_string(SeedStrategy s);
const char* to_string(TruckStrategy s);
std::optional<SeedStrategy> parse_seed_strategy(std::string_view text);
std::optional<TruckStrategy> parse_truck_strategy(std::string_view text);

struct InsertionParams {
  SeedStrategy seed_strategy = SeedStrategy::most_pending_orders;
  TruckStrategy truck_strategy = TruckStrategy::random;
  std::uint64_t rng_seed = 1;
  bool operator==(const InsertionParams&) const = default;
};

struct BuildReport {
  // Tons still owed per order when construction stopped.
  std::vector<Tons> remaining;
  // Orders with remaining tons, in order index order.
  std::vector<Index> unserved_orders;
  // Orders whose customer no truck can reach.
  std::vector<Index> unservable_orders;
  // Urgent orders not fully delivered on day 1.
  std::vector<Index> urgent_shortfall;
  int days_used = 0;
  bool horizon_reached = false;
};

// Emitted each time a journey changes during construction.
struct BuildStep {
  int day = 0;
  Index truck = 0;
  const Journey* journey = nullptr;
  // Truck totals for the day including this journey.
  Hours day_hours = 0;
  Km day_km = 0;
};
using BuildObserver = std::function<void(const BuildStep&)>;

struct BuildResult {
  Plan plan;
  BuildReport report;
};

BuildResult build_initial(const Instance& instance,
                          const InsertionParams& params,
                          const BuildObserver& observer = {});

// Added distance from placing `customer` at `position` (0 = right after the
// depot). Empty when the customer is already on the journey.
std::optional<Km> insertion_cost(const Journey& journey,
                                 Index customer,
                                 std::size_t position,
                                 const Instance& instance);

struct LoadPiece {
  Index order = 0;
  Tons tons = 0;
};

struct LoadResult {
  std::vector<HopperAssignment> assignments;
  Tons leftover = 0;
  Tons loaded() const;
};

// First-fit-decreasing with splitting. Pieces go largest first into the
// smallest free hopper that holds them; a piece that fits nowhere fills the
// largest free hopper and the rest is retried. Loading stops at
// `capacity_left`. Each hopper receives at most one assignment.
LoadResult load_hoppers(std::span<const LoadPiece> pending,
                        const Truck& truck,
                        std::span<const Index> free_hoppers,
                        Tons capacity_left);

// All hoppers free, full max_load available.
LoadResult load_hoppers(std::span<const LoadPiece> pending, const Truck& truck);

// Ties go to the lowest index. Throws std::invalid_argument when empty.
Index pick_seed_customer(std::span<const Index> candidates,
                         const Instance& instance,
                         std::span<const int> pending_orders,
                         SeedStrategy strategy,
                         Rng& rng);

Index pick_truck(std::span<const Index> candidates,
                 const Instance& instance,
                 std::span<const Km> mileage,
                 TruckStrategy strategy,
                 Rng& rng);

} // namespace hopper

#endif
