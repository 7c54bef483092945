#ifndef HOPPER_MODEL_H
#define HOPPER_MODEL_H

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hopper {

using Index = std::size_t;
using Tons = double;
using Km = double;
using Hours = double;
using Euros = double;

// Quantities below this are treated as zero when tracking remaining demand.
inline constexpr Tons tons_epsilon = 1e-9;

inline constexpr double infinite_km = std::numeric_limits<double>::infinity();

// Raised when a plan or instance references an entity that does not exist.
// Kept apart from feasibility violations, which describe well-formed plans
// that break an operating constraint.
class StructuralError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Position {
  double x = 0;
  double y = 0;
  bool operator==(const Position&) const = default;
};

struct Feed {
  std::string id;
  std::string name;
  bool operator==(const Feed&) const = default;
};

// Coordinates are for display only; solving uses the distance matrix.
struct Customer {
  std::string id;
  std::string name;
  std::optional<Position> position;
  bool operator==(const Customer&) const = default;
};

struct Order {
  std::string id;
  Index customer = 0;
  Index feed = 0;
  Tons quantity = 0;
  // 0 means urgent: deliver on day 1. k means deliver by day k + 1.
  int days_left = 0;

  int deadline_day() const { return days_left + 1; }
  bool operator==(const Order&) const = default;
};

struct Hopper {
  std::string id;
  Tons capacity = 0;
  bool operator==(const Hopper&) const = default;
};

struct Truck {
  std::string id;
  std::vector<Hopper> hoppers;
  // Legal weight limit. May be lower than the summed hopper volume.
  Tons max_load = 0;
  Hours max_daily_hours = 9;
  Km max_daily_km = infinite_km;
  // Indexed by customer.
  std::vector<bool> reachable;

  Tons hopper_capacity() const;
  bool operator==(const Truck&) const = default;
};

struct RateBand {
  Km upper_km = infinite_km;
  // Euros per ton-kilometre.
  double rate = 0;
  bool operator==(const RateBand&) const = default;
};

struct CostParams {
  Euros unload_fee = 0;
  Euros per_ton_fixed = 0;
  std::vector<RateBand> rate_bands;

  // Rate of the first band whose upper bound contains the distance.
  double rate_for(Km journey_km) const;
  double max_rate() const;
  bool operator==(const CostParams&) const = default;
};

// Square matrix over {depot} + customers. Node 0 is the depot, node i + 1 is
// customer i.
class Matrix {
public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0);

  std::size_t size() const { return n_; }
  double operator()(std::size_t from, std::size_t to) const {
    return data_[from * n_ + to];
  }
  double& operator()(std::size_t from, std::size_t to) {
    return data_[from * n_ + to];
  }
  bool symmetric() const;

  bool operator==(const Matrix&) const = default;

private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

inline constexpr Index depot_node = 0;
inline Index node_of(Index customer) { return customer + 1; }

struct Instance {
  std::vector<Customer> customers;
  std::vector<Feed> feeds;
  std::vector<Order> orders;
  std::vector<Truck> trucks;
  Matrix distance;
  Matrix travel_time;
  Hours service_time = 0;
  CostParams cost;
  int horizon_days = 365;
  // Shortfall penalty W for the scalar objective. Unset means the default of
  // ten times the lower bound.
  std::optional<double> shortfall_penalty;

  // Orders grouped by customer, in declaration order.
  std::vector<std::vector<Index>> orders_by_customer() const;
  Tons total_ordered() const;
  // True when at least one truck can reach the customer.
  bool servable(Index customer) const;
  // Last day on which any order may still be delivered, capped at the horizon.
  int last_delivery_day() const;

  bool operator==(const Instance&) const = default;
};

// Throws ConfigError describing the first broken invariant.
void validate(const Instance& instance);

struct HopperAssignment {
  Index hopper = 0;
  Index order = 0;
  Tons tons = 0;
  bool operator==(const HopperAssignment&) const = default;
};

// One depot-to-depot circuit. The depot is implicit at both ends.
struct Journey {
  std::vector<Index> stops;
  std::vector<HopperAssignment> loads;

  Tons load() const;
  bool operator==(const Journey&) const = default;
};

struct DayPlan {
  // Indexed by truck; each entry is that truck's journeys in execution order.
  std::vector<std::vector<Journey>> trucks;
  bool empty() const;
  bool operator==(const DayPlan&) const = default;
};

struct Plan {
  std::vector<DayPlan> days;

  // Grows the plan to at least `count` days, each sized for `truck_count`.
  void ensure_days(std::size_t count, std::size_t truck_count);
  // Drops empty journeys and trailing empty days.
  void normalize();
  std::size_t journey_count() const;
  bool operator==(const Plan&) const = default;
};

Km journey_km(const Journey& journey, const Instance& instance);
// Driving time plus service time at every stop.
Hours journey_hours(const Journey& journey, const Instance& instance);
Km plan_km(const Plan& plan, const Instance& instance);

enum class ViolationKind {
  hopper_overflow,
  hopper_shared,
  non_positive_load,
  max_load,
  daily_hours,
  daily_km,
  unreachable,
  pointless_stop,
  orphan_load,
  duplicate_stop,
  over_delivery,
  late_delivery,
  deadline_shortfall,
};

const char* to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  // 1-based day; 0 when the violation is plan-wide.
  int day = 0;
  std::optional<Index> truck;
  std::optional<Index> journey;
  // Offending entity, by its external id.
  std::string entity;
  std::string detail;
};

struct FeasibilityOptions {
  // Also report servable orders not fully delivered by their deadline.
  // Off by default: under-delivery is priced by the objective instead.
  bool require_complete = false;
};

// Empty result means the plan respects every operating constraint. Throws
// StructuralError on out-of-range references.
std::vector<Violation> check_feasibility(const Plan& plan,
                                         const Instance& instance,
                                         FeasibilityOptions options = {});

// Throws StructuralError when the plan shape does not match the instance.
void check_structure(const Plan& plan, const Instance& instance);

struct CostBreakdown {
  Euros unloading = 0;
  Euros variable_transport = 0;
  Euros fixed_transport = 0;
  Euros total_optimized = 0;
};

CostBreakdown evaluate_cost(const Plan& plan, const Instance& instance);

Tons total_delivered(const Plan& plan);

// Tons delivered per order, indexed by order.
std::vector<Tons> delivered_by_order(const Plan& plan,
                                     std::size_t order_count);

struct Objective {
  Tons delivered = 0;
  Euros cost = 0;
  bool operator==(const Objective&) const = default;
};

Objective objective_of(const Plan& plan, const Instance& instance);

// Lexicographic: more tons first, then lower cost. Deliveries are compared on
// a 1e-9 t grid so rounding noise in summation order does not decide ties.
// `less` means `a` is better than `b`.
std::weak_ordering compare(const Objective& a, const Objective& b);
inline bool better(const Objective& a, const Objective& b) {
  return compare(a, b) < 0;
}

// unload_fee + max_rate * max_daily_km over the fleet.
double shortfall_penalty_bound(const Instance& instance);
double shortfall_penalty(const Instance& instance);

// W * (ordered - delivered) + cost.
double scalarize(const Objective& objective, const Instance& instance);

} // namespace hopper

#endif
