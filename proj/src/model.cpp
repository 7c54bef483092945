#include "hopper/model.h"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace hopper {

namespace {

constexpr double slack = 1e-9;

// Deliveries are compared on this grid (tons).
constexpr double delivered_grid = 1e-9;

} // namespace

Tons Truck::hopper_capacity() const {
  Tons sum = 0;
  for (const auto& h : hoppers) {
    sum += h.capacity;
  }
  return sum;
}

double CostParams::rate_for(Km journey_km) const {
  for (const auto& band : rate_bands) {
    if (journey_km <= band.upper_km) {
      return band.rate;
    }
  }
  return rate_bands.empty() ? 0.0 : rate_bands.back().rate;
}

double CostParams::max_rate() const {
  double best = 0;
  for (const auto& band : rate_bands) {
    best = std::max(best, band.rate);
  }
  return best;
}

Matrix::Matrix(std::size_t n, double fill) : n_(n), data_(n * n, fill) {
}

bool Matrix::symmetric() const {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if ((*this)(i, j) != (*this)(j, i)) {
        return false;
      }
    }
  }
  return true;
}

std::vector<std::vector<Index>> Instance::orders_by_customer() const {
  std::vector<std::vector<Index>> grouped(customers.size());
  for (Index o = 0; o < orders.size(); ++o) {
    grouped[orders[o].customer].push_back(o);
  }
  return grouped;
}

Tons Instance::total_ordered() const {
  Tons sum = 0;
  for (const auto& order : orders) {
    sum += order.quantity;
  }
  return sum;
}

bool Instance::servable(Index customer) const {
  return std::ranges::any_of(trucks, [&](const Truck& t) {
    return t.reachable[customer] && !t.hoppers.empty() && t.max_load > 0;
  });
}

int Instance::last_delivery_day() const {
  int last = 0;
  for (const auto& order : orders) {
    last = std::max(last, order.deadline_day());
  }
  return std::min(last, horizon_days);
}

void validate(const Instance& instance) {
  const auto node_count = instance.customers.size() + 1;

  auto check_unique = [](const auto& items, const char* what) {
    std::vector<std::string> ids;
    for (const auto& item : items) {
      ids.push_back(item.id);
    }
    std::ranges::sort(ids);
    if (auto it = std::ranges::adjacent_find(ids); it != ids.end()) {
      throw ConfigError(fmt::format("duplicate {} id '{}'", what, *it));
    }
  };
  check_unique(instance.customers, "customer");
  check_unique(instance.feeds, "feed");
  check_unique(instance.orders, "order");
  check_unique(instance.trucks, "truck");

  for (const auto& order : instance.orders) {
    if (order.customer >= instance.customers.size()) {
      throw StructuralError(
        fmt::format("order '{}' references an unknown customer", order.id));
    }
    if (order.feed >= instance.feeds.size()) {
      throw StructuralError(
        fmt::format("order '{}' references an unknown feed", order.id));
    }
    if (!(order.quantity > 0)) {
      throw ConfigError(
        fmt::format("order '{}' has non-positive quantity", order.id));
    }
    if (order.days_left < 0) {
      throw ConfigError(
        fmt::format("order '{}' has negative days_left", order.id));
    }
  }

  for (const auto& truck : instance.trucks) {
    if (truck.hoppers.empty()) {
      throw ConfigError(fmt::format("truck '{}' has no hoppers", truck.id));
    }
    check_unique(truck.hoppers, "hopper");
    for (const auto& h : truck.hoppers) {
      if (!(h.capacity > 0)) {
        throw ConfigError(fmt::format("hopper '{}' of truck '{}' has "
                                      "non-positive capacity",
                                      h.id,
                                      truck.id));
      }
    }
    if (!(truck.max_load > 0)) {
      throw ConfigError(
        fmt::format("truck '{}' has non-positive max_load", truck.id));
    }
    if (!(truck.max_daily_hours > 0)) {
      throw ConfigError(
        fmt::format("truck '{}' has non-positive max_daily_hours", truck.id));
    }
    if (!(truck.max_daily_km > 0) || !std::isfinite(truck.max_daily_km)) {
      throw ConfigError(fmt::format(
        "truck '{}' needs a positive finite max_daily_km", truck.id));
    }
    if (truck.reachable.size() != instance.customers.size()) {
      throw StructuralError(
        fmt::format("truck '{}' reachability does not cover every customer",
                    truck.id));
    }
  }

  for (const auto* m : {&instance.distance, &instance.travel_time}) {
    const char* name = m == &instance.distance ? "distance" : "travel_time";
    if (m->size() != node_count) {
      throw ConfigError(fmt::format("{} matrix is {}x{}, expected {}x{}",
                                    name,
                                    m->size(),
                                    m->size(),
                                    node_count,
                                    node_count));
    }
    for (std::size_t i = 0; i < node_count; ++i) {
      for (std::size_t j = 0; j < node_count; ++j) {
        const double v = (*m)(i, j);
        if (!std::isfinite(v) || v < 0) {
          throw ConfigError(
            fmt::format("{}[{}][{}] must be finite and nonnegative", name, i, j));
        }
        if (i == j && v != 0) {
          throw ConfigError(
            fmt::format("{}[{}][{}] must be zero on the diagonal", name, i, j));
        }
      }
    }
  }

  if (instance.service_time < 0) {
    throw ConfigError("service_time must be nonnegative");
  }
  if (instance.horizon_days < 1) {
    throw ConfigError("horizon_days must be at least 1");
  }

  const auto& bands = instance.cost.rate_bands;
  if (bands.empty()) {
    throw ConfigError("rate_bands must not be empty");
  }
  for (std::size_t b = 0; b < bands.size(); ++b) {
    if (!(bands[b].rate > 0)) {
      throw ConfigError(fmt::format("rate band {} has non-positive rate", b));
    }
    if (b > 0 && !(bands[b].upper_km > bands[b - 1].upper_km)) {
      throw ConfigError("rate band upper_km values must be strictly increasing");
    }
  }
  if (bands.back().upper_km != infinite_km) {
    throw ConfigError("the last rate band must be unbounded");
  }
  if (instance.cost.unload_fee < 0 || instance.cost.per_ton_fixed < 0) {
    throw ConfigError("cost fees must be nonnegative");
  }

  if (instance.shortfall_penalty &&
      !(*instance.shortfall_penalty > shortfall_penalty_bound(instance))) {
    throw ConfigError(
      fmt::format("shortfall_penalty {} does not exceed the bound {}",
                  *instance.shortfall_penalty,
                  shortfall_penalty_bound(instance)));
  }
}

Tons Journey::load() const {
  Tons sum = 0;
  for (const auto& a : loads) {
    sum += a.tons;
  }
  return sum;
}

bool DayPlan::empty() const {
  return std::ranges::all_of(trucks, [](const auto& j) { return j.empty(); });
}

void Plan::ensure_days(std::size_t count, std::size_t truck_count) {
  if (days.size() < count) {
    days.resize(count);
  }
  for (auto& day : days) {
    if (day.trucks.size() < truck_count) {
      day.trucks.resize(truck_count);
    }
  }
}

void Plan::normalize() {
  for (auto& day : days) {
    for (auto& journeys : day.trucks) {
      std::erase_if(journeys, [](const Journey& j) { return j.stops.empty(); });
    }
  }
  while (!days.empty() && days.back().empty()) {
    days.pop_back();
  }
}

std::size_t Plan::journey_count() const {
  std::size_t count = 0;
  for (const auto& day : days) {
    for (const auto& journeys : day.trucks) {
      count += journeys.size();
    }
  }
  return count;
}

namespace {

double tour_sum(const Journey& journey, const Matrix& m) {
  if (journey.stops.empty()) {
    return 0;
  }
  double sum = 0;
  Index prev = depot_node;
  for (const auto c : journey.stops) {
    sum += m(prev, node_of(c));
    prev = node_of(c);
  }
  return sum + m(prev, depot_node);
}

} // namespace

Km journey_km(const Journey& journey, const Instance& instance) {
  return tour_sum(journey, instance.distance);
}

Hours journey_hours(const Journey& journey, const Instance& instance) {
  return tour_sum(journey, instance.travel_time) +
         instance.service_time * static_cast<double>(journey.stops.size());
}

Km plan_km(const Plan& plan, const Instance& instance) {
  Km sum = 0;
  for (const auto& day : plan.days) {
    for (const auto& journeys : day.trucks) {
      for (const auto& j : journeys) {
        sum += journey_km(j, instance);
      }
    }
  }
  return sum;
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
  case ViolationKind::hopper_overflow:
    return "hopper-overflow";
  case ViolationKind::hopper_shared:
    return "hopper-shared";
  case ViolationKind::non_positive_load:
    return "non-positive-load";
  case ViolationKind::max_load:
    return "max-load";
  case ViolationKind::daily_hours:
    return "daily-hours";
  case ViolationKind::daily_km:
    return "daily-km";
  case ViolationKind::unreachable:
    return "unreachable";
  case ViolationKind::pointless_stop:
    return "pointless-stop";
  case ViolationKind::orphan_load:
    return "orphan-load";
  case ViolationKind::duplicate_stop:
    return "duplicate-stop";
  case ViolationKind::over_delivery:
    return "over-delivery";
  case ViolationKind::late_delivery:
    return "late-delivery";
  case ViolationKind::deadline_shortfall:
    return "deadline-shortfall";
  }
  return "unknown";
}

void check_structure(const Plan& plan, const Instance& instance) {
  for (std::size_t d = 0; d < plan.days.size(); ++d) {
    const auto& day = plan.days[d];
    if (day.trucks.size() > instance.trucks.size()) {
      throw StructuralError(
        fmt::format("day {} lists {} trucks but the instance has {}",
                    d + 1,
                    day.trucks.size(),
                    instance.trucks.size()));
    }
    for (std::size_t t = 0; t < day.trucks.size(); ++t) {
      const auto& truck = instance.trucks[t];
      for (const auto& journey : day.trucks[t]) {
        for (const auto c : journey.stops) {
          if (c >= instance.customers.size()) {
            throw StructuralError(
              fmt::format("day {} truck '{}' visits unknown customer #{}",
                          d + 1,
                          truck.id,
                          c));
          }
        }
        for (const auto& a : journey.loads) {
          if (a.hopper >= truck.hoppers.size()) {
            throw StructuralError(
              fmt::format("day {} truck '{}' loads unknown hopper #{}",
                          d + 1,
                          truck.id,
                          a.hopper));
          }
          if (a.order >= instance.orders.size()) {
            throw StructuralError(
              fmt::format("day {} truck '{}' carries unknown order #{}",
                          d + 1,
                          truck.id,
                          a.order));
          }
        }
      }
    }
  }
}

std::vector<Violation> check_feasibility(const Plan& plan,
                                         const Instance& instance,
                                         FeasibilityOptions options) {
  check_structure(plan, instance);

  std::vector<Violation> out;
  std::vector<Tons> delivered(instance.orders.size(), 0.0);

  for (std::size_t d = 0; d < plan.days.size(); ++d) {
    const int day = static_cast<int>(d) + 1;
    const auto& trucks = plan.days[d].trucks;
    for (Index t = 0; t < trucks.size(); ++t) {
      const auto& truck = instance.trucks[t];
      Hours hours = 0;
      Km km = 0;

      for (Index j = 0; j < trucks[t].size(); ++j) {
        const auto& journey = trucks[t][j];
        auto report = [&](ViolationKind kind,
                          std::string entity,
                          std::string detail) {
          out.push_back(
            {kind, day, t, j, std::move(entity), std::move(detail)});
        };

        hours += journey_hours(journey, instance);
        km += journey_km(journey, instance);

        std::vector<bool> seen(instance.customers.size(), false);
        std::vector<bool> served(instance.customers.size(), false);
        for (const auto c : journey.stops) {
          const auto& id = instance.customers[c].id;
          if (seen[c]) {
            report(ViolationKind::duplicate_stop, id, "customer visited twice");
          }
          seen[c] = true;
          if (!truck.reachable[c]) {
            report(ViolationKind::unreachable,
                   id,
                   fmt::format("truck '{}' cannot reach customer", truck.id));
          }
        }

        std::vector<int> hopper_uses(truck.hoppers.size(), 0);
        for (const auto& a : journey.loads) {
          const auto& order = instance.orders[a.order];
          const auto& hopper = truck.hoppers[a.hopper];
          delivered[a.order] += a.tons;

          if (!(a.tons > 0)) {
            report(ViolationKind::non_positive_load,
                   order.id,
                   fmt::format("{} t", a.tons));
          }
          if (++hopper_uses[a.hopper] == 2) {
            report(ViolationKind::hopper_shared,
                   hopper.id,
                   "hopper holds more than one assignment");
          }
          if (a.tons > hopper.capacity + slack) {
            report(ViolationKind::hopper_overflow,
                   hopper.id,
                   fmt::format("{} t in a {} t hopper", a.tons, hopper.capacity));
          }
          if (!seen[order.customer]) {
            report(ViolationKind::orphan_load,
                   order.id,
                   "customer of the order is not a stop");
          } else {
            served[order.customer] = true;
          }
          if (day > order.deadline_day() || day > instance.horizon_days) {
            report(ViolationKind::late_delivery,
                   order.id,
                   fmt::format("delivered on day {}, due by day {}",
                               day,
                               order.deadline_day()));
          }
        }

        for (const auto c : journey.stops) {
          if (!served[c]) {
            report(ViolationKind::pointless_stop,
                   instance.customers[c].id,
                   "stop carries no feed for the customer");
            served[c] = true;
          }
        }

        const Tons load = journey.load();
        if (load > truck.max_load + slack) {
          report(ViolationKind::max_load,
                 truck.id,
                 fmt::format("{} t over a {} t limit", load, truck.max_load));
        }
      }

      if (hours > truck.max_daily_hours + slack) {
        out.push_back({ViolationKind::daily_hours,
                       day,
                       t,
                       std::nullopt,
                       truck.id,
                       fmt::format("{} h over a {} h limit",
                                   hours,
                                   truck.max_daily_hours)});
      }
      if (km > truck.max_daily_km + slack) {
        out.push_back({ViolationKind::daily_km,
                       day,
                       t,
                       std::nullopt,
                       truck.id,
                       fmt::format("{} km over a {} km limit",
                                   km,
                                   truck.max_daily_km)});
      }
    }
  }

  for (Index o = 0; o < instance.orders.size(); ++o) {
    const auto& order = instance.orders[o];
    if (delivered[o] > order.quantity + slack) {
      out.push_back({ViolationKind::over_delivery,
                     0,
                     std::nullopt,
                     std::nullopt,
                     order.id,
                     fmt::format("{} t delivered of {} t ordered",
                                 delivered[o],
                                 order.quantity)});
    }
    if (options.require_complete && instance.servable(order.customer) &&
        delivered[o] < order.quantity - slack) {
      out.push_back({ViolationKind::deadline_shortfall,
                     order.deadline_day(),
                     std::nullopt,
                     std::nullopt,
                     order.id,
                     fmt::format("{} t delivered of {} t ordered",
                                 delivered[o],
                                 order.quantity)});
    }
  }
  return out;
}

CostBreakdown evaluate_cost(const Plan& plan, const Instance& instance) {
  CostBreakdown cost;
  Tons tons = 0;
  for (const auto& day : plan.days) {
    for (const auto& journeys : day.trucks) {
      for (const auto& journey : journeys) {
        const Km km = journey_km(journey, instance);
        const Tons load = journey.load();
        tons += load;
        cost.unloading +=
          instance.cost.unload_fee * static_cast<double>(journey.stops.size());
        cost.variable_transport += instance.cost.rate_for(km) * km * load;
      }
    }
  }
  cost.fixed_transport = instance.cost.per_ton_fixed * tons;
  cost.total_optimized = cost.unloading + cost.variable_transport;
  return cost;
}

Tons total_delivered(const Plan& plan) {
  Tons sum = 0;
  for (const auto& day : plan.days) {
    for (const auto& journeys : day.trucks) {
      for (const auto& journey : journeys) {
        sum += journey.load();
      }
    }
  }
  return sum;
}

std::vector<Tons> delivered_by_order(const Plan& plan,
                                     std::size_t order_count) {
  std::vector<Tons> out(order_count, 0.0);
  for (const auto& day : plan.days) {
    for (const auto& journeys : day.trucks) {
      for (const auto& journey : journeys) {
        for (const auto& a : journey.loads) {
          if (a.order >= order_count) {
            throw StructuralError("assignment references an unknown order");
          }
          out[a.order] += a.tons;
        }
      }
    }
  }
  return out;
}

Objective objective_of(const Plan& plan, const Instance& instance) {
  return {total_delivered(plan), evaluate_cost(plan, instance).total_optimized};
}

std::weak_ordering compare(const Objective& a, const Objective& b) {
  const auto ga = std::llround(a.delivered / delivered_grid);
  const auto gb = std::llround(b.delivered / delivered_grid);
  if (ga != gb) {
    // More delivered sorts first.
    return ga > gb ? std::weak_ordering::less : std::weak_ordering::greater;
  }
  if (a.cost < b.cost) {
    return std::weak_ordering::less;
  }
  if (b.cost < a.cost) {
    return std::weak_ordering::greater;
  }
  return std::weak_ordering::equivalent;
}

double shortfall_penalty_bound(const Instance& instance) {
  Km max_km = 0;
  for (const auto& truck : instance.trucks) {
    max_km = std::max(max_km, truck.max_daily_km);
  }
  return instance.cost.unload_fee + instance.cost.max_rate() * max_km;
}

double shortfall_penalty(const Instance& instance) {
  return instance.shortfall_penalty.value_or(
    10.0 * shortfall_penalty_bound(instance));
}

double scalarize(const Objective& objective, const Instance& instance) {
  const Tons shortfall =
    std::max(0.0, instance.total_ordered() - objective.delivered);
  return shortfall_penalty(instance) * shortfall + objective.cost;
}

} // namespace hopper
