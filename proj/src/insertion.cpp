#include "hopper/insertion.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace hopper {

const char* to_string(SeedStrategy s) {
  switch (s) {
  case SeedStrategy::farthest:
    return "farthest";
  case SeedStrategy::most_pending_orders:
    return "most-pending-orders";
  case SeedStrategy::random:
    return "random";
  }
  return "unknown";
}

const char* to_string(TruckStrategy s) {
  switch (s) {
  case TruckStrategy::lowest_mileage:
    return "lowest-mileage";
  case TruckStrategy::highest_capacity:
    return "highest-capacity";
  case TruckStrategy::random:
    return "random";
  }
  return "unknown";
}

std::optional<SeedStrategy> parse_seed_strategy(std::string_view text) {
  for (auto s : {SeedStrategy::farthest,
                 SeedStrategy::most_pending_orders,
                 SeedStrategy::random}) {
    if (text == to_string(s)) {
      return s;
    }
  }
  return std::nullopt;
}

std::optional<TruckStrategy> parse_truck_strategy(std::string_view text) {
  for (auto s : {TruckStrategy::lowest_mileage,
                 TruckStrategy::highest_capacity,
                 TruckStrategy::random}) {
    if (text == to_string(s)) {
      return s;
    }
  }
  return std::nullopt;
}

std::optional<Km> insertion_cost(const Journey& journey,
                                 Index customer,
                                 std::size_t position,
                                 const Instance& instance) {
  if (position > journey.stops.size()) {
    throw std::out_of_range("insertion position past the end of the journey");
  }
  if (std::ranges::find(journey.stops, customer) != journey.stops.end()) {
    return std::nullopt;
  }
  const Index prev =
    position == 0 ? depot_node : node_of(journey.stops[position - 1]);
  const Index next = position == journey.stops.size()
                       ? depot_node
                       : node_of(journey.stops[position]);
  const Index c = node_of(customer);
  const auto& d = instance.distance;
  return d(prev, c) + d(c, next) - d(prev, next);
}

Tons LoadResult::loaded() const {
  Tons sum = 0;
  for (const auto& a : assignments) {
    sum += a.tons;
  }
  return sum;
}

LoadResult load_hoppers(std::span<const LoadPiece> pending,
                        const Truck& truck,
                        std::span<const Index> free_hoppers,
                        Tons capacity_left) {
  std::vector<LoadPiece> pieces(pending.begin(), pending.end());
  std::ranges::stable_sort(pieces, [](const LoadPiece& a, const LoadPiece& b) {
    return a.tons > b.tons;
  });

  // Largest capacity first; equal capacities keep index order.
  std::vector<Index> free(free_hoppers.begin(), free_hoppers.end());
  std::ranges::sort(free, [&](Index a, Index b) {
    const auto ca = truck.hoppers[a].capacity;
    const auto cb = truck.hoppers[b].capacity;
    return ca != cb ? ca > cb : a < b;
  });

  LoadResult result;
  for (const auto& piece : pieces) {
    Tons amount = std::min(piece.tons, std::max(0.0, capacity_left));
    result.leftover += piece.tons - amount;

    while (amount > tons_epsilon && !free.empty()) {
      // Smallest hopper that holds the whole amount, if any.
      auto fit = free.end();
      for (auto it = free.begin(); it != free.end(); ++it) {
        const Tons cap = truck.hoppers[*it].capacity;
        if (cap >= amount &&
            (fit == free.end() || cap < truck.hoppers[*fit].capacity)) {
          fit = it;
        }
      }
      if (fit != free.end()) {
        result.assignments.push_back({*fit, piece.order, amount});
        capacity_left -= amount;
        amount = 0;
        free.erase(fit);
      } else {
        const Index largest = free.front();
        const Tons cap = truck.hoppers[largest].capacity;
        result.assignments.push_back({largest, piece.order, cap});
        capacity_left -= cap;
        amount -= cap;
        free.erase(free.begin());
      }
    }
    if (amount > 0) {
      result.leftover += amount;
    }
  }
  return result;
}

LoadResult load_hoppers(std::span<const LoadPiece> pending, const Truck& truck) {
  std::vector<Index> all(truck.hoppers.size());
  std::iota(all.begin(), all.end(), Index{0});
  return load_hoppers(pending, truck, all, truck.max_load);
}

Index pick_seed_customer(std::span<const Index> candidates,
                         const Instance& instance,
                         std::span<const int> pending_orders,
                         SeedStrategy strategy,
                         Rng& rng) {
  if (candidates.empty()) {
    throw std::invalid_argument("no seed customer candidates");
  }
  std::vector<Index> sorted(candidates.begin(), candidates.end());
  std::ranges::sort(sorted);

  switch (strategy) {
  case SeedStrategy::random:
    return sorted[rng.index(sorted.size())];
  case SeedStrategy::farthest:
    return *std::ranges::max_element(sorted, [&](Index a, Index b) {
      // max_element keeps the first maximum, so ties resolve to lowest index.
      return instance.distance(depot_node, node_of(a)) <
             instance.distance(depot_node, node_of(b));
    });
  case SeedStrategy::most_pending_orders:
    return *std::ranges::max_element(sorted, [&](Index a, Index b) {
      return pending_orders[a] < pending_orders[b];
    });
  }
  return sorted.front();
}

Index pick_truck(std::span<const Index> candidates,
                 const Instance& instance,
                 std::span<const Km> mileage,
                 TruckStrategy strategy,
                 Rng& rng) {
  if (candidates.empty()) {
    throw std::invalid_argument("no truck candidates");
  }
  std::vector<Index> sorted(candidates.begin(), candidates.end());
  std::ranges::sort(sorted);

  switch (strategy) {
  case TruckStrategy::random:
    return sorted[rng.index(sorted.size())];
  case TruckStrategy::lowest_mileage:
    return *std::ranges::min_element(
      sorted, [&](Index a, Index b) { return mileage[a] < mileage[b]; });
  case TruckStrategy::highest_capacity:
    return *std::ranges::max_element(sorted, [&](Index a, Index b) {
      return instance.trucks[a].hopper_capacity() <
             instance.trucks[b].hopper_capacity();
    });
  }
  return sorted.front();
}

namespace {

class Builder {
public:
  Builder(const Instance& instance,
          const InsertionParams& params,
          const BuildObserver& observer)
    : instance_(instance),
      params_(params),
      observer_(observer),
      rng_(params.rng_seed),
      by_customer_(instance.orders_by_customer()),
      remaining_(instance.orders.size()),
      day_hours_(instance.trucks.size(), 0.0),
      day_km_(instance.trucks.size(), 0.0),
      mileage_(instance.trucks.size(), 0.0) {
    for (Index o = 0; o < instance.orders.size(); ++o) {
      remaining_[o] = instance.orders[o].quantity;
    }
  }

  BuildResult run() {
    BuildResult result;
    int day = 1;

    while (true) {
      if (!any_eligible(day)) {
        break;
      }
      const auto seeds = seed_candidates(day);
      if (seeds.empty()) {
        ++day;
        if (day > instance_.horizon_days) {
          result.report.horizon_reached = true;
          break;
        }
        std::ranges::fill(day_hours_, 0.0);
        std::ranges::fill(day_km_, 0.0);
        continue;
      }

      std::vector<int> pending(instance_.customers.size(), 0);
      for (const auto c : seeds) {
        pending[c] = pending_orders(c, day);
      }
      const Index seed = pick_seed_customer(seeds,
                                            instance_,
                                            pending,
                                            params_.seed_strategy,
                                            rng_);
      std::vector<Index> trucks;
      for (Index t = 0; t < instance_.trucks.size(); ++t) {
        if (can_open(t, seed)) {
          trucks.push_back(t);
        }
      }
      const Index truck =
        pick_truck(trucks, instance_, mileage_, params_.truck_strategy, rng_);

      Journey journey = build_journey(day, truck, seed);
      const Km km = journey_km(journey, instance_);
      day_km_[truck] += km;
      day_hours_[truck] += journey_hours(journey, instance_);
      mileage_[truck] += km;

      result.plan.ensure_days(static_cast<std::size_t>(day),
                              instance_.trucks.size());
      result.plan.days[day - 1].trucks[truck].push_back(std::move(journey));
    }

    result.plan.normalize();
    result.report = finish_report(std::move(result.report), result.plan);
    return result;
  }

private:
  bool eligible(Index o, int day) const {
    return remaining_[o] > tons_epsilon &&
           instance_.orders[o].deadline_day() >= day &&
           instance_.servable(instance_.orders[o].customer);
  }

  bool any_eligible(int day) const {
    for (Index o = 0; o < remaining_.size(); ++o) {
      if (eligible(o, day)) {
        return true;
      }
    }
    return false;
  }

  int pending_orders(Index customer, int day) const {
    int count = 0;
    for (const auto o : by_customer_[customer]) {
      count += eligible(o, day) ? 1 : 0;
    }
    return count;
  }

  bool fits_budget(Index truck, const Journey& journey) const {
    const auto& t = instance_.trucks[truck];
    return day_km_[truck] + journey_km(journey, instance_) <=
             t.max_daily_km + 1e-9 &&
           day_hours_[truck] + journey_hours(journey, instance_) <=
             t.max_daily_hours + 1e-9;
  }

  // A fresh journey depot -> customer -> depot is possible.
  bool can_open(Index truck, Index customer) const {
    if (!instance_.trucks[truck].reachable[customer]) {
      return false;
    }
    Journey probe;
    probe.stops = {customer};
    return fits_budget(truck, probe);
  }

  std::vector<Index> seed_candidates(int day) const {
    std::vector<Index> out;
    for (Index c = 0; c < instance_.customers.size(); ++c) {
      if (pending_orders(c, day) == 0) {
        continue;
      }
      for (Index t = 0; t < instance_.trucks.size(); ++t) {
        if (can_open(t, c)) {
          out.push_back(c);
          break;
        }
      }
    }
    return out;
  }

  // Loads the customer's eligible orders into the journey's free hoppers.
  void load_customer(Journey& journey,
                     Index truck,
                     Index customer,
                     int day,
                     std::vector<Index>& free,
                     Tons& capacity_left) {
    std::vector<LoadPiece> pieces;
    for (const auto o : by_customer_[customer]) {
      if (eligible(o, day)) {
        pieces.push_back({o, remaining_[o]});
      }
    }
    auto loaded =
      load_hoppers(pieces, instance_.trucks[truck], free, capacity_left);
    for (const auto& a : loaded.assignments) {
      remaining_[a.order] -= a.tons;
      if (remaining_[a.order] < tons_epsilon) {
        remaining_[a.order] = 0;
      }
      capacity_left -= a.tons;
      std::erase(free, a.hopper);
      journey.loads.push_back(a);
    }
  }

  void notify(int day, Index truck, const Journey& journey) const {
    if (!observer_) {
      return;
    }
    observer_({day,
               truck,
               &journey,
               day_hours_[truck] + journey_hours(journey, instance_),
               day_km_[truck] + journey_km(journey, instance_)});
  }

  Journey build_journey(int day, Index truck, Index seed) {
    const auto& t = instance_.trucks[truck];
    std::vector<Index> free(t.hoppers.size());
    std::iota(free.begin(), free.end(), Index{0});
    Tons capacity_left = t.max_load;

    Journey journey;
    journey.stops = {seed};
    load_customer(journey, truck, seed, day, free, capacity_left);
    notify(day, truck, journey);

    while (!free.empty() && capacity_left > tons_epsilon) {
      // (cost, customer, position), cheapest first.
      std::vector<std::tuple<Km, Index, std::size_t>> candidates;
      for (Index c = 0; c < instance_.customers.size(); ++c) {
        if (!t.reachable[c] || pending_orders(c, day) == 0) {
          continue;
        }
        for (std::size_t pos = 0; pos <= journey.stops.size(); ++pos) {
          if (auto cost = insertion_cost(journey, c, pos, instance_)) {
            candidates.emplace_back(*cost, c, pos);
          }
        }
      }
      std::ranges::sort(candidates);

      bool inserted = false;
      for (const auto& [cost, c, pos] : candidates) {
        Journey trial = journey;
        trial.stops.insert(trial.stops.begin() + static_cast<long>(pos), c);
        if (!fits_budget(truck, trial)) {
          continue;
        }
        journey = std::move(trial);
        load_customer(journey, truck, c, day, free, capacity_left);
        notify(day, truck, journey);
        inserted = true;
        break;
      }
      if (!inserted) {
        break;
      }
    }
    return journey;
  }

  BuildReport finish_report(BuildReport report, const Plan& plan) const {
    report.remaining = remaining_;
    report.days_used = static_cast<int>(plan.days.size());
    std::vector<Tons> day_one(instance_.orders.size(), 0.0);
    if (!plan.days.empty()) {
      Plan first;
      first.days = {plan.days.front()};
      day_one = delivered_by_order(first, instance_.orders.size());
    }
    for (Index o = 0; o < instance_.orders.size(); ++o) {
      const auto& order = instance_.orders[o];
      if (remaining_[o] > tons_epsilon) {
        report.unserved_orders.push_back(o);
      }
      if (!instance_.servable(order.customer)) {
        report.unservable_orders.push_back(o);
      }
      if (order.days_left == 0 && day_one[o] < order.quantity - 1e-9) {
        report.urgent_shortfall.push_back(o);
      }
    }
    return report;
  }

  const Instance& instance_;
  const InsertionParams& params_;
  const BuildObserver& observer_;
  Rng rng_;
  std::vector<std::vector<Index>> by_customer_;
  std::vector<Tons> remaining_;
  std::vector<Hours> day_hours_;
  std::vector<Km> day_km_;
  std::vector<Km> mileage_;
};

} // namespace

BuildResult build_initial(const Instance& instance,
                          const InsertionParams& params,
                          const BuildObserver& observer) {
  return Builder(instance, params, observer).run();
}

} // namespace hopper
