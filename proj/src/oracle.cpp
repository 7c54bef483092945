#include "hopper/oracle.h"

#include <algorithm>
#include <bit>
#include <fmt/format.h>
#include <numeric>

namespace hopper {

const char* to_string(OracleMode mode) {
  switch (mode) {
  case OracleMode::min_distance:
    return "min-distance";
  case OracleMode::lexicographic:
    return "lexicographic";
  }
  return "unknown";
}

std::optional<OracleMode> parse_oracle_mode(std::string_view text) {
  for (auto m : {OracleMode::min_distance, OracleMode::lexicographic}) {
    if (text == to_string(m)) {
      return m;
    }
  }
  return std::nullopt;
}

namespace {

using Mask = std::uint32_t;

struct Tour {
  std::vector<Index> stops;
  Km km = 0;
  Hours hours = 0;
  // rate(km) * km: the per-ton variable cost of the tour.
  double per_ton = 0;
};

struct Packing {
  bool ok = false;
  Tons delivered = 0;
  // Order index carried by each hopper, or -1.
  std::vector<long> hopper_order;
};

struct Choice {
  Mask mask = 0;
  Index truck = 0;
  std::size_t tour = 0;
};

class Solver {
public:
  Solver(const Instance& instance, OracleMode mode)
    : instance_(instance), mode_(mode), by_customer_(instance.orders_by_customer()) {
    for (Index c = 0; c < instance.customers.size(); ++c) {
      if (!by_customer_[c].empty()) {
        active_.push_back(c);
      }
    }
    const Mask full = (Mask{1} << active_.size());
    tours_.resize(full);
    packing_.assign(full, std::vector<Packing>(instance.trucks.size()));
    symmetric_ = instance.distance.symmetric() && instance.travel_time.symmetric();
    for (Mask m = 1; m < full; ++m) {
      build_tours(m);
      for (Index t = 0; t < instance.trucks.size(); ++t) {
        packing_[m][t] = pack(m, t);
      }
    }
  }

  std::optional<OracleResult> solve() {
    truck_km_.assign(instance_.trucks.size(), 0.0);
    truck_hours_.assign(instance_.trucks.size(), 0.0);
    partition(0, 0);
    if (!found_) {
      return std::nullopt;
    }
    OracleResult result;
    result.plan = materialize();
    result.total_km = plan_km(result.plan, instance_);
    result.objective = objective_of(result.plan, instance_);
    result.explored = explored_;
    return result;
  }

private:
  std::vector<Index> members(Mask m) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      if (m & (Mask{1} << i)) {
        out.push_back(active_[i]);
      }
    }
    return out;
  }

  void build_tours(Mask m) {
    auto perm = members(m);
    std::vector<Tour> all;
    do {
      if (symmetric_ && perm.size() >= 2 && perm.front() > perm.back()) {
        continue;
      }
      Journey j;
      j.stops = perm;
      Tour tour{perm, journey_km(j, instance_), journey_hours(j, instance_), 0};
      tour.per_ton = instance_.cost.rate_for(tour.km) * tour.km;
      all.push_back(std::move(tour));
    } while (std::next_permutation(perm.begin(), perm.end()));

    // Keep tours not dominated on (per-ton cost, km, hours).
    auto dominates = [](const Tour& a, const Tour& b) {
      return a.per_ton <= b.per_ton && a.km <= b.km && a.hours <= b.hours &&
             (a.per_ton < b.per_ton || a.km < b.km || a.hours < b.hours);
    };
    for (std::size_t i = 0; i < all.size(); ++i) {
      bool dominated = false;
      for (std::size_t k = 0; k < all.size() && !dominated; ++k) {
        dominated = k != i && dominates(all[k], all[i]);
      }
      // Drop exact duplicates after the first.
      for (std::size_t k = 0; k < i && !dominated; ++k) {
        dominated = all[k].per_ton == all[i].per_ton && all[k].km == all[i].km &&
                    all[k].hours == all[i].hours;
      }
      if (!dominated) {
        tours_[m].push_back(all[i]);
      }
    }
  }

  Packing pack(Mask m, Index t) const {
    const auto& truck = instance_.trucks[t];
    const auto customers = members(m);
    std::vector<Index> orders;
    for (const auto c : customers) {
      if (!truck.reachable[c]) {
        return {};
      }
      orders.insert(orders.end(), by_customer_[c].begin(), by_customer_[c].end());
    }
    if (mode_ == OracleMode::min_distance) {
      Tons sum = 0;
      for (const auto o : orders) {
        sum += instance_.orders[o].quantity;
      }
      if (sum > truck.max_load + 1e-9 || orders.size() > truck.hoppers.size()) {
        return {};
      }
    } else if (customers.size() > truck.hoppers.size()) {
      return {};
    }

    const std::size_t h = truck.hoppers.size();
    std::vector<long> assign(h, -1);
    Packing best;
    best.delivered = -1;

    // Every hopper carries one of the orders or nothing.
    auto leaf = [&] {
      std::vector<Tons> cap(orders.size(), 0.0);
      for (std::size_t k = 0; k < h; ++k) {
        if (assign[k] >= 0) {
          cap[static_cast<std::size_t>(assign[k])] += truck.hoppers[k].capacity;
        }
      }
      if (mode_ == OracleMode::min_distance) {
        for (std::size_t i = 0; i < orders.size(); ++i) {
          if (cap[i] < instance_.orders[orders[i]].quantity - 1e-12) {
            return;
          }
        }
        Tons sum = 0;
        for (const auto o : orders) {
          sum += instance_.orders[o].quantity;
        }
        best = {true, sum, {}};
      } else {
        Tons value = 0;
        std::vector<bool> covered(instance_.customers.size(), false);
        for (std::size_t i = 0; i < orders.size(); ++i) {
          const auto& order = instance_.orders[orders[i]];
          value += std::min(order.quantity, cap[i]);
          if (cap[i] > 0) {
            covered[order.customer] = true;
          }
        }
        for (const auto c : customers) {
          if (!covered[c]) {
            return;
          }
        }
        value = std::min(value, truck.max_load);
        if (value <= best.delivered) {
          return;
        }
        best = {true, value, {}};
      }
      best.hopper_order.resize(h);
      for (std::size_t k = 0; k < h; ++k) {
        best.hopper_order[k] =
          assign[k] >= 0 ? static_cast<long>(orders[static_cast<std::size_t>(assign[k])])
                         : -1;
      }
    };

    auto dfs = [&](auto&& self, std::size_t k) -> void {
      if (mode_ == OracleMode::min_distance && best.ok) {
        return;
      }
      if (k == h) {
        leaf();
        return;
      }
      for (long o = -1; o < static_cast<long>(orders.size()); ++o) {
        assign[k] = o;
        self(self, k + 1);
      }
      assign[k] = -1;
    };
    dfs(dfs, 0);
    if (!best.ok) {
      return {};
    }
    return best;
  }

  void partition(std::size_t i, Mask visited) {
    if (i == active_.size()) {
      if (mode_ == OracleMode::min_distance &&
          visited != (Mask{1} << active_.size()) - 1) {
        return;
      }
      assign_blocks(0, 0.0, 0.0, 0.0);
      return;
    }
    const Mask bit = Mask{1} << i;
    if (mode_ == OracleMode::lexicographic) {
      partition(i + 1, visited);
    }
    // Indexed: deeper levels push onto blocks_ and may reallocate it.
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      blocks_[b] |= bit;
      partition(i + 1, visited | bit);
      blocks_[b] &= ~bit;
    }
    blocks_.push_back(bit);
    partition(i + 1, visited | bit);
    blocks_.pop_back();
  }

  void assign_blocks(std::size_t b, Km km, Tons delivered, Euros variable) {
    if (mode_ == OracleMode::min_distance && found_ && km >= best_km_) {
      return;
    }
    if (b == blocks_.size()) {
      evaluate(km, delivered, variable);
      return;
    }
    const Mask m = blocks_[b];
    for (Index t = 0; t < instance_.trucks.size(); ++t) {
      const auto& p = packing_[m][t];
      if (!p.ok) {
        continue;
      }
      const auto& truck = instance_.trucks[t];
      for (std::size_t k = 0; k < tours_[m].size(); ++k) {
        const auto& tour = tours_[m][k];
        if (truck_km_[t] + tour.km > truck.max_daily_km + 1e-9 ||
            truck_hours_[t] + tour.hours > truck.max_daily_hours + 1e-9) {
          continue;
        }
        truck_km_[t] += tour.km;
        truck_hours_[t] += tour.hours;
        choice_.push_back({m, t, k});
        assign_blocks(b + 1,
                      km + tour.km,
                      delivered + p.delivered,
                      variable + tour.per_ton * p.delivered);
        choice_.pop_back();
        truck_km_[t] -= tour.km;
        truck_hours_[t] -= tour.hours;
      }
    }
  }

  void evaluate(Km km, Tons delivered, Euros variable) {
    ++explored_;
    std::size_t stops = 0;
    for (const auto& c : choice_) {
      stops += static_cast<std::size_t>(std::popcount(c.mask));
    }
    const Objective objective{
      delivered,
      instance_.cost.unload_fee * static_cast<double>(stops) + variable};
    bool take = !found_;
    if (found_) {
      take = mode_ == OracleMode::min_distance
               ? km < best_km_
               : better(objective, best_objective_);
    }
    if (take) {
      found_ = true;
      best_km_ = km;
      best_objective_ = objective;
      best_choice_ = choice_;
    }
  }

  Plan materialize() const {
    Plan plan;
    if (best_choice_.empty()) {
      return plan;
    }
    plan.ensure_days(1, instance_.trucks.size());
    for (const auto& c : best_choice_) {
      const auto& truck = instance_.trucks[c.truck];
      const auto& p = packing_[c.mask][c.truck];
      Journey journey;
      journey.stops = tours_[c.mask][c.tour].stops;

      // Per-order amounts, scaled down together if they exceed max_load.
      std::vector<Index> orders;
      for (const auto o : p.hopper_order) {
        if (o >= 0 && std::ranges::find(orders, static_cast<Index>(o)) == orders.end()) {
          orders.push_back(static_cast<Index>(o));
        }
      }
      std::vector<Tons> amount(orders.size());
      Tons total = 0;
      for (std::size_t i = 0; i < orders.size(); ++i) {
        Tons cap = 0;
        for (std::size_t k = 0; k < p.hopper_order.size(); ++k) {
          if (p.hopper_order[k] == static_cast<long>(orders[i])) {
            cap += truck.hoppers[k].capacity;
          }
        }
        amount[i] = std::min(instance_.orders[orders[i]].quantity, cap);
        total += amount[i];
      }
      const double scale = total > truck.max_load ? truck.max_load / total : 1.0;

      for (std::size_t i = 0; i < orders.size(); ++i) {
        std::vector<Index> hoppers;
        for (std::size_t k = 0; k < p.hopper_order.size(); ++k) {
          if (p.hopper_order[k] == static_cast<long>(orders[i])) {
            hoppers.push_back(k);
          }
        }
        std::ranges::sort(hoppers, [&](Index a, Index b) {
          return truck.hoppers[a].capacity > truck.hoppers[b].capacity;
        });
        Tons left = amount[i] * scale;
        for (const auto k : hoppers) {
          if (left <= 0) {
            break;
          }
          const Tons put = std::min(left, truck.hoppers[k].capacity);
          journey.loads.push_back({k, orders[i], put});
          left -= put;
        }
      }
      plan.days[0].trucks[c.truck].push_back(std::move(journey));
    }
    plan.normalize();
    return plan;
  }

  const Instance& instance_;
  OracleMode mode_;
  std::vector<std::vector<Index>> by_customer_;
  std::vector<Index> active_;
  bool symmetric_ = false;
  std::vector<std::vector<Tour>> tours_;
  std::vector<std::vector<Packing>> packing_;

  std::vector<Mask> blocks_;
  std::vector<Choice> choice_;
  std::vector<Km> truck_km_;
  std::vector<Hours> truck_hours_;

  bool found_ = false;
  Km best_km_ = 0;
  Objective best_objective_;
  std::vector<Choice> best_choice_;
  std::uint64_t explored_ = 0;
};

} // namespace

std::optional<OracleResult> solve_exact(const Instance& instance,
                                        const OracleLimits& limits,
                                        OracleMode mode) {
  if (instance.customers.size() > limits.max_customers) {
    throw LimitExceeded(fmt::format("{} customers exceed the oracle limit of {}",
                                    instance.customers.size(),
                                    limits.max_customers));
  }
  if (instance.trucks.size() > limits.max_trucks) {
    throw LimitExceeded(fmt::format("{} trucks exceed the oracle limit of {}",
                                    instance.trucks.size(),
                                    limits.max_trucks));
  }
  if (!limits.single_day_only) {
    throw LimitExceeded("the oracle only enumerates single-day plans");
  }
  for (const auto& order : instance.orders) {
    if (order.days_left != 0) {
      throw LimitExceeded(fmt::format(
        "order '{}' is not urgent; the oracle plans a single day", order.id));
    }
  }
  return Solver(instance, mode).solve();
}

} // namespace hopper
