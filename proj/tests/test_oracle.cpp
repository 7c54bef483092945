#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <map>
#include <random>
#include <set>

#include "hopper/insertion.h"
#include "hopper/oracle.h"
#include "support.h"

using namespace hopper;
using testing::golden_instance;

namespace {

OracleLimits limits() {
  return {};
}

// Customer sets of every journey, each as a rotation-free canonical tour
// (reversal allowed since distances are symmetric).
std::set<std::vector<Index>> tours_of(const Plan& plan) {
  std::set<std::vector<Index>> out;
  for (const auto& d : plan.days) {
    for (const auto& t : d.trucks) {
      for (const auto& j : t) {
        auto fwd = j.stops;
        auto back = std::vector<Index>(fwd.rbegin(), fwd.rend());
        out.insert(std::min(fwd, back));
      }
    }
  }
  return out;
}

// Can `truck` carry every order of `customers` in full in one journey? Tries
// every hopper-to-order map.
bool packable(const Instance& inst, const Truck& truck, const std::vector<Index>& customers) {
  std::vector<Index> orders;
  double total = 0;
  for (Index o = 0; o < inst.orders.size(); ++o) {
    if (std::find(customers.begin(), customers.end(), inst.orders[o].customer) !=
        customers.end()) {
      orders.push_back(o);
      total += inst.orders[o].quantity;
    }
  }
  if (total > truck.max_load + 1e-9) {
    return false;
  }
  const std::size_t h = truck.hoppers.size();
  const std::size_t base = orders.size() + 1;
  std::size_t combos = 1;
  for (std::size_t i = 0; i < h; ++i) {
    combos *= base;
  }
  for (std::size_t code = 0; code < combos; ++code) {
    std::vector<double> room(orders.size(), 0);
    auto c = code;
    for (std::size_t i = 0; i < h; ++i) {
      const auto pick = c % base;
      c /= base;
      if (pick > 0) {
        room[pick - 1] += truck.hoppers[i].capacity;
      }
    }
    bool ok = true;
    for (std::size_t k = 0; k < orders.size() && ok; ++k) {
      ok = room[k] + 1e-9 >= inst.orders[orders[k]].quantity;
    }
    if (ok) {
      return true;
    }
  }
  return false;
}

struct Brute {
  double km = std::numeric_limits<double>::infinity();
  double cost = std::numeric_limits<double>::infinity();
};

double rate_of(const Instance& inst, double km) {
  for (const auto& b : inst.cost.rate_bands) {
    if (km <= b.upper_km) {
      return b.rate;
    }
  }
  return 0;
}

double tour_hours(const std::vector<Index>& stops, const Instance& inst) {
  return testing::tour_length(stops, inst.travel_time) +
         inst.service_time * static_cast<double>(stops.size());
}

double block_load(const Instance& inst, const std::vector<Index>& customers) {
  double load = 0;
  for (const auto& o : inst.orders) {
    if (std::find(customers.begin(), customers.end(), o.customer) != customers.end()) {
      load += o.quantity;
    }
  }
  return load;
}

// Minimum km and minimum cost over every complete single-day plan: set
// partitions of the customers, a truck per block, and every visiting order
// of every block.
Brute brute_force(const Instance& inst) {
  const std::size_t n = inst.customers.size();
  Brute best;
  std::vector<std::size_t> label(n, 0);
  // Restricted growth strings enumerate set partitions.
  std::function<void(std::size_t, std::size_t)> partitions = [&](std::size_t i, std::size_t blocks) {
    if (i < n) {
      for (std::size_t b = 0; b <= blocks; ++b) {
        label[i] = b;
        partitions(i + 1, std::max(blocks, b + 1));
      }
      return;
    }
    std::vector<std::vector<Index>> part(blocks);
    for (Index c = 0; c < n; ++c) {
      part[label[c]].push_back(c);
    }
    std::vector<std::size_t> truck_of(blocks, 0);
    std::function<void(std::size_t)> assign = [&](std::size_t b) {
      if (b < blocks) {
        for (std::size_t t = 0; t < inst.trucks.size(); ++t) {
          const auto& truck = inst.trucks[t];
          bool ok = packable(inst, truck, part[b]);
          for (auto c : part[b]) {
            ok = ok && truck.reachable[c];
          }
          if (ok) {
            truck_of[b] = t;
            assign(b + 1);
          }
        }
        return;
      }
      // Per truck, try every combination of tour orders of its blocks.
      double km_total = 0;
      double cost_total = 0;
      for (std::size_t t = 0; t < inst.trucks.size(); ++t) {
        std::vector<std::vector<Index>> mine;
        for (std::size_t k = 0; k < blocks; ++k) {
          if (truck_of[k] == t) {
            mine.push_back(part[k]);
            std::sort(mine.back().begin(), mine.back().end());
          }
        }
        double best_km = std::numeric_limits<double>::infinity();
        double best_cost = std::numeric_limits<double>::infinity();
        std::function<void(std::size_t, double, double, double)> orders =
          [&](std::size_t k, double km, double hours, double cost) {
            if (k == mine.size()) {
              if (km <= inst.trucks[t].max_daily_km + 1e-9 &&
                  hours <= inst.trucks[t].max_daily_hours + 1e-9) {
                best_km = std::min(best_km, km);
                best_cost = std::min(best_cost, cost);
              }
              return;
            }
            auto perm = mine[k];
            const double load = block_load(inst, perm);
            do {
              const double d = testing::tour_length(perm, inst.distance);
              orders(k + 1,
                     km + d,
                     hours + tour_hours(perm, inst),
                     cost + inst.cost.unload_fee * static_cast<double>(perm.size()) +
                       rate_of(inst, d) * d * load);
            } while (std::next_permutation(perm.begin(), perm.end()));
          };
        orders(0, 0, 0, 0);
        if (!std::isfinite(best_km)) {
          return;
        }
        km_total += best_km;
        cost_total += best_cost;
      }
      best.km = std::min(best.km, km_total);
      best.cost = std::min(best.cost, cost_total);
    };
    assign(0);
  };
  partitions(0, 0);
  return best;
}

} // namespace

TEST_CASE("golden instance: 221 km with the reference tours") {
  const auto inst = golden_instance();
  const auto start = std::chrono::steady_clock::now();
  const auto r = solve_exact(inst, limits(), OracleMode::min_distance);
  const double seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  REQUIRE(r);
  CHECK(r->total_km == 221);
  CHECK(plan_km(r->plan, inst) == 221);
  CHECK(seconds < 5);
  const std::set<std::vector<Index>> expected{{1, 2, 4}, {0, 3}};
  CHECK(tours_of(r->plan) == expected);
  FeasibilityOptions strict;
  strict.require_complete = true;
  CHECK(check_feasibility(r->plan, inst, strict).empty());
}

TEST_CASE("golden instance: lexicographic optimum is the same plan") {
  const auto inst = golden_instance();
  const auto r = solve_exact(inst, limits(), OracleMode::lexicographic);
  REQUIRE(r);
  CHECK(r->objective.delivered == doctest::Approx(inst.total_ordered()));
  CHECK(r->total_km == 221);
  CHECK(r->objective.cost == doctest::Approx(182.74));
  // 50 in fees, 0.05 * 146 * 8.45 + 0.15 * 75 * 6.316.
  CHECK(r->objective.cost ==
        doctest::Approx(50 + 0.05 * 146 * 8.45 + 0.15 * 75 * 6.316));
  CHECK(r->objective.cost == doctest::Approx(brute_force(inst).cost));
}

TEST_CASE("single customer is an out-and-back trip") {
  auto inst = golden_instance();
  inst.customers.resize(1);
  inst.orders.resize(1);
  for (auto& t : inst.trucks) {
    t.reachable.resize(1);
  }
  Matrix d(2);
  d(0, 1) = d(1, 0) = 28;
  inst.distance = d;
  Matrix tt(2);
  tt(0, 1) = tt(1, 0) = 0.56;
  inst.travel_time = tt;
  const auto r = solve_exact(inst, limits(), OracleMode::min_distance);
  REQUIRE(r);
  CHECK(r->total_km == 56);
}

TEST_CASE("one truck with unlimited budgets reduces to the travelling salesman") {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 20; ++i) {
    testing::RandomSpec spec;
    spec.customers = 2 + gen() % 5;
    spec.trucks = 1;
    spec.max_quantity = 1;
    spec.min_quantity = 0.3;
    auto inst = testing::random_instance(gen, spec);
    auto& t = inst.trucks[0];
    t.hoppers.assign(spec.customers, {"h", 1.0});
    for (std::size_t h = 0; h < t.hoppers.size(); ++h) {
      t.hoppers[h].id = "h" + std::to_string(h);
    }
    t.max_load = 100;
    t.max_daily_km = infinite_km;
    t.max_daily_hours = 1000;
    t.reachable.assign(spec.customers, true);
    std::vector<Index> all(spec.customers);
    std::iota(all.begin(), all.end(), Index{0});
    const auto r = solve_exact(inst, limits(), OracleMode::min_distance);
    REQUIRE(r);
    CHECK(r->total_km == doctest::Approx(testing::brute_force_tsp(all, inst.distance)));
  }
}

TEST_CASE("matches an independent enumeration on tiny instances") {
  std::mt19937_64 gen(2024);
  int solved = 0;
  int unsolvable = 0;
  for (int i = 0; i < 60; ++i) {
    testing::RandomSpec spec;
    spec.customers = 1 + gen() % 4;
    spec.trucks = 1 + gen() % 2;
    spec.max_orders_per_customer = 1 + gen() % 2;
    spec.reach_probability = 0.85;
    spec.bands = 1 + gen() % 3;
    spec.max_daily_km = 120 + static_cast<double>(gen() % 150);
    spec.max_daily_hours = 4 + static_cast<double>(gen() % 5);
    const auto inst = testing::random_instance(gen, spec);
    const auto expected = brute_force(inst);
    const auto r = solve_exact(inst, limits(), OracleMode::min_distance);
    if (!std::isfinite(expected.km)) {
      CHECK_FALSE(r);
      ++unsolvable;
      continue;
    }
    REQUIRE(r);
    ++solved;
    CHECK(r->total_km == doctest::Approx(expected.km));
    FeasibilityOptions strict;
    strict.require_complete = true;
    CHECK(check_feasibility(r->plan, inst, strict).empty());

    const auto lex = solve_exact(inst, limits(), OracleMode::lexicographic);
    REQUIRE(lex);
    CHECK(lex->objective.delivered == doctest::Approx(inst.total_ordered()));
    CHECK(lex->objective.cost == doctest::Approx(expected.cost));
    CHECK(lex->objective == objective_of(lex->plan, inst));
    CHECK(check_feasibility(lex->plan, inst).empty());
  }
  CHECK(solved > 20);
  CHECK(unsolvable > 0);
}

TEST_CASE("relabelling customers does not change the optimum") {
  std::mt19937_64 gen(31);
  for (int i = 0; i < 10; ++i) {
    testing::RandomSpec spec;
    spec.customers = 4 + gen() % 2;
    spec.trucks = 2;
    const auto inst = testing::random_instance(gen, spec);
    std::vector<Index> perm(spec.customers);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), gen);
    // Customer c of the copy is customer perm[c] of the original.
    auto copy = inst;
    const auto n = spec.customers + 1;
    for (Index c = 0; c < spec.customers; ++c) {
      copy.customers[c] = inst.customers[perm[c]];
      for (auto& t : copy.trucks) {
        t.reachable[c] = inst.trucks[&t - copy.trucks.data()].reachable[perm[c]];
      }
    }
    auto node = [&](Index i) { return i == 0 ? 0 : perm[i - 1] + 1; };
    for (Index a = 0; a < n; ++a) {
      for (Index b = 0; b < n; ++b) {
        copy.distance(a, b) = inst.distance(node(a), node(b));
        copy.travel_time(a, b) = inst.travel_time(node(a), node(b));
      }
    }
    std::vector<Index> inverse(spec.customers);
    for (Index c = 0; c < spec.customers; ++c) {
      inverse[perm[c]] = c;
    }
    for (auto& o : copy.orders) {
      o.customer = inverse[o.customer];
    }
    const auto a = solve_exact(inst, limits(), OracleMode::lexicographic);
    const auto b = solve_exact(copy, limits(), OracleMode::lexicographic);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->objective.delivered == doctest::Approx(b->objective.delivered));
    CHECK(a->objective.cost == doctest::Approx(b->objective.cost));
  }
}

TEST_CASE("never worse than constructive insertion when splitting cannot pay") {
  std::mt19937_64 gen(8);
  for (int i = 0; i < 25; ++i) {
    testing::RandomSpec spec;
    spec.customers = 2 + gen() % 5;
    spec.trucks = 2;
    spec.bands = 1;
    spec.max_quantity = 3;
    auto inst = testing::random_instance(gen, spec);
    inst.cost.unload_fee = 1000;
    const auto exact = solve_exact(inst, limits(), OracleMode::lexicographic);
    REQUIRE(exact);
    InsertionParams ip;
    ip.rng_seed = gen();
    const auto built = build_initial(inst, ip).plan;
    CHECK_FALSE(better(objective_of(built, inst), exact->objective));
  }
}

TEST_CASE("limits") {
  std::mt19937_64 gen(1);
  testing::RandomSpec spec;
  spec.customers = 20;
  const auto big = testing::random_instance(gen, spec);
  CHECK_THROWS_AS(solve_exact(big, limits(), OracleMode::min_distance), LimitExceeded);

  spec.customers = 3;
  spec.trucks = 4;
  const auto fleet = testing::random_instance(gen, spec);
  CHECK_THROWS_AS(solve_exact(fleet, limits(), OracleMode::min_distance), LimitExceeded);

  spec.trucks = 1;
  spec.max_days_left = 3;
  auto later = testing::random_instance(gen, spec);
  for (auto& o : later.orders) {
    o.days_left = 2;
  }
  CHECK_THROWS_AS(solve_exact(later, limits(), OracleMode::min_distance), LimitExceeded);
  OracleLimits relaxed;
  relaxed.single_day_only = false;
  CHECK_THROWS_AS(solve_exact(later, relaxed, OracleMode::min_distance), LimitExceeded);
}

TEST_CASE("mode names") {
  CHECK(parse_oracle_mode("min-distance") == OracleMode::min_distance);
  CHECK(parse_oracle_mode(to_string(OracleMode::lexicographic)) == OracleMode::lexicographic);
  CHECK_FALSE(parse_oracle_mode("fastest"));
}
