// Shared fixtures and independent reference computations for the tests.
// Nothing here calls the library's evaluators; the point is to recompute
// their answers a second way.

#ifndef HOPPER_TEST_SUPPORT_H
#define HOPPER_TEST_SUPPORT_H

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hopper/model.h"

namespace testing {

using namespace hopper;

// Upper triangle of the 6x6 golden distance table, depot first.
inline const std::vector<std::vector<double>> golden_upper = {
  {0, 28, 69, 64, 27, 17},
  {0, 67, 62, 20, 20},
  {0, 7, 74, 58},
  {0, 69, 53},
  {0, 25},
  {0},
};

inline Matrix mirror(const std::vector<std::vector<double>>& upper, double scale = 1) {
  const std::size_t n = upper.size();
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < upper[i].size(); ++k) {
      m(i, i + k) = upper[i][k] * scale;
      m(i + k, i) = upper[i][k] * scale;
    }
  }
  return m;
}

inline Truck golden_truck(const std::string& id, std::size_t customers) {
  Truck t;
  t.id = id;
  int k = 1;
  for (double cap : {3.0, 3.7, 3.8, 3.7, 3.0}) {
    t.hoppers.push_back({"h" + std::to_string(k++), cap});
  }
  t.max_load = 11.6;
  t.max_daily_hours = 9;
  t.max_daily_km = 150;
  t.reachable.assign(customers, true);
  return t;
}

// The two-truck, five-customer example, built by hand. Must match
// data/golden.json.
inline Instance golden_instance() {
  Instance inst;
  inst.feeds = {{"feed-1", "Feed 1"}};
  const double qty[] = {3.300, 2.951, 3.003, 3.016, 2.496};
  for (int c = 0; c < 5; ++c) {
    const auto n = std::to_string(c + 1);
    inst.customers.push_back({"s" + n, "Stockbreeder " + n, std::nullopt});
    inst.orders.push_back({"o" + n, static_cast<Index>(c), 0, qty[c], 0});
  }
  inst.trucks = {golden_truck("truck-1", 5), golden_truck("truck-2", 5)};
  inst.distance = mirror(golden_upper);
  // Travel time at 50 km/h, rounded to hundredths as in the data file.
  inst.travel_time = Matrix(6);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      inst.travel_time(i, j) = std::round(inst.distance(i, j) / 50.0 * 100) / 100;
    }
  }
  inst.service_time = 0.25;
  inst.cost.unload_fee = 10;
  inst.cost.per_ton_fixed = 2;
  inst.cost.rate_bands = {{60, 0.4}, {100, 0.15}, {infinite_km, 0.05}};
  inst.horizon_days = 30;
  return inst;
}

// The reference solution with its loads as given (customers 1-based in the
// text, 0-based here).
inline Plan golden_reference_plan() {
  Plan plan;
  plan.days.resize(1);
  plan.days[0].trucks.resize(2);
  Journey a;
  a.stops = {4, 2, 1};
  a.loads = {{0, 1, 1.475499},
             {1, 4, 2.496},
             {2, 2, 1.5505862},
             {3, 2, 1.4524165},
             {4, 1, 1.475499}};
  Journey b;
  b.stops = {3, 0};
  b.loads = {{0, 3, 1.508001}, {2, 0, 3.2999998}, {4, 3, 1.508001}};
  plan.days[0].trucks[0] = {a};
  plan.days[0].trucks[1] = {b};
  return plan;
}

// Sum of a journey's legs including both depot legs.
inline double tour_length(const std::vector<Index>& stops, const Matrix& d) {
  double km = 0;
  std::size_t prev = 0;
  for (auto s : stops) {
    km += d(prev, s + 1);
    prev = s + 1;
  }
  return km + d(prev, 0);
}

// Shortest closed tour through `customers` by trying every ordering.
inline double brute_force_tsp(std::vector<Index> customers, const Matrix& d) {
  if (customers.empty()) {
    return 0;
  }
  std::sort(customers.begin(), customers.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, tour_length(customers, d));
  } while (std::next_permutation(customers.begin(), customers.end()));
  return best;
}

struct ReferenceCost {
  double unloading = 0;
  double variable = 0;
  double fixed = 0;
};

// Cost recomputed from first principles: fee per stop, the band rate of the
// whole journey times its length and load, and a per-ton constant.
inline ReferenceCost reference_cost(const Plan& plan, const Instance& inst) {
  ReferenceCost out;
  for (const auto& day : plan.days) {
    for (const auto& journeys : day.trucks) {
      for (const auto& j : journeys) {
        double load = 0;
        for (const auto& a : j.loads) {
          load += a.tons;
        }
        const double km = tour_length(j.stops, inst.distance);
        double rate = 0;
        for (const auto& band : inst.cost.rate_bands) {
          if (km <= band.upper_km) {
            rate = band.rate;
            break;
          }
        }
        out.unloading += inst.cost.unload_fee * static_cast<double>(j.stops.size());
        out.variable += rate * km * load;
        out.fixed += inst.cost.per_ton_fixed * load;
      }
    }
  }
  return out;
}

struct RandomSpec {
  std::size_t customers = 5;
  std::size_t trucks = 2;
  std::size_t max_orders_per_customer = 1;
  int max_days_left = 0;
  double reach_probability = 1.0;
  std::size_t bands = 2;
  double min_quantity = 0.5;
  double max_quantity = 3.5;
  double max_daily_km = 400;
  double max_daily_hours = 9;
};

// Random instance over Euclidean points (metric, symmetric) with integer
// kilometre distances rounded up, which keeps the triangle inequality.
inline Instance random_instance(std::mt19937_64& gen, const RandomSpec& spec) {
  std::uniform_real_distribution<double> coord(-40, 40);
  std::uniform_real_distribution<double> unit(0, 1);
  Instance inst;
  inst.feeds = {{"f1", ""}, {"f2", ""}};
  std::vector<std::pair<double, double>> pts{{0, 0}};
  for (std::size_t c = 0; c < spec.customers; ++c) {
    inst.customers.push_back({"c" + std::to_string(c), "", std::nullopt});
    pts.emplace_back(coord(gen), coord(gen));
  }
  const std::size_t n = pts.size();
  inst.distance = Matrix(n);
  inst.travel_time = Matrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::hypot(pts[i].first - pts[j].first,
                                  pts[i].second - pts[j].second);
      inst.distance(i, j) = i == j ? 0 : std::ceil(e);
      inst.travel_time(i, j) = inst.distance(i, j) / 60.0;
    }
  }
  std::uniform_real_distribution<double> qty(spec.min_quantity, spec.max_quantity);
  for (std::size_t c = 0; c < spec.customers; ++c) {
    const auto count = 1 + gen() % spec.max_orders_per_customer;
    for (std::size_t k = 0; k < count; ++k) {
      Order o;
      o.id = "o" + std::to_string(inst.orders.size());
      o.customer = c;
      o.feed = k % 2;
      o.quantity = std::round(qty(gen) * 1000) / 1000;
      o.days_left = spec.max_days_left == 0
                      ? 0
                      : static_cast<int>(gen() % (spec.max_days_left + 1));
      inst.orders.push_back(o);
    }
  }
  std::uniform_real_distribution<double> cap(1.5, 4.5);
  for (std::size_t t = 0; t < spec.trucks; ++t) {
    Truck truck;
    truck.id = "t" + std::to_string(t);
    const auto hoppers = 3 + gen() % 3;
    double volume = 0;
    for (std::size_t h = 0; h < hoppers; ++h) {
      const double c = std::round(cap(gen) * 10) / 10;
      truck.hoppers.push_back({"h" + std::to_string(h), c});
      volume += c;
    }
    truck.max_load = std::round(volume * (0.7 + 0.3 * unit(gen)) * 10) / 10;
    truck.max_daily_hours = spec.max_daily_hours;
    truck.max_daily_km = spec.max_daily_km;
    truck.reachable.assign(spec.customers, true);
    for (std::size_t c = 0; c < spec.customers; ++c) {
      truck.reachable[c] = unit(gen) < spec.reach_probability;
    }
    inst.trucks.push_back(truck);
  }
  inst.service_time = 0.2;
  inst.cost.unload_fee = 5;
  inst.cost.per_ton_fixed = 1.5;
  double upper = 30;
  double rate = 0.3;
  for (std::size_t b = 0; b + 1 < spec.bands; ++b) {
    inst.cost.rate_bands.push_back({upper, rate});
    upper += 40 + 40 * unit(gen);
    rate *= 0.7;
  }
  inst.cost.rate_bands.push_back({infinite_km, rate});
  inst.horizon_days = 10;
  return inst;
}

// Structurally valid plan with arbitrary, usually infeasible, contents.
inline Plan random_plan(std::mt19937_64& gen, const Instance& inst) {
  std::uniform_real_distribution<double> unit(0, 1);
  const auto by_customer = inst.orders_by_customer();
  Plan plan;
  plan.days.resize(1 + gen() % 3);
  for (auto& day : plan.days) {
    day.trucks.resize(inst.trucks.size());
    for (Index t = 0; t < inst.trucks.size(); ++t) {
      const auto journeys = gen() % 3;
      for (std::size_t k = 0; k < journeys; ++k) {
        Journey j;
        std::vector<Index> customers(inst.customers.size());
        std::iota(customers.begin(), customers.end(), Index{0});
        std::shuffle(customers.begin(), customers.end(), gen);
        customers.resize(1 + gen() % customers.size());
        j.stops = customers;
        const auto& truck = inst.trucks[t];
        for (Index h = 0; h < truck.hoppers.size(); ++h) {
          if (unit(gen) < 0.3) {
            continue;
          }
          const auto c = customers[gen() % customers.size()];
          if (by_customer[c].empty()) {
            continue;
          }
          const auto o = by_customer[c][gen() % by_customer[c].size()];
          j.loads.push_back({h, o, 0.01 + unit(gen) * truck.hoppers[h].capacity});
        }
        day.trucks[t].push_back(j);
      }
    }
  }
  return plan;
}

} // namespace testing

#endif
