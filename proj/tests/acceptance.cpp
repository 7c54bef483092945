// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fmt/format.h>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "hopper/annealing.h"
#include "hopper/insertion.h"
#include "hopper/io.h"
#include "hopper/oracle.h"
#include "support.h"

using namespace hopper;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double golden_km = 221;
constexpr double km_tolerance = 1e-9;
constexpr double oracle_seconds = 5;
constexpr std::uint64_t heuristic_iterations = 100000;
constexpr int heuristic_seeds = 10;
constexpr int heuristic_required_hits = 8;
constexpr double heuristic_seconds = 60;
constexpr int dominance_instances = 50;
constexpr double dominance_seconds = 300;
constexpr int fuzz_plans = 20;
constexpr int fuzz_moves = 10000;
constexpr std::uint64_t budgets[] = {1000, 10000, 100000, 750000};
constexpr std::uint64_t budget_seeds[] = {1, 2, 3};
constexpr int determinism_runs = 3;
constexpr int cost_plans = 1000;
constexpr double cost_tolerance = 1e-9;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Verdict& v) {
  std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
  std::fflush(stdout);
  failures += v.pass ? 0 : 1;
}

bool complete_and_feasible(const Plan& plan, const Instance& inst) {
  FeasibilityOptions strict;
  strict.require_complete = true;
  return check_feasibility(plan, inst, strict).empty();
}

std::set<std::vector<Index>> tours_of(const Plan& plan) {
  std::set<std::vector<Index>> out;
  for (const auto& d : plan.days) {
    for (const auto& t : d.trucks) {
      for (const auto& j : t) {
        std::vector<Index> back(j.stops.rbegin(), j.stops.rend());
        out.insert(std::min(j.stops, back));
      }
    }
  }
  return out;
}

Verdict golden_optimum() {
  const auto inst = parse_instance(read_file(fs::path(HOPPER_DATA_DIR) / "golden.json"));
  const auto start = Clock::now();
  const auto r = solve_exact(inst, {}, OracleMode::min_distance);
  const double elapsed = seconds_since(start);
  if (!r) {
    return {false, "oracle found no complete plan"};
  }
  // Customers 5,3,2 and 4,1 in one-based numbering.
  const std::set<std::vector<Index>> expected{{1, 2, 4}, {0, 3}};
  const bool ok = std::abs(r->total_km - golden_km) <= km_tolerance &&
                  tours_of(r->plan) == expected && elapsed < oracle_seconds &&
                  complete_and_feasible(r->plan, inst);
  return {ok,
          fmt::format("{} km, tours match: {}, {:.3f} s, {} plans explored",
                      r->total_km,
                      tours_of(r->plan) == expected ? "yes" : "no",
                      elapsed,
                      r->explored)};
}

Verdict heuristic_reaches_optimum() {
  const auto inst = parse_instance(read_file(fs::path(HOPPER_DATA_DIR) / "golden.json"));
  const auto start = Clock::now();
  int hits = 0;
  int feasible = 0;
  std::string kms;
  for (int seed = 1; seed <= heuristic_seeds; ++seed) {
    InsertionParams ip;
    ip.rng_seed = static_cast<std::uint64_t>(seed);
    AnnealParams ap;
    ap.rng_seed = static_cast<std::uint64_t>(seed);
    ap.max_iterations = heuristic_iterations;
    const auto best = anneal(build_initial(inst, ip).plan, inst, ap).best;
    const double km = plan_km(best, inst);
    hits += std::abs(km - golden_km) <= km_tolerance ? 1 : 0;
    feasible += complete_and_feasible(best, inst) ? 1 : 0;
    kms += fmt::format("{}{}", kms.empty() ? "" : ",", km);
  }
  const double elapsed = seconds_since(start);
  return {hits >= heuristic_required_hits && feasible == heuristic_seeds &&
            elapsed < heuristic_seconds,
          fmt::format("{}/{} seeds at 221 km, {}/{} feasible and complete, km [{}], {:.2f} s",
                      hits,
                      heuristic_seeds,
                      feasible,
                      heuristic_seeds,
                      kms,
                      elapsed)};
}

// Instances where every order fits one journey and an extra stop costs more
// than any haulage saving, so the oracle's one-journey-per-customer search
// covers the optimum.
Instance dominance_instance(std::mt19937_64& gen) {
  testing::RandomSpec spec;
  spec.customers = 2 + gen() % 5;
  spec.trucks = 2;
  spec.bands = 1 + gen() % 3;
  spec.max_quantity = 3;
  spec.max_daily_km = 150 + static_cast<double>(gen() % 200);
  spec.max_daily_hours = 5 + static_cast<double>(gen() % 5);
  spec.reach_probability = 0.9;
  auto inst = testing::random_instance(gen, spec);
  inst.cost.unload_fee = 1000;
  return inst;
}

Verdict oracle_dominance() {
  std::mt19937_64 gen(20240501);
  const auto start = Clock::now();
  int oracle_vs_insertion = 0;
  int oracle_vs_anneal = 0;
  int anneal_vs_insertion = 0;
  int violations = 0;
  for (int i = 0; i < dominance_instances; ++i) {
    const auto inst = dominance_instance(gen);
    const auto exact = solve_exact(inst, {}, OracleMode::lexicographic);
    if (!exact) {
      ++violations;
      continue;
    }
    InsertionParams ip;
    ip.rng_seed = gen();
    const auto built = build_initial(inst, ip).plan;
    AnnealParams ap;
    ap.rng_seed = gen();
    ap.max_iterations = 20000;
    const auto annealed = anneal(built, inst, ap).best;
    const auto o = exact->objective;
    const auto b = objective_of(built, inst);
    const auto a = objective_of(annealed, inst);
    oracle_vs_insertion += better(b, o) ? 1 : 0;
    oracle_vs_anneal += better(a, o) ? 1 : 0;
    anneal_vs_insertion += better(b, a) ? 1 : 0;
    violations += static_cast<int>(check_feasibility(exact->plan, inst).size() +
                                   check_feasibility(built, inst).size() +
                                   check_feasibility(annealed, inst).size());
  }
  const double elapsed = seconds_since(start);
  return {oracle_vs_insertion == 0 && oracle_vs_anneal == 0 && anneal_vs_insertion == 0 &&
            violations == 0 && elapsed < dominance_seconds,
          fmt::format("{} instances; insertion beat oracle {}x, anneal beat oracle {}x, "
                      "insertion beat anneal {}x, {} violations, {:.2f} s",
                      dominance_instances,
                      oracle_vs_insertion,
                      oracle_vs_anneal,
                      anneal_vs_insertion,
                      violations,
                      elapsed)};
}

bool has(const std::vector<Violation>& v, ViolationKind kind) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == kind; });
}

struct Located {
  std::size_t day;
  Index truck;
  std::size_t journey;
};

std::vector<Located> journeys_of(const Plan& plan) {
  std::vector<Located> out;
  for (std::size_t d = 0; d < plan.days.size(); ++d) {
    for (Index t = 0; t < plan.days[d].trucks.size(); ++t) {
      for (std::size_t j = 0; j < plan.days[d].trucks[t].size(); ++j) {
        out.push_back({d, t, j});
      }
    }
  }
  return out;
}

// Breaks one constraint class on a feasible plan. Returns false when the
// plan offers nothing to break for that class.
using Mutation = std::function<bool(Plan&, Instance&, std::mt19937_64&)>;

Verdict feasibility_fuzz() {
  std::mt19937_64 gen(777);
  std::uint64_t proposed = 0;
  std::uint64_t candidates = 0;
  std::uint64_t infeasible = 0;
  std::vector<std::pair<Plan, Instance>> plans;
  const int moves_per_plan = fuzz_moves / fuzz_plans;
  for (int i = 0; i < fuzz_plans; ++i) {
    testing::RandomSpec spec;
    spec.customers = 4 + gen() % 8;
    spec.trucks = 1 + gen() % 3;
    spec.max_orders_per_customer = 2;
    spec.max_days_left = static_cast<int>(gen() % 3);
    spec.reach_probability = 0.8;
    spec.bands = 1 + gen() % 3;
    spec.max_daily_km = 150 + static_cast<double>(gen() % 250);
    const auto inst = testing::random_instance(gen, spec);
    InsertionParams ip;
    ip.rng_seed = gen();
    Plan current = build_initial(inst, ip).plan;
    Rng rng(gen());
    double temperature = 50;
    double scalar = scalarize(objective_of(current, inst), inst);
    for (int m = 0; m < moves_per_plan; ++m) {
      ++proposed;
      const auto kind = static_cast<MoveKind>(1 + rng.index(move_kind_count));
      auto c = propose_move(kind, current, inst, rng);
      if (!c) {
        continue;
      }
      ++candidates;
      if (!check_feasibility(*c, inst).empty()) {
        ++infeasible;
        continue;
      }
      const double next = scalarize(objective_of(*c, inst), inst);
      if (rng.unit() < acceptance_probability(next - scalar, temperature)) {
        current = std::move(*c);
        scalar = next;
      }
      temperature *= 0.999;
    }
    plans.emplace_back(current, inst);
  }

  const std::vector<std::pair<const char*, std::pair<ViolationKind, Mutation>>> mutations = {
    {"hopper capacity",
     {ViolationKind::hopper_overflow,
      [](Plan& p, Instance& inst, std::mt19937_64& g) {
        auto js = journeys_of(p);
        std::shuffle(js.begin(), js.end(), g);
        for (auto [d, t, j] : js) {
          auto& loads = p.days[d].trucks[t][j].loads;
          if (!loads.empty()) {
            auto& a = loads[g() % loads.size()];
            a.tons = inst.trucks[t].hoppers[a.hopper].capacity + 0.25;
            return true;
          }
        }
        return false;
      }}},
    {"max load",
     {ViolationKind::max_load,
      [](Plan& p, Instance& inst, std::mt19937_64& g) {
        auto js = journeys_of(p);
        std::shuffle(js.begin(), js.end(), g);
        for (auto [d, t, j] : js) {
          const double load = p.days[d].trucks[t][j].load();
          if (load > 0.1) {
            inst.trucks[t].max_load = load - 0.05;
            return true;
          }
        }
        return false;
      }}},
    {"9 h",
     {ViolationKind::daily_hours,
      [](Plan& p, Instance& inst, std::mt19937_64& g) {
        auto js = journeys_of(p);
        if (js.empty()) {
          return false;
        }
        const auto [d, t, j] = js[g() % js.size()];
        double hours = 0;
        for (const auto& jj : p.days[d].trucks[t]) {
          hours += journey_hours(jj, inst);
        }
        inst.trucks[t].max_daily_hours = hours - 0.01;
        return true;
      }}},
    {"daily km",
     {ViolationKind::daily_km,
      [](Plan& p, Instance& inst, std::mt19937_64& g) {
        auto js = journeys_of(p);
        if (js.empty()) {
          return false;
        }
        const auto [d, t, j] = js[g() % js.size()];
        double km = 0;
        for (const auto& jj : p.days[d].trucks[t]) {
          km += journey_km(jj, inst);
        }
        inst.trucks[t].max_daily_km = km - 0.5;
        return true;
      }}},
    {"reachability",
     {ViolationKind::unreachable,
      [](Plan& p, Instance& inst, std::mt19937_64& g) {
        auto js = journeys_of(p);
        if (js.empty()) {
          return false;
        }
        const auto [d, t, j] = js[g() % js.size()];
        const auto& stops = p.days[d].trucks[t][j].stops;
        inst.trucks[t].reachable[stops[g() % stops.size()]] = false;
        return true;
      }}},
    {"urgency",
     {ViolationKind::late_delivery,
      [](Plan& p, Instance& inst, std::mt19937_64& g) {
        auto js = journeys_of(p);
        std::shuffle(js.begin(), js.end(), g);
        for (auto [d, t, j] : js) {
          auto journey = p.days[d].trucks[t][j];
          if (journey.loads.empty()) {
            continue;
          }
          // Deliver it the day after its tightest deadline.
          int due = inst.horizon_days;
          for (const auto& a : journey.loads) {
            due = std::min(due, inst.orders[a.order].days_left + 1);
          }
          auto& from = p.days[d].trucks[t];
          from.erase(from.begin() + static_cast<long>(j));
          p.ensure_days(static_cast<std::size_t>(due) + 1, inst.trucks.size());
          p.days[static_cast<std::size_t>(due)].trucks[t].push_back(journey);
          return true;
        }
        return false;
      }}},
    {"hopper exclusivity",
     {ViolationKind::hopper_shared,
      [](Plan& p, Instance&, std::mt19937_64& g) {
        auto js = journeys_of(p);
        std::shuffle(js.begin(), js.end(), g);
        for (auto [d, t, j] : js) {
          auto& loads = p.days[d].trucks[t][j].loads;
          for (std::size_t a = 0; a < loads.size(); ++a) {
            for (std::size_t b = 0; b < loads.size(); ++b) {
              if (loads[a].order != loads[b].order) {
                loads.push_back({loads[a].hopper, loads[b].order, 0.01});
                return true;
              }
            }
          }
        }
        return false;
      }}},
  };

  std::string caught;
  bool all_caught = true;
  for (const auto& [name, spec] : mutations) {
    const auto& [kind, mutate] = spec;
    int applied = 0;
    int detected = 0;
    std::mt19937_64 g(99);
    for (const auto& [plan, inst] : plans) {
      auto p = plan;
      auto i = inst;
      if (!mutate(p, i, g)) {
        continue;
      }
      ++applied;
      detected += has(check_feasibility(p, i), kind) ? 1 : 0;
    }
    all_caught = all_caught && applied > 0 && detected == applied;
    caught += fmt::format("{}{} {}/{}", caught.empty() ? "" : ", ", name, detected, applied);
  }
  return {infeasible == 0 && all_caught,
          fmt::format("{} moves, {} candidates, {} infeasible; mutations caught: {}",
                      proposed,
                      candidates,
                      infeasible,
                      caught)};
}

// Seventeen customers on a fixed synthetic map served by two trucks.
Instance moderate_instance() {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> coord(-35, 35);
  std::uniform_real_distribution<double> qty(1.0, 4.0);
  Instance inst;
  inst.feeds = {{"feed-a", ""}, {"feed-b", ""}};
  const std::size_t n = 17;
  std::vector<std::pair<double, double>> pts{{0, 0}};
  for (std::size_t c = 0; c < n; ++c) {
    inst.customers.push_back({fmt::format("s{}", c + 1), "", std::nullopt});
    pts.emplace_back(coord(gen), coord(gen));
    Order o;
    o.id = fmt::format("o{}", c + 1);
    o.customer = c;
    o.feed = c % 2;
    o.quantity = std::round(qty(gen) * 1000) / 1000;
    o.days_left = static_cast<int>(gen() % 3);
    inst.orders.push_back(o);
  }
  inst.distance = Matrix(n + 1);
  inst.travel_time = Matrix(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      const double d = i == j ? 0
                              : std::ceil(std::hypot(pts[i].first - pts[j].first,
                                                     pts[i].second - pts[j].second));
      inst.distance(i, j) = d;
      inst.travel_time(i, j) = d / 50;
    }
  }
  auto truck = [&](const char* id, std::initializer_list<double> caps, double max_load) {
    Truck t;
    t.id = id;
    int k = 1;
    for (double c : caps) {
      t.hoppers.push_back({fmt::format("h{}", k++), c});
    }
    t.max_load = max_load;
    t.max_daily_hours = 9;
    t.max_daily_km = 220;
    t.reachable.assign(n, true);
    return t;
  };
  inst.trucks = {truck("truck-1", {3, 3.7, 3.8, 3.7, 3}, 11.6),
                 truck("truck-2", {4, 3, 1.7, 4.5, 3}, 15.3)};
  inst.service_time = 0.25;
  inst.cost.unload_fee = 10;
  inst.cost.per_ton_fixed = 2;
  inst.cost.rate_bands = {{60, 0.4}, {100, 0.15}, {infinite_km, 0.05}};
  inst.horizon_days = 10;
  return inst;
}

Verdict monotone_improvement() {
  const auto inst = moderate_instance();
  std::vector<double> means;
  std::string detail;
  bool feasible = true;
  for (const auto budget : budgets) {
    double sum = 0;
    for (const auto seed : budget_seeds) {
      InsertionParams ip;
      ip.rng_seed = seed;
      AnnealParams ap;
      ap.rng_seed = seed;
      ap.max_iterations = budget;
      const auto r = anneal(build_initial(inst, ip).plan, inst, ap);
      feasible = feasible && check_feasibility(r.best, inst).empty();
      sum += 100 * (r.initial_scalar - r.best_scalar) / r.initial_scalar;
    }
    means.push_back(sum / static_cast<double>(std::size(budget_seeds)));
    detail += fmt::format("{}{:g}: {:.3f}%", detail.empty() ? "" : ", ",
                          static_cast<double>(budget), means.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < means.size(); ++i) {
    monotone = monotone && means[i] >= means[i - 1];
  }
  return {monotone && feasible, "mean improvement by budget " + detail};
}

int run_cli(const std::string& args) {
  const int raw = std::system(fmt::format("'{}' {} > /dev/null 2>&1", HOPPER_CLI_PATH, args).c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Verdict determinism() {
  const auto dir = fs::temp_directory_path() / fmt::format("hopper-acceptance-{}", ::getpid());
  fs::create_directories(dir);
  const std::string golden = (fs::path(HOPPER_DATA_DIR) / "golden.json").string();
  const auto moderate = (dir / "moderate.json").string();
  write_file_atomic(moderate, serialize_instance(moderate_instance()));
  bool same = true;
  int runs = 0;
  for (const auto& [input, seed] : {std::pair{golden, 1}, std::pair{golden, 9}, std::pair{moderate, 4}}) {
    std::string first;
    for (int k = 0; k < determinism_runs; ++k) {
      const auto out = dir / fmt::format("plan-{}.json", k);
      if (run_cli(fmt::format("plan -i '{}' --seed {} --iterations 50000 -o '{}'", input, seed,
                              out.string())) != 0) {
        same = false;
        continue;
      }
      ++runs;
      const auto text = read_file(out);
      if (k == 0) {
        first = text;
      } else {
        same = same && text == first;
      }
    }
  }
  fs::remove_all(dir);
  return {same && runs == 3 * determinism_runs,
          fmt::format("{} CLI runs over 3 (instance, seed) pairs, byte-identical: {}", runs,
                      same ? "yes" : "no")};
}

Verdict cost_equivalence() {
  std::mt19937_64 gen(1000);
  double worst = 0;
  for (int i = 0; i < cost_plans; ++i) {
    testing::RandomSpec spec;
    spec.customers = 1 + gen() % 10;
    spec.trucks = 1 + gen() % 3;
    spec.max_orders_per_customer = 1 + gen() % 3;
    spec.bands = 1 + gen() % 4;
    const auto inst = testing::random_instance(gen, spec);
    const auto plan = testing::random_plan(gen, inst);
    const auto got = evaluate_cost(plan, inst);
    const auto want = testing::reference_cost(plan, inst);
    worst = std::max({worst,
                      std::abs(got.unloading - want.unloading),
                      std::abs(got.variable_transport - want.variable),
                      std::abs(got.fixed_transport - want.fixed),
                      std::abs(got.total_optimized - (want.unloading + want.variable))});
  }
  return {worst <= cost_tolerance,
          fmt::format("{} plans, largest difference {:.3g} EUR", cost_plans, worst)};
}

} // namespace

int main() {
  report(1, "golden optimum", golden_optimum());
  report(2, "heuristic reaches the golden optimum", heuristic_reaches_optimum());
  report(3, "oracle dominance", oracle_dominance());
  report(4, "feasibility fuzz", feasibility_fuzz());
  report(5, "monotone improvement", monotone_improvement());
  report(6, "determinism", determinism());
  report(7, "cost evaluator equivalence", cost_equivalence());
  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
