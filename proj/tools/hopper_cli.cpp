// Command-line planner. Exit codes: 0 success, 1 validation, 2 infeasible,
// 3 limits.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <pthread.h>

#include "hopper/annealing.h"
#include "hopper/insertion.h"
#include "hopper/io.h"
#include "hopper/model.h"
#include "hopper/oracle.h"
#include "hopper/service.h"

namespace {

using namespace hopper;

enum Exit : int { ok = 0, validation = 1, infeasible = 2, limits = 3 };

// Raised for a plan that breaks a constraint when that is the outcome
// being reported rather than a malformed input.
struct InfeasibleOutcome : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string instance;
};

struct StrategyFlags {
  std::optional<std::string> seed_strategy;
  std::optional<std::string> truck_strategy;
};

struct AnnealFlags {
  std::optional<std::uint64_t> iterations;
  std::optional<double> max_seconds;
  std::optional<double> initial_temp;
  std::optional<double> cooling;
};

ServiceConfig load_config(const std::string& path) {
  if (!path.empty()) {
    return parse_service_config(read_file(path));
  }
  return load_service_config_from_env();
}

Instance load_instance(const std::string& path) {
  return parse_instance(read_file(path));
}

InsertionParams insertion_params(InsertionParams p,
                                 const StrategyFlags& flags,
                                 std::uint64_t seed) {
  if (flags.seed_strategy) {
    auto s = parse_seed_strategy(*flags.seed_strategy);
    if (!s) {
      throw ConfigError(fmt::format("unknown seed strategy '{}'", *flags.seed_strategy));
    }
    p.seed_strategy = *s;
  }
  if (flags.truck_strategy) {
    auto s = parse_truck_strategy(*flags.truck_strategy);
    if (!s) {
      throw ConfigError(fmt::format("unknown truck strategy '{}'", *flags.truck_strategy));
    }
    p.truck_strategy = *s;
  }
  p.rng_seed = seed;
  return p;
}

AnnealParams anneal_params(AnnealParams p, const AnnealFlags& flags, std::uint64_t seed) {
  if (flags.iterations) {
    p.max_iterations = *flags.iterations;
  }
  if (flags.max_seconds) {
    p.max_wall_seconds = *flags.max_seconds;
  }
  if (flags.initial_temp) {
    p.initial_temp = *flags.initial_temp;
  }
  if (flags.cooling) {
    p.cooling_factor = *flags.cooling;
  }
  p.rng_seed = seed;
  validate(p);
  return p;
}

void add_strategy_flags(CLI::App* cmd, StrategyFlags& flags) {
  cmd->add_option("--seed-strategy", flags.seed_strategy,
                  "farthest | most-pending-orders | random");
  cmd->add_option("--truck-strategy", flags.truck_strategy,
                  "lowest-mileage | highest-capacity | random");
}

void add_anneal_flags(CLI::App* cmd, AnnealFlags& flags) {
  cmd->add_option("--iterations", flags.iterations, "Annealing iteration budget");
  cmd->add_option("--max-seconds", flags.max_seconds, "Annealing wall-time budget");
  cmd->add_option("--initial-temp", flags.initial_temp,
                  "Initial temperature (calibrated when omitted)");
  cmd->add_option("--cooling", flags.cooling, "Geometric cooling factor");
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') {
      std::cout << '\n';
    }
  } else {
    write_file_atomic(path, content);
  }
}

void print_summary(std::ostream& out, const Plan& plan, const Instance& inst) {
  const auto cost = evaluate_cost(plan, inst);
  const auto objective = objective_of(plan, inst);
  out << fmt::format("journeys: {}\n", plan.journey_count());
  out << fmt::format("days: {}\n", plan.days.size());
  out << fmt::format("distance_km: {:.3f}\n", plan_km(plan, inst));
  out << fmt::format("delivered_t: {:.4f}\n", objective.delivered);
  out << fmt::format("ordered_t: {:.4f}\n", inst.total_ordered());
  out << fmt::format("unloading: {:.4f}\n", cost.unloading);
  out << fmt::format("variable_transport: {:.4f}\n", cost.variable_transport);
  out << fmt::format("fixed_transport: {:.4f}\n", cost.fixed_transport);
  out << fmt::format("total_optimized: {:.4f}\n", cost.total_optimized);
  out << fmt::format("scalar: {:.4f}\n", scalarize(objective, inst));
}

void print_report(const BuildReport& report, const Instance& inst) {
  for (auto o : report.unservable_orders) {
    std::cerr << fmt::format("warning: order {} cannot be reached by any truck\n",
                             inst.orders[o].id);
  }
  for (auto o : report.urgent_shortfall) {
    std::cerr << fmt::format("warning: urgent order {} short by {:.4f} t on day 1\n",
                             inst.orders[o].id, report.remaining[o]);
  }
  if (report.horizon_reached) {
    std::cerr << "warning: planning horizon reached with orders outstanding\n";
  }
}

void require_feasible(const Plan& plan, const Instance& inst) {
  const auto violations = check_feasibility(plan, inst);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw InfeasiblePlanError(fmt::format("plan infeasible: {} on day {} ({}): {}",
                                          to_string(v.kind), v.day, v.entity, v.detail));
  }
}

struct PlanCommand {
  Common common;
  StrategyFlags strategies;
  AnnealFlags anneal;
  std::uint64_t seed = 1;
  std::string out;
  std::string run_out;

  int run() const {
    const auto config = load_config(common.config);
    const auto inst = load_instance(common.instance);
    const auto ins = insertion_params(config.run_defaults.insertion, strategies, seed);
    const auto ann = anneal_params(config.run_defaults.anneal, anneal, seed);
    std::cout << fmt::format("seed: {}\n", seed);

    auto built = build_initial(inst, ins);
    print_report(built.report, inst);
    const auto result = hopper::anneal(built.plan, inst, ann);

    write_output(out, serialize_plan(result.best, inst));
    if (!run_out.empty()) {
      RunRecord record;
      record.id = "cli";
      record.instance = common.instance;
      record.phase = RunPhase::done;
      record.insertion = ins;
      record.anneal = ann;
      record.iterations = result.iterations;
      record.elapsed_seconds =
        result.trace.rows.empty() ? 0 : result.trace.rows.back().elapsed;
      record.initial_scalar = result.initial_scalar;
      record.best_scalar = result.best_scalar;
      record.initial_objective = objective_of(built.plan, inst);
      record.best_objective = objective_of(result.best, inst);
      record.plan = out.empty() || out == "-"
                      ? std::string()
                      : std::filesystem::path(out).filename().string();
      record.trace = result.trace;
      write_file_atomic(run_out, serialize_run(record));
    }
    std::cout << fmt::format("iterations: {}\n", result.iterations);
    std::cout << fmt::format("improvement_percent: {:.4f}\n",
                             result.initial_scalar == 0
                               ? 0.0
                               : 100.0 * (result.initial_scalar - result.best_scalar) /
                                   result.initial_scalar);
    if (!out.empty() && out != "-") {
      print_summary(std::cout, result.best, inst);
    }
    return ok;
  }
};

struct ConstructCommand {
  Common common;
  StrategyFlags strategies;
  std::uint64_t seed = 1;
  std::string out;

  int run() const {
    const auto config = load_config(common.config);
    const auto inst = load_instance(common.instance);
    const auto ins = insertion_params(config.run_defaults.insertion, strategies, seed);
    std::cout << fmt::format("seed: {}\n", seed);
    auto built = build_initial(inst, ins);
    print_report(built.report, inst);
    write_output(out, serialize_plan(built.plan, inst));
    if (!out.empty() && out != "-") {
      print_summary(std::cout, built.plan, inst);
    }
    return ok;
  }
};

struct ImproveCommand {
  Common common;
  AnnealFlags anneal;
  std::uint64_t seed = 1;
  std::string plan;
  std::string out;

  int run() const {
    const auto config = load_config(common.config);
    const auto inst = load_instance(common.instance);
    const auto initial = parse_plan(read_file(plan), inst);
    const auto ann = anneal_params(config.run_defaults.anneal, anneal, seed);
    std::cout << fmt::format("seed: {}\n", seed);
    require_feasible(initial, inst);
    const auto result = hopper::anneal(initial, inst, ann);
    write_output(out, serialize_plan(result.best, inst));
    if (!out.empty() && out != "-") {
      print_summary(std::cout, result.best, inst);
    }
    return ok;
  }
};

struct ExactCommand {
  Common common;
  std::string mode = "min-distance";
  std::size_t max_customers = OracleLimits{}.max_customers;
  std::size_t max_trucks = OracleLimits{}.max_trucks;
  std::string out;

  int run() const {
    const auto inst = load_instance(common.instance);
    const auto parsed = parse_oracle_mode(mode);
    if (!parsed) {
      throw ConfigError(fmt::format("unknown oracle mode '{}'", mode));
    }
    OracleLimits lim;
    lim.max_customers = max_customers;
    lim.max_trucks = max_trucks;
    const auto result = solve_exact(inst, lim, *parsed);
    if (!result) {
      throw InfeasibleOutcome("no plan delivers every order within the constraints");
    }
    write_output(out, serialize_plan(result->plan, inst));
    std::ostream& log = out.empty() || out == "-" ? std::cerr : std::cout;
    log << fmt::format("explored: {}\n", result->explored);
    print_summary(log, result->plan, inst);
    return ok;
  }
};

struct CheckCommand {
  Common common;
  std::string plan;
  bool require_complete = false;

  int run() const {
    const auto inst = load_instance(common.instance);
    const auto p = parse_plan(read_file(plan), inst);
    FeasibilityOptions opts;
    opts.require_complete = require_complete;
    const auto violations = check_feasibility(p, inst, opts);
    std::cout << fmt::format("feasible: {}\n", violations.empty() ? "yes" : "no");
    std::cout << fmt::format("violations: {}\n", violations.size());
    for (const auto& v : violations) {
      std::cout << fmt::format("  {} day={} truck={} journey={} entity={}: {}\n",
                               to_string(v.kind),
                               v.day,
                               v.truck ? inst.trucks[*v.truck].id : "-",
                               v.journey ? std::to_string(*v.journey + 1) : "-",
                               v.entity,
                               v.detail);
    }
    print_summary(std::cout, p, inst);
    return violations.empty() ? ok : infeasible;
  }
};

struct TraceExportCommand {
  std::string run_file;
  std::string out;

  int run() const {
    const auto record = parse_run(read_file(run_file));
    write_output(out, trace_to_csv(record.trace));
    return ok;
  }
};

struct ServeCommand {
  std::string config;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::string> run_dir;

  int run() const {
    auto cfg = load_config(config);
    if (host) {
      cfg.host = *host;
    }
    if (port) {
      cfg.port = *port;
    }
    if (run_dir) {
      cfg.run_dir = *run_dir;
    }

    // Signals are taken by a dedicated thread; block them everywhere else.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    PlanningService service(cfg);
    HttpFrontend http(service);
    const int bound = http.bind(cfg.host, cfg.port);
    if (bound < 0) {
      std::cerr << fmt::format("error: cannot bind {}:{}\n", cfg.host, cfg.port);
      return validation;
    }
    std::cout << fmt::format("listening on http://{}:{} (runs in {})\n",
                             cfg.host, bound, cfg.run_dir.string())
              << std::flush;

    std::jthread waiter([&] {
      int sig = 0;
      sigwait(&signals, &sig);
      http.stop();
    });
    http.serve();
    // Wake the waiter if serve() returned on its own.
    pthread_kill(waiter.native_handle(), SIGTERM);
    return ok;
  }
};

int dispatch(int argc, char** argv) {
  CLI::App app{"Feed delivery planner for multi-hopper trucks"};
  app.require_subcommand(1);

  const char* env = std::getenv(config_env_var);
  const std::string default_config = env ? env : "";

  auto common_flags = [&](CLI::App* cmd, Common& c) {
    c.config = default_config;
    cmd->add_option("--config", c.config,
                    fmt::format("Configuration file (default ${})", config_env_var));
    cmd->add_option("-i,--instance", c.instance, "Instance document")->required();
  };

  PlanCommand plan;
  auto* plan_cmd = app.add_subcommand("plan", "Construct and anneal a plan");
  common_flags(plan_cmd, plan.common);
  add_strategy_flags(plan_cmd, plan.strategies);
  add_anneal_flags(plan_cmd, plan.anneal);
  plan_cmd->add_option("--seed", plan.seed, "Random seed")->required();
  plan_cmd->add_option("-o,--out", plan.out, "Plan output file (stdout when omitted)");
  plan_cmd->add_option("--run-out", plan.run_out, "Run record output file");

  ConstructCommand construct;
  auto* construct_cmd = app.add_subcommand("construct", "Insertion heuristic only");
  common_flags(construct_cmd, construct.common);
  add_strategy_flags(construct_cmd, construct.strategies);
  construct_cmd->add_option("--seed", construct.seed, "Random seed")->required();
  construct_cmd->add_option("-o,--out", construct.out, "Plan output file");

  ImproveCommand improve;
  auto* improve_cmd = app.add_subcommand("improve", "Anneal an existing plan");
  common_flags(improve_cmd, improve.common);
  add_anneal_flags(improve_cmd, improve.anneal);
  improve_cmd->add_option("--seed", improve.seed, "Random seed")->required();
  improve_cmd->add_option("-p,--plan", improve.plan, "Input plan")->required();
  improve_cmd->add_option("-o,--out", improve.out, "Plan output file");

  ExactCommand exact;
  auto* exact_cmd = app.add_subcommand("exact", "Exhaustive solver for small instances");
  exact.common.config = default_config;
  exact_cmd->add_option("-i,--instance", exact.common.instance, "Instance document")
    ->required();
  exact_cmd->add_option("--mode", exact.mode, "min-distance | lexicographic");
  exact_cmd->add_option("--max-customers", exact.max_customers, "Customer limit");
  exact_cmd->add_option("--max-trucks", exact.max_trucks, "Truck limit");
  exact_cmd->add_option("-o,--out", exact.out, "Plan output file");

  CheckCommand check;
  auto* check_cmd = app.add_subcommand("check", "Feasibility and cost report");
  check_cmd->add_option("-i,--instance", check.common.instance, "Instance document")
    ->required();
  check_cmd->add_option("-p,--plan", check.plan, "Plan document")->required();
  check_cmd->add_flag("--require-complete", check.require_complete,
                      "Also flag orders not fully delivered by their deadline");

  TraceExportCommand trace;
  auto* trace_cmd = app.add_subcommand("trace-export", "Annealing trace as CSV");
  trace_cmd->add_option("-r,--run", trace.run_file, "Run record")->required();
  trace_cmd->add_option("-o,--out", trace.out, "CSV output file");

  ServeCommand serve;
  serve.config = default_config;
  auto* serve_cmd = app.add_subcommand("serve", "Run the planning HTTP service");
  serve_cmd->add_option("--config", serve.config, "Configuration file");
  serve_cmd->add_option("--host", serve.host, "Listen address");
  serve_cmd->add_option("--port", serve.port, "Listen port (0 picks one)");
  serve_cmd->add_option("--run-dir", serve.run_dir, "Run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return validation;
  }

  if (*plan_cmd) return plan.run();
  if (*construct_cmd) return construct.run();
  if (*improve_cmd) return improve.run();
  if (*exact_cmd) return exact.run();
  if (*check_cmd) return check.run();
  if (*trace_cmd) return trace.run();
  return serve.run();
}

} // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const hopper::ParseError& e) {
    std::cerr << fmt::format("error: {} at '{}': {}\n",
                             hopper::to_string(e.code()), e.path(), e.what());
    return validation;
  } catch (const hopper::InfeasiblePlanError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return infeasible;
  } catch (const InfeasibleOutcome& e) {
    std::cerr << "error: " << e.what() << '\n';
    return infeasible;
  } catch (const hopper::LimitExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return limits;
  } catch (const std::exception& e) {
    // Config, structural and file errors are all input problems.
    std::cerr << "error: " << e.what() << '\n';
    return validation;
  }
}
