#include "hopper/annealing.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <thread>

namespace hopper {

namespace {

constexpr std::uint64_t wall_check_interval = 256;
constexpr double calibration_acceptance = 0.8;
constexpr int calibration_samples = 100;

double plan_scalar(const Plan& plan, const Instance& instance) {
  return scalarize(objective_of(plan, instance), instance);
}

MoveKind draw_move(const std::array<double, move_kind_count>& weights,
                   Rng& rng) {
  double total = 0;
  for (const auto w : weights) {
    total += w;
  }
  double x = rng.unit() * total;
  for (std::size_t k = 0; k < move_kind_count; ++k) {
    if (x < weights[k]) {
      return static_cast<MoveKind>(k + 1);
    }
    x -= weights[k];
  }
  // Rounding fallback: last kind with positive weight.
  for (std::size_t k = move_kind_count; k-- > 0;) {
    if (weights[k] > 0) {
      return static_cast<MoveKind>(k + 1);
    }
  }
  return MoveKind::relocate_anywhere;
}

} // namespace

void validate(const AnnealParams& params) {
  if (params.initial_temp && !(*params.initial_temp > 0)) {
    throw ConfigError("initial_temp must be positive");
  }
  if (!(params.cooling_factor > 0 && params.cooling_factor < 1)) {
    throw ConfigError(fmt::format("cooling_factor {} is outside (0, 1)",
                                  params.cooling_factor));
  }
  if (params.steps_per_temp && *params.steps_per_temp == 0) {
    throw ConfigError("steps_per_temp must be positive");
  }
  if (!(params.max_wall_seconds >= 0)) {
    throw ConfigError("max_wall_seconds must be nonnegative");
  }
  bool any = false;
  for (const auto w : params.move_weights) {
    if (!(w >= 0) || !std::isfinite(w)) {
      throw ConfigError("move weights must be finite and nonnegative");
    }
    any = any || w > 0;
  }
  if (!any) {
    throw ConfigError("at least one move weight must be positive");
  }
}

double acceptance_probability(double delta, double temperature) {
  if (delta <= 0) {
    return 1.0;
  }
  if (!(temperature > 0)) {
    return 0.0;
  }
  return std::exp(-delta / temperature);
}

double calibrate_temperature(const Plan& initial,
                             const Instance& instance,
                             const AnnealParams& params) {
  // Separate stream so calibration does not shift the main run's draws.
  Rng rng(params.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  const double base = plan_scalar(initial, instance);
  std::vector<double> deltas;
  for (int attempt = 0;
       attempt < 10 * calibration_samples &&
       deltas.size() < static_cast<std::size_t>(calibration_samples);
       ++attempt) {
    const auto kind = draw_move(params.move_weights, rng);
    if (auto candidate = propose_move(kind, initial, instance, rng)) {
      const double delta = std::abs(plan_scalar(*candidate, instance) - base);
      if (delta > 0) {
        deltas.push_back(delta);
      }
    }
  }
  if (deltas.empty()) {
    return 1.0;
  }
  const auto mid = deltas.begin() + static_cast<long>(deltas.size() / 2);
  std::nth_element(deltas.begin(), mid, deltas.end());
  return *mid / -std::log(calibration_acceptance);
}

AnnealResult anneal(const Plan& initial,
                    const Instance& instance,
                    const AnnealParams& params,
                    const AnnealControl& control) {
  validate(params);
  if (const auto violations = check_feasibility(initial, instance);
      !violations.empty()) {
    throw InfeasiblePlanError(
      fmt::format("initial plan is infeasible: {} on '{}' ({})",
                  to_string(violations.front().kind),
                  violations.front().entity,
                  violations.front().detail));
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
      .count();
  };

  AnnealResult result;
  result.best = initial;
  result.initial_scalar = plan_scalar(initial, instance);
  result.best_scalar = result.initial_scalar;
  if (params.max_iterations == 0) {
    return result;
  }

  double temperature = params.initial_temp.value_or(
    calibrate_temperature(initial, instance, params));
  result.initial_temperature = temperature;
  const std::uint64_t steps_per_temp = params.steps_per_temp.value_or(
    std::max<std::uint64_t>(1, params.max_iterations / 500));
  const std::uint64_t stride =
    params.trace_stride > 0
      ? params.trace_stride
      : std::max<std::uint64_t>(1, params.max_iterations / 1000);

  Rng rng(params.rng_seed);
  Plan current = initial;
  double current_scalar = result.initial_scalar;

  auto report = [&](std::uint64_t iteration) {
    if (control.on_progress) {
      control.on_progress({iteration,
                           elapsed(),
                           result.initial_scalar,
                           current_scalar,
                           result.best_scalar,
                           temperature,
                           &result.best});
    }
  };

  std::uint64_t it = 0;
  while (it < params.max_iterations) {
    if (it % wall_check_interval == 0 && it > 0) {
      report(it);
      if (control.stop.stop_requested()) {
        result.cancelled = true;
        break;
      }
      if (elapsed() >= params.max_wall_seconds) {
        result.stopped_by_time = true;
        break;
      }
    }
    ++it;

    const auto kind = draw_move(params.move_weights, rng);
    bool accepted = false;
    bool improved = false;
    if (auto candidate = propose_move(kind, current, instance, rng)) {
      const double scalar = plan_scalar(*candidate, instance);
      const double delta = scalar - current_scalar;
      const double p = acceptance_probability(delta, temperature);
      accepted = delta <= 0 || rng.unit() < p;
      if (control.on_step) {
        control.on_step({it, kind, delta, temperature, p, accepted});
      }
      if (accepted) {
        current = std::move(*candidate);
        current_scalar = scalar;
        ++result.accepted;
        if (current_scalar < result.best_scalar) {
          result.best = current;
          result.best_scalar = current_scalar;
          improved = true;
        }
      }
    } else {
      ++result.null_moves;
    }

    if (improved || it % stride == 0) {
      result.trace.rows.push_back({it,
                                   elapsed(),
                                   current_scalar,
                                   result.best_scalar,
                                   temperature,
                                   kind,
                                   accepted});
    }
    if (it % steps_per_temp == 0) {
      temperature *= params.cooling_factor;
    }
  }
  result.iterations = it;
  report(it);
  return result;
}

AnnealResult anneal_restarts(const Plan& initial,
                             const Instance& instance,
                             const AnnealParams& params,
                             std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) {
    throw ConfigError("anneal_restarts needs at least one seed");
  }
  std::vector<AnnealResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      workers.emplace_back([&, i] {
        try {
          auto p = params;
          p.rng_seed = seeds[i];
          results[i] = anneal(initial, instance, p);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (better(objective_of(results[i].best, instance),
               objective_of(results[best].best, instance))) {
      best = i;
    }
  }
  return std::move(results[best]);
}

} // namespace hopper
