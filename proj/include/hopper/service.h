#ifndef HOPPER_SERVICE_H
#define HOPPER_SERVICE_H

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hopper/annealing.h"
#include "hopper/insertion.h"
#include "hopper/io.h"
#include "hopper/model.h"

namespace httplib {
class Server;
}

namespace hopper {

// Environment variable naming the configuration file.
inline constexpr const char* config_env_var = "HOPPER_CONFIG";

struct RunParams {
  InsertionParams insertion;
  AnnealParams anneal;
};

// {"insertion": {...}, "anneal": {...}}; every field optional and applied on
// top of `base`. Validates the annealing parameters. Throws ParseError or
// ConfigError.
RunParams parse_run_params(std::string_view text, RunParams base = {});

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path run_dir = "hopper-runs";
  std::size_t max_concurrent_runs = 2;
  // Defaults for runs that omit parameters, and for the CLI.
  RunParams run_defaults;
};

// Reads a JSON object with optional keys host, port, run_dir,
// max_concurrent_runs and run (a run parameter object). Unknown keys are
// rejected.
ServiceConfig parse_service_config(std::string_view text);
// Uses $HOPPER_CONFIG when set, defaults otherwise.
ServiceConfig load_service_config_from_env();

class NotFound : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Published view of a run. Replaced wholesale on every update.
struct RunSummary {
  std::string id;
  std::string instance;
  RunPhase phase = RunPhase::queued;
  std::uint64_t iterations = 0;
  double elapsed_seconds = 0;
  double initial_scalar = 0;
  double best_scalar = 0;
  double improvement_percent = 0;
  Objective initial_objective;
  Objective best_objective;
  Km best_km = 0;
  std::string error;
};

std::string summary_json(const RunSummary& summary);

// Run lifecycle manager: stores instances, executes construction plus
// annealing on a fixed pool of workers (FIFO beyond the pool size), and
// persists every finished run under the run directory.
class PlanningService {
public:
  explicit PlanningService(ServiceConfig config);
  ~PlanningService();

  PlanningService(const PlanningService&) = delete;
  PlanningService& operator=(const PlanningService&) = delete;

  // Throws ParseError on an invalid document.
  std::string create_instance(std::string_view document);
  std::optional<std::string> get_instance(const std::string& id) const;
  std::vector<std::string> list_instances() const;

  // Throws NotFound for an unknown instance, ConfigError for bad params.
  std::string start_run(const std::string& instance_id, const RunParams& params);
  std::optional<RunSummary> get_run(const std::string& id) const;
  std::vector<RunSummary> list_runs() const;
  // False when the run does not exist or already finished.
  bool cancel_run(const std::string& id);

  // Available once the run is terminal.
  std::optional<std::string> run_plan(const std::string& id) const;
  std::optional<std::string> run_trace_csv(const std::string& id) const;
  std::optional<std::string> run_record(const std::string& id) const;

  // Blocks until the run is terminal. Returns false on timeout.
  bool wait(const std::string& id, std::chrono::milliseconds timeout) const;

  const ServiceConfig& config() const { return config_; }

private:
  struct Run;

  std::shared_ptr<Run> find_run(const std::string& id) const;
  void worker_loop(std::stop_token stop);
  void execute(Run& run);
  void publish(Run& run, RunSummary summary);
  void persist(const Run& run) const;
  void restore();

  ServiceConfig config_;
  mutable std::mutex mutex_;
  mutable std::condition_variable_any changed_;
  std::map<std::string, std::shared_ptr<const Instance>> instances_;
  std::map<std::string, std::string> instance_documents_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::deque<std::shared_ptr<Run>> queue_;
  std::uint64_t next_instance_ = 1;
  std::uint64_t next_run_ = 1;
  std::vector<std::jthread> workers_;
};

// HTTP resource API over a PlanningService.
//   POST /instances            instance document -> {"id"}
//   GET  /instances            {"instances": [...]}
//   GET  /instances/{id}       instance document
//   POST /runs                 {"instance", "params"} -> {"id"}
//   GET  /runs                 {"runs": [summary...]}
//   GET  /runs/{id}            summary
//   POST /runs/{id}/cancel     summary
//   GET  /runs/{id}/plan       plan document
//   GET  /runs/{id}/trace      trace CSV
//   GET  /runs/{id}/record     run document
class HttpFrontend {
public:
  explicit HttpFrontend(PlanningService& service);
  ~HttpFrontend();

  // Binds and returns the port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop().
  void serve();
  void stop();

private:
  PlanningService& service_;
  std::unique_ptr<httplib::Server> server_;
};

} // namespace hopper

#endif
