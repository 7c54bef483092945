#include "hopper/service.h"

#include <charconv>
#include <cstdlib>
#include <fmt/format.h>

#include <httplib.h>
#include <json.hpp>

namespace hopper {

using json = nlohmann::json;

namespace {

json parse_object(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseErrorCode::malformed, "", e.what());
  }
  if (!doc.is_object()) {
    throw ParseError(ParseErrorCode::wrong_type, "", "expected an object");
  }
  return doc;
}

void allow_only(const json& obj,
                const std::string& path,
                std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) {
    throw ParseError(ParseErrorCode::wrong_type, path, "expected an object");
  }
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const auto k : keys) {
      known = known || key == k;
    }
    if (!known) {
      throw ParseError(ParseErrorCode::unknown_field,
                       path + "/" + key,
                       fmt::format("unknown field '{}'", key));
    }
  }
}

template <class T>
T get_as(const json& obj, const std::string& key, const std::string& path) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorCode::wrong_type, path + "/" + key, e.what());
  }
}

// Numeric suffix of ids like "run-000012".
std::uint64_t id_number(const std::string& id) {
  const auto dash = id.rfind('-');
  std::uint64_t value = 0;
  if (dash != std::string::npos) {
    std::from_chars(id.data() + dash + 1, id.data() + id.size(), value);
  }
  return value;
}

RunSummary summary_of(const RunRecord& record, Km best_km) {
  RunSummary s;
  s.id = record.id;
  s.instance = record.instance;
  s.phase = record.phase;
  s.iterations = record.iterations;
  s.elapsed_seconds = record.elapsed_seconds;
  s.initial_scalar = record.initial_scalar;
  s.best_scalar = record.best_scalar;
  s.improvement_percent = record.improvement_percent();
  s.initial_objective = record.initial_objective;
  s.best_objective = record.best_objective;
  s.best_km = best_km;
  s.error = record.error;
  return s;
}

} // namespace

namespace {

RunParams run_params_from(const json& doc, RunParams params);

} // namespace

ServiceConfig parse_service_config(std::string_view text) {
  const json doc = parse_object(text);
  allow_only(doc, "", {"host", "port", "run_dir", "max_concurrent_runs", "run"});
  ServiceConfig config;
  if (doc.contains("host")) {
    config.host = get_as<std::string>(doc, "host", "");
  }
  if (doc.contains("port")) {
    config.port = get_as<int>(doc, "port", "");
  }
  if (doc.contains("run_dir")) {
    config.run_dir = get_as<std::string>(doc, "run_dir", "");
  }
  if (doc.contains("max_concurrent_runs")) {
    config.max_concurrent_runs =
      get_as<std::size_t>(doc, "max_concurrent_runs", "");
  }
  if (doc.contains("run")) {
    config.run_defaults = run_params_from(doc["run"], {});
  }
  if (config.max_concurrent_runs == 0) {
    throw ParseError(ParseErrorCode::invalid_value,
                     "/max_concurrent_runs",
                     "at least one concurrent run is required");
  }
  return config;
}

ServiceConfig load_service_config_from_env() {
  if (const char* path = std::getenv(config_env_var); path && *path) {
    return parse_service_config(read_file(path));
  }
  return {};
}

RunParams parse_run_params(std::string_view text, RunParams base) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    validate(base.anneal);
    return base;
  }
  return run_params_from(parse_object(text), std::move(base));
}

namespace {

RunParams run_params_from(const json& doc, RunParams params) {
  if (doc.is_null()) {
    validate(params.anneal);
    return params;
  }
  allow_only(doc, "", {"insertion", "anneal"});

  if (doc.contains("insertion")) {
    const auto& ins = doc["insertion"];
    allow_only(ins, "/insertion", {"seed_strategy", "truck_strategy", "rng_seed"});
    if (ins.contains("seed_strategy")) {
      const auto s = get_as<std::string>(ins, "seed_strategy", "/insertion");
      auto parsed = parse_seed_strategy(s);
      if (!parsed) {
        throw ParseError(ParseErrorCode::invalid_value,
                         "/insertion/seed_strategy",
                         fmt::format("unknown seed strategy '{}'", s));
      }
      params.insertion.seed_strategy = *parsed;
    }
    if (ins.contains("truck_strategy")) {
      const auto s = get_as<std::string>(ins, "truck_strategy", "/insertion");
      auto parsed = parse_truck_strategy(s);
      if (!parsed) {
        throw ParseError(ParseErrorCode::invalid_value,
                         "/insertion/truck_strategy",
                         fmt::format("unknown truck strategy '{}'", s));
      }
      params.insertion.truck_strategy = *parsed;
    }
    if (ins.contains("rng_seed")) {
      params.insertion.rng_seed =
        get_as<std::uint64_t>(ins, "rng_seed", "/insertion");
    }
  }

  if (doc.contains("anneal")) {
    const auto& an = doc["anneal"];
    allow_only(an,
               "/anneal",
               {"max_iterations",
                "max_wall_seconds",
                "initial_temp",
                "cooling_factor",
                "steps_per_temp",
                "rng_seed",
                "move_weights",
                "trace_stride"});
    auto& a = params.anneal;
    if (an.contains("max_iterations")) {
      a.max_iterations = get_as<std::uint64_t>(an, "max_iterations", "/anneal");
    }
    if (an.contains("max_wall_seconds")) {
      a.max_wall_seconds = get_as<double>(an, "max_wall_seconds", "/anneal");
    }
    if (an.contains("initial_temp") && !an["initial_temp"].is_null()) {
      a.initial_temp = get_as<double>(an, "initial_temp", "/anneal");
    }
    if (an.contains("cooling_factor")) {
      a.cooling_factor = get_as<double>(an, "cooling_factor", "/anneal");
    }
    if (an.contains("steps_per_temp") && !an["steps_per_temp"].is_null()) {
      a.steps_per_temp = get_as<std::uint64_t>(an, "steps_per_temp", "/anneal");
    }
    if (an.contains("rng_seed")) {
      a.rng_seed = get_as<std::uint64_t>(an, "rng_seed", "/anneal");
    }
    if (an.contains("move_weights")) {
      const auto w = get_as<std::vector<double>>(an, "move_weights", "/anneal");
      if (w.size() != move_kind_count) {
        throw ParseError(ParseErrorCode::invalid_value,
                         "/anneal/move_weights",
                         fmt::format("expected {} weights", move_kind_count));
      }
      std::copy(w.begin(), w.end(), a.move_weights.begin());
    }
    if (an.contains("trace_stride")) {
      a.trace_stride = get_as<std::uint64_t>(an, "trace_stride", "/anneal");
    }
  }
  validate(params.anneal);
  return params;
}

} // namespace

std::string summary_json(const RunSummary& s) {
  nlohmann::ordered_json doc;
  doc["id"] = s.id;
  doc["instance"] = s.instance;
  doc["phase"] = to_string(s.phase);
  doc["iterations"] = s.iterations;
  doc["elapsed_seconds"] = s.elapsed_seconds;
  doc["initial_scalar"] = s.initial_scalar;
  doc["best_scalar"] = s.best_scalar;
  doc["improvement_percent"] = s.improvement_percent;
  doc["initial_objective"] = {{"delivered", s.initial_objective.delivered},
                              {"cost", s.initial_objective.cost}};
  doc["best_objective"] = {{"delivered", s.best_objective.delivered},
                           {"cost", s.best_objective.cost}};
  doc["best_km"] = s.best_km;
  if (!s.error.empty()) {
    doc["error"] = s.error;
  }
  return doc.dump();
}

struct PlanningService::Run {
  std::string id;
  std::string instance_id;
  std::shared_ptr<const Instance> instance;
  RunParams params;
  std::stop_source stop;

  mutable std::mutex mutex;
  std::shared_ptr<const RunSummary> snapshot;
  std::optional<std::string> plan_document;
  std::optional<std::string> trace_csv;
  std::optional<std::string> record_document;

  std::shared_ptr<const RunSummary> current() const {
    std::lock_guard lock(mutex);
    return snapshot;
  }
};

PlanningService::PlanningService(ServiceConfig config)
  : config_(std::move(config)) {
  std::filesystem::create_directories(config_.run_dir / "instances");
  std::filesystem::create_directories(config_.run_dir / "runs");
  restore();
  for (std::size_t i = 0; i < config_.max_concurrent_runs; ++i) {
    workers_.emplace_back([this](std::stop_token stop) { worker_loop(stop); });
  }
}

PlanningService::~PlanningService() {
  {
    std::lock_guard lock(mutex_);
    for (auto& [_, run] : runs_) {
      run->stop.request_stop();
    }
  }
  for (auto& w : workers_) {
    w.request_stop();
  }
  changed_.notify_all();
  workers_.clear();
}

void PlanningService::restore() {
  for (const auto& entry :
       std::filesystem::directory_iterator(config_.run_dir / "instances")) {
    if (entry.path().extension() != ".json") {
      continue;
    }
    auto document = read_file(entry.path());
    auto instance = std::make_shared<const Instance>(parse_instance(document));
    const auto id = entry.path().stem().string();
    instances_[id] = std::move(instance);
    instance_documents_[id] = std::move(document);
    next_instance_ = std::max(next_instance_, id_number(id) + 1);
  }

  for (const auto& entry :
       std::filesystem::directory_iterator(config_.run_dir / "runs")) {
    const auto record_path = entry.path() / "run.json";
    if (!entry.is_directory() || !std::filesystem::exists(record_path)) {
      continue;
    }
    auto record = parse_run(read_file(record_path));
    auto run = std::make_shared<Run>();
    run->id = record.id;
    run->instance_id = record.instance;
    if (auto it = instances_.find(record.instance); it != instances_.end()) {
      run->instance = it->second;
    }
    run->params = {record.insertion, record.anneal};
    Km best_km = 0;
    if (!is_terminal(record.phase)) {
      // Interrupted by a shutdown before it finished.
      record.phase = RunPhase::failed;
      record.error = "interrupted by service restart";
      run->record_document = serialize_run(record);
    } else {
      run->record_document = read_file(record_path);
      run->trace_csv = trace_to_csv(record.trace);
      const auto plan_path = entry.path() / record.plan;
      if (!record.plan.empty() && std::filesystem::exists(plan_path)) {
        run->plan_document = read_file(plan_path);
        if (run->instance) {
          best_km = plan_km(parse_plan(*run->plan_document, *run->instance),
                            *run->instance);
        }
      }
    }
    run->snapshot = std::make_shared<const RunSummary>(summary_of(record, best_km));
    next_run_ = std::max(next_run_, id_number(record.id) + 1);
    runs_[run->id] = std::move(run);
  }
}

std::string PlanningService::create_instance(std::string_view document) {
  auto instance = std::make_shared<const Instance>(parse_instance(document));
  std::lock_guard lock(mutex_);
  const auto id = fmt::format("inst-{:06}", next_instance_++);
  write_file_atomic(config_.run_dir / "instances" / (id + ".json"), document);
  instances_[id] = std::move(instance);
  instance_documents_[id] = std::string(document);
  return id;
}

std::optional<std::string> PlanningService::get_instance(
  const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = instance_documents_.find(id);
  if (it == instance_documents_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::vector<std::string> PlanningService::list_instances() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : instances_) {
    ids.push_back(id);
  }
  return ids;
}

std::string PlanningService::start_run(const std::string& instance_id,
                                       const RunParams& params) {
  validate(params.anneal);
  auto run = std::make_shared<Run>();
  {
    std::lock_guard lock(mutex_);
    auto it = instances_.find(instance_id);
    if (it == instances_.end()) {
      throw NotFound(fmt::format("unknown instance '{}'", instance_id));
    }
    run->id = fmt::format("run-{:06}", next_run_++);
    run->instance_id = instance_id;
    run->instance = it->second;
    run->params = params;
    RunSummary summary;
    summary.id = run->id;
    summary.instance = instance_id;
    run->snapshot = std::make_shared<const RunSummary>(std::move(summary));
    runs_[run->id] = run;
    queue_.push_back(run);
  }
  persist(*run);
  changed_.notify_all();
  return run->id;
}

std::shared_ptr<PlanningService::Run> PlanningService::find_run(
  const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = runs_.find(id);
  return it == runs_.end() ? nullptr : it->second;
}

std::optional<RunSummary> PlanningService::get_run(const std::string& id) const {
  auto run = find_run(id);
  if (!run) {
    return std::nullopt;
  }
  return *run->current();
}

std::vector<RunSummary> PlanningService::list_runs() const {
  std::vector<std::shared_ptr<Run>> runs;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [_, run] : runs_) {
      runs.push_back(run);
    }
  }
  std::vector<RunSummary> out;
  for (const auto& run : runs) {
    out.push_back(*run->current());
  }
  return out;
}

bool PlanningService::cancel_run(const std::string& id) {
  auto run = find_run(id);
  if (!run || is_terminal(run->current()->phase)) {
    return false;
  }
  run->stop.request_stop();
  return true;
}

std::optional<std::string> PlanningService::run_plan(const std::string& id) const {
  auto run = find_run(id);
  if (!run) {
    return std::nullopt;
  }
  std::lock_guard lock(run->mutex);
  return run->plan_document;
}

std::optional<std::string> PlanningService::run_trace_csv(
  const std::string& id) const {
  auto run = find_run(id);
  if (!run) {
    return std::nullopt;
  }
  std::lock_guard lock(run->mutex);
  return run->trace_csv;
}

std::optional<std::string> PlanningService::run_record(
  const std::string& id) const {
  auto run = find_run(id);
  if (!run) {
    return std::nullopt;
  }
  std::lock_guard lock(run->mutex);
  return run->record_document;
}

bool PlanningService::wait(const std::string& id,
                           std::chrono::milliseconds timeout) const {
  auto run = find_run(id);
  if (!run) {
    return false;
  }
  std::unique_lock lock(mutex_);
  return changed_.wait_for(lock, timeout, [&] {
    return is_terminal(run->current()->phase);
  });
}

void PlanningService::publish(Run& run, RunSummary summary) {
  {
    std::lock_guard lock(run.mutex);
    run.snapshot = std::make_shared<const RunSummary>(std::move(summary));
  }
  {
    // Pairs with wait() so a waiter cannot miss the update.
    std::lock_guard lock(mutex_);
  }
  changed_.notify_all();
}

void PlanningService::persist(const Run& run) const {
  const auto dir = config_.run_dir / "runs" / run.id;
  std::filesystem::create_directories(dir);
  std::optional<std::string> plan;
  std::optional<std::string> record;
  {
    std::lock_guard lock(run.mutex);
    plan = run.plan_document;
    record = run.record_document;
  }
  if (plan) {
    write_file_atomic(dir / "plan.json", *plan);
  }
  if (!record) {
    RunRecord r;
    r.id = run.id;
    r.instance = run.instance_id;
    r.phase = run.current()->phase;
    r.insertion = run.params.insertion;
    r.anneal = run.params.anneal;
    record = serialize_run(r);
  }
  write_file_atomic(dir / "run.json", *record);
}

void PlanningService::worker_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    std::shared_ptr<Run> run;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, stop, [&] { return !queue_.empty(); });
      if (queue_.empty()) {
        return;
      }
      run = queue_.front();
      queue_.pop_front();
    }
    execute(*run);
  }
}

void PlanningService::execute(Run& run) {
  const auto& instance = *run.instance;
  RunSummary summary = *run.current();
  RunRecord record;
  record.id = run.id;
  record.instance = run.instance_id;
  record.insertion = run.params.insertion;
  record.anneal = run.params.anneal;

  try {
    summary.phase = RunPhase::constructing;
    publish(run, summary);

    auto built = build_initial(instance, run.params.insertion);
    const auto initial_objective = objective_of(built.plan, instance);
    summary.initial_objective = initial_objective;
    summary.best_objective = initial_objective;
    summary.initial_scalar = scalarize(initial_objective, instance);
    summary.best_scalar = summary.initial_scalar;
    summary.best_km = plan_km(built.plan, instance);

    AnnealResult result;
    if (run.stop.stop_requested()) {
      result.best = built.plan;
      result.initial_scalar = summary.initial_scalar;
      result.best_scalar = summary.initial_scalar;
      result.cancelled = true;
    } else {
      summary.phase = RunPhase::annealing;
      publish(run, summary);
      AnnealControl control;
      control.stop = run.stop.get_token();
      control.on_progress = [&](const AnnealProgress& p) {
        RunSummary live = summary;
        live.iterations = p.iteration;
        live.elapsed_seconds = p.elapsed;
        live.best_scalar = p.best;
        live.improvement_percent =
          p.initial == 0 ? 0 : 100.0 * (p.initial - p.best) / p.initial;
        live.best_objective = objective_of(*p.best_plan, instance);
        live.best_km = plan_km(*p.best_plan, instance);
        publish(run, std::move(live));
      };
      result = anneal(built.plan, instance, run.params.anneal, control);
    }

    record.phase = result.cancelled ? RunPhase::cancelled : RunPhase::done;
    record.iterations = result.iterations;
    record.initial_scalar = result.initial_scalar;
    record.best_scalar = result.best_scalar;
    record.initial_objective = initial_objective;
    record.best_objective = objective_of(result.best, instance);
    record.plan = "plan.json";
    record.trace = result.trace;
    record.elapsed_seconds = summary.elapsed_seconds;
    if (!result.trace.rows.empty()) {
      record.elapsed_seconds = result.trace.rows.back().elapsed;
    }
    {
      std::lock_guard lock(run.mutex);
      run.plan_document = serialize_plan(result.best, instance);
      run.trace_csv = trace_to_csv(result.trace);
      run.record_document = serialize_run(record);
    }
    persist(run);
    publish(run, summary_of(record, plan_km(result.best, instance)));
  } catch (const std::exception& e) {
    record.phase = RunPhase::failed;
    record.error = e.what();
    {
      std::lock_guard lock(run.mutex);
      run.record_document = serialize_run(record);
    }
    try {
      persist(run);
    } catch (...) {
    }
    publish(run, summary_of(record, 0));
  }
}

HttpFrontend::HttpFrontend(PlanningService& service)
  : service_(service), server_(std::make_unique<httplib::Server>()) {
  using httplib::Request;
  using httplib::Response;

  auto error = [](Response& res, int status, const std::string& message,
                  const std::string& code = "", const std::string& path = "") {
    json body{{"error", message}};
    if (!code.empty()) {
      body["code"] = code;
    }
    if (!path.empty()) {
      body["path"] = path;
    }
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  server_->Post("/instances", [this, error](const Request& req, Response& res) {
    try {
      const auto id = service_.create_instance(req.body);
      res.status = 201;
      res.set_content(json{{"id", id}}.dump(), "application/json");
    } catch (const ParseError& e) {
      error(res, 400, e.what(), to_string(e.code()), e.path());
    }
  });

  server_->Get("/instances", [this](const Request&, Response& res) {
    res.set_content(json{{"instances", service_.list_instances()}}.dump(),
                    "application/json");
  });

  server_->Get(R"(/instances/([^/]+))",
               [this, error](const Request& req, Response& res) {
                 if (auto doc = service_.get_instance(req.matches[1])) {
                   res.set_content(*doc, "application/json");
                 } else {
                   error(res, 404, "instance not found");
                 }
               });

  server_->Post("/runs", [this, error](const Request& req, Response& res) {
    try {
      const json body = json::parse(req.body);
      if (!body.is_object() || !body.contains("instance") ||
          !body["instance"].is_string()) {
        error(res, 400, "body needs an 'instance' id", "missing-field", "/instance");
        return;
      }
      for (const auto& [key, _] : body.items()) {
        if (key != "instance" && key != "params") {
          error(res, 400, "unknown field '" + key + "'", "unknown-field", "/" + key);
          return;
        }
      }
      const auto params = parse_run_params(
        body.contains("params") ? body["params"].dump() : std::string(),
        service_.config().run_defaults);
      const auto id = service_.start_run(body["instance"].get<std::string>(), params);
      res.status = 201;
      res.set_content(json{{"id", id}}.dump(), "application/json");
    } catch (const NotFound& e) {
      error(res, 404, e.what());
    } catch (const ParseError& e) {
      error(res, 400, e.what(), to_string(e.code()), e.path());
    } catch (const ConfigError& e) {
      error(res, 400, e.what(), "invalid-value");
    } catch (const json::exception& e) {
      error(res, 400, e.what(), "malformed");
    }
  });

  server_->Get("/runs", [this](const Request&, Response& res) {
    std::string body = "{\"runs\":[";
    bool first = true;
    for (const auto& s : service_.list_runs()) {
      body += (first ? "" : ",") + summary_json(s);
      first = false;
    }
    body += "]}";
    res.set_content(body, "application/json");
  });

  server_->Get(R"(/runs/([^/]+))", [this, error](const Request& req, Response& res) {
    if (auto s = service_.get_run(req.matches[1])) {
      res.set_content(summary_json(*s), "application/json");
    } else {
      error(res, 404, "run not found");
    }
  });

  server_->Post(R"(/runs/([^/]+)/cancel)",
                [this, error](const Request& req, Response& res) {
                  const std::string id = req.matches[1];
                  auto s = service_.get_run(id);
                  if (!s) {
                    error(res, 404, "run not found");
                    return;
                  }
                  service_.cancel_run(id);
                  res.status = 202;
                  res.set_content(summary_json(*service_.get_run(id)),
                                  "application/json");
                });

  auto artifact = [this, error](auto getter, const char* type) {
    return [this, error, getter, type](const Request& req, Response& res) {
      const std::string id = req.matches[1];
      if (!service_.get_run(id)) {
        error(res, 404, "run not found");
        return;
      }
      if (auto doc = (service_.*getter)(id)) {
        res.set_content(*doc, type);
      } else {
        error(res, 409, "run has not finished");
      }
    };
  };
  server_->Get(R"(/runs/([^/]+)/plan)",
               artifact(&PlanningService::run_plan, "application/json"));
  server_->Get(R"(/runs/([^/]+)/trace)",
               artifact(&PlanningService::run_trace_csv, "text/csv"));
  server_->Get(R"(/runs/([^/]+)/record)",
               artifact(&PlanningService::run_record, "application/json"));
}

HttpFrontend::~HttpFrontend() {
  stop();
}

int HttpFrontend::bind(const std::string& host, int port) {
  if (port == 0) {
    return server_->bind_to_any_port(host);
  }
  return server_->bind_to_port(host, port) ? port : -1;
}

void HttpFrontend::serve() {
  server_->listen_after_bind();
}

void HttpFrontend::stop() {
  if (server_) {
    server_->stop();
  }
}

} // namespace hopper
