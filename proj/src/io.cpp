#include "hopper/io.h"

#include <atomic>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

namespace hopper {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* to_string(ParseErrorCode code) {
  switch (code) {
  case ParseErrorCode::malformed:
    return "malformed";
  case ParseErrorCode::unsupported_version:
    return "unsupported-version";
  case ParseErrorCode::unknown_field:
    return "unknown-field";
  case ParseErrorCode::missing_field:
    return "missing-field";
  case ParseErrorCode::wrong_type:
    return "wrong-type";
  case ParseErrorCode::missing_matrix_entry:
    return "missing-matrix-entry";
  case ParseErrorCode::negative_quantity:
    return "negative-quantity";
  case ParseErrorCode::unknown_reference:
    return "unknown-reference";
  case ParseErrorCode::duplicate_id:
    return "duplicate-id";
  case ParseErrorCode::unsorted_rate_bands:
    return "unsorted-rate-bands";
  case ParseErrorCode::invalid_value:
    return "invalid-value";
  }
  return "unknown";
}

ParseError::ParseError(ParseErrorCode code,
                       std::string path,
                       const std::string& message)
  : std::runtime_error(fmt::format("{} at {}: {}",
                                   to_string(code),
                                   path.empty() ? "/" : path,
                                   message)),
    code_(code),
    path_(std::move(path)) {
}

namespace {

// A JSON value together with its pointer path, for diagnostics.
class Node {
public:
  Node(const json& value, std::string path)
    : value_(&value), path_(std::move(path)) {
  }

  const std::string& path() const { return path_; }
  const json& raw() const { return *value_; }
  bool is_null() const { return value_->is_null(); }

  [[noreturn]] void fail(ParseErrorCode code, const std::string& msg) const {
    throw ParseError(code, path_, msg);
  }

  void expect_object() const {
    if (!value_->is_object()) {
      fail(ParseErrorCode::wrong_type, "expected an object");
    }
  }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    expect_object();
    for (const auto& [key, _] : value_->items()) {
      bool known = false;
      for (const auto k : keys) {
        known = known || key == k;
      }
      if (!known) {
        throw ParseError(ParseErrorCode::unknown_field,
                         path_ + "/" + key,
                         fmt::format("field '{}' is not part of format "
                                     "version {}",
                                     key,
                                     format_version));
      }
    }
  }

  std::optional<Node> find(const std::string& key) const {
    expect_object();
    auto it = value_->find(key);
    if (it == value_->end()) {
      return std::nullopt;
    }
    return Node(*it, path_ + "/" + key);
  }

  Node at(const std::string& key) const {
    auto n = find(key);
    if (!n) {
      throw ParseError(ParseErrorCode::missing_field,
                       path_ + "/" + key,
                       fmt::format("missing required field '{}'", key));
    }
    return *n;
  }

  std::size_t size() const {
    if (!value_->is_array()) {
      fail(ParseErrorCode::wrong_type, "expected an array");
    }
    return value_->size();
  }

  Node operator[](std::size_t i) const {
    return Node((*value_)[i], fmt::format("{}/{}", path_, i));
  }

  std::string text() const {
    if (!value_->is_string()) {
      fail(ParseErrorCode::wrong_type, "expected a string");
    }
    return value_->get<std::string>();
  }

  double number() const {
    if (!value_->is_number()) {
      fail(ParseErrorCode::wrong_type, "expected a number");
    }
    return value_->get<double>();
  }

  long long integer() const {
    if (!value_->is_number_integer()) {
      fail(ParseErrorCode::wrong_type, "expected an integer");
    }
    return value_->get<long long>();
  }

  std::uint64_t unsigned_integer() const {
    if (!value_->is_number_unsigned()) {
      fail(ParseErrorCode::wrong_type, "expected a nonnegative integer");
    }
    return value_->get<std::uint64_t>();
  }

  bool boolean() const {
    if (!value_->is_boolean()) {
      fail(ParseErrorCode::wrong_type, "expected a boolean");
    }
    return value_->get<bool>();
  }

private:
  const json* value_;
  std::string path_;
};

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseErrorCode::malformed, "", e.what());
  }
}

void check_header(const Node& root, std::string_view format) {
  root.expect_object();
  const auto f = root.at("format");
  if (f.text() != format) {
    f.fail(ParseErrorCode::invalid_value,
           fmt::format("expected format '{}', got '{}'", format, f.text()));
  }
  const auto v = root.at("format_version");
  const auto version = v.integer();
  if (version != format_version) {
    v.fail(ParseErrorCode::unsupported_version,
           fmt::format("format_version {} is not supported (expected {})",
                       version,
                       format_version));
  }
}

// Maps external ids to indices, rejecting duplicates.
class IdTable {
public:
  void add(const std::string& id, const Node& where, const char* what) {
    if (!index_.emplace(id, index_.size()).second) {
      where.fail(ParseErrorCode::duplicate_id,
                 fmt::format("duplicate {} id '{}'", what, id));
    }
  }

  Index resolve(const Node& ref, const char* what) const {
    const auto id = ref.text();
    auto it = index_.find(id);
    if (it == index_.end()) {
      ref.fail(ParseErrorCode::unknown_reference,
               fmt::format("unknown {} '{}'", what, id));
    }
    return it->second;
  }

private:
  std::map<std::string, Index> index_;
};

Matrix parse_matrix(const Node& node, std::size_t n) {
  node.allow_only({"full", "upper"});
  const auto full = node.find("full");
  const auto upper = node.find("upper");
  if (full.has_value() == upper.has_value()) {
    node.fail(ParseErrorCode::invalid_value,
              "give exactly one of 'full' or 'upper'");
  }
  Matrix m(n);
  if (full) {
    if (full->size() < n) {
      (*full).fail(ParseErrorCode::missing_matrix_entry,
                   fmt::format("expected {} rows, found {}", n, full->size()));
    }
    if (full->size() > n) {
      (*full).fail(ParseErrorCode::invalid_value,
                   fmt::format("expected {} rows, found {}", n, full->size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = (*full)[i];
      if (row.size() != n) {
        row.fail(row.size() < n ? ParseErrorCode::missing_matrix_entry
                                : ParseErrorCode::invalid_value,
                 fmt::format("expected {} entries, found {}", n, row.size()));
      }
      for (std::size_t j = 0; j < n; ++j) {
        m(i, j) = row[j].number();
      }
    }
    return m;
  }
  if (upper->size() < n) {
    (*upper).fail(ParseErrorCode::missing_matrix_entry,
                  fmt::format("expected {} rows, found {}", n, upper->size()));
  }
  if (upper->size() > n) {
    (*upper).fail(ParseErrorCode::invalid_value,
                  fmt::format("expected {} rows, found {}", n, upper->size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = (*upper)[i];
    const std::size_t expected = n - i;
    if (row.size() != expected) {
      row.fail(row.size() < expected ? ParseErrorCode::missing_matrix_entry
                                     : ParseErrorCode::invalid_value,
               fmt::format("upper-triangular row {} needs {} entries "
                           "starting on the diagonal, found {}",
                           i,
                           expected,
                           row.size()));
    }
    for (std::size_t k = 0; k < expected; ++k) {
      const double v = row[k].number();
      m(i, i + k) = v;
      m(i + k, i) = v;
    }
  }
  return m;
}

ordered_json matrix_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    ordered_json row = ordered_json::array();
    for (std::size_t j = 0; j < m.size(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return ordered_json{{"full", std::move(rows)}};
}

double rounded(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

} // namespace

Instance parse_instance(std::string_view text) {
  const json doc = parse_json(text);
  const Node root(doc, "");
  check_header(root, "hopper-instance");
  root.allow_only({"format",
                   "format_version",
                   "feeds",
                   "customers",
                   "orders",
                   "trucks",
                   "distance",
                   "travel_time",
                   "service_time",
                   "cost",
                   "horizon_days",
                   "shortfall_penalty"});

  Instance instance;
  IdTable feed_ids;
  IdTable customer_ids;
  IdTable order_ids;
  IdTable truck_ids;

  const auto feeds = root.at("feeds");
  for (std::size_t i = 0; i < feeds.size(); ++i) {
    const auto f = feeds[i];
    f.allow_only({"id", "name"});
    Feed feed{f.at("id").text(), ""};
    if (auto name = f.find("name")) {
      feed.name = name->text();
    }
    feed_ids.add(feed.id, f.at("id"), "feed");
    instance.feeds.push_back(std::move(feed));
  }

  const auto customers = root.at("customers");
  for (std::size_t i = 0; i < customers.size(); ++i) {
    const auto c = customers[i];
    c.allow_only({"id", "name", "position"});
    Customer customer{c.at("id").text(), "", std::nullopt};
    if (auto name = c.find("name")) {
      customer.name = name->text();
    }
    if (auto pos = c.find("position"); pos && !pos->is_null()) {
      if (pos->size() != 2) {
        pos->fail(ParseErrorCode::invalid_value, "position is [x, y]");
      }
      customer.position = Position{(*pos)[0].number(), (*pos)[1].number()};
    }
    customer_ids.add(customer.id, c.at("id"), "customer");
    instance.customers.push_back(std::move(customer));
  }

  const auto orders = root.at("orders");
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const auto o = orders[i];
    o.allow_only({"id", "customer", "feed", "quantity", "days_left"});
    Order order;
    order.id = o.at("id").text();
    order_ids.add(order.id, o.at("id"), "order");
    order.customer = customer_ids.resolve(o.at("customer"), "customer");
    order.feed = feed_ids.resolve(o.at("feed"), "feed");
    const auto q = o.at("quantity");
    order.quantity = q.number();
    if (!(order.quantity > 0)) {
      q.fail(ParseErrorCode::negative_quantity,
             fmt::format("order '{}' has quantity {}; it must be positive",
                         order.id,
                         order.quantity));
    }
    if (auto d = o.find("days_left")) {
      const auto days = d->integer();
      if (days < 0) {
        d->fail(ParseErrorCode::invalid_value,
                fmt::format("order '{}' has negative days_left", order.id));
      }
      order.days_left = static_cast<int>(days);
    }
    instance.orders.push_back(std::move(order));
  }

  const auto trucks = root.at("trucks");
  for (std::size_t i = 0; i < trucks.size(); ++i) {
    const auto t = trucks[i];
    t.allow_only({"id",
                  "hoppers",
                  "max_load",
                  "max_daily_hours",
                  "max_daily_km",
                  "reachable"});
    Truck truck;
    truck.id = t.at("id").text();
    truck_ids.add(truck.id, t.at("id"), "truck");
    const auto hoppers = t.at("hoppers");
    IdTable hopper_ids;
    for (std::size_t k = 0; k < hoppers.size(); ++k) {
      const auto h = hoppers[k];
      h.allow_only({"id", "capacity"});
      Hopper hopper{h.at("id").text(), h.at("capacity").number()};
      hopper_ids.add(hopper.id, h.at("id"), "hopper");
      if (!(hopper.capacity > 0)) {
        h.at("capacity").fail(ParseErrorCode::invalid_value,
                              "hopper capacity must be positive");
      }
      truck.hoppers.push_back(std::move(hopper));
    }
    truck.max_load = t.at("max_load").number();
    if (auto hours = t.find("max_daily_hours")) {
      truck.max_daily_hours = hours->number();
    }
    truck.max_daily_km = t.at("max_daily_km").number();
    truck.reachable.assign(instance.customers.size(), true);
    if (auto reach = t.find("reachable")) {
      truck.reachable.assign(instance.customers.size(), false);
      for (std::size_t k = 0; k < reach->size(); ++k) {
        truck.reachable[customer_ids.resolve((*reach)[k], "customer")] = true;
      }
    }
    instance.trucks.push_back(std::move(truck));
  }

  const std::size_t n = instance.customers.size() + 1;
  instance.distance = parse_matrix(root.at("distance"), n);
  instance.travel_time = parse_matrix(root.at("travel_time"), n);

  if (auto s = root.find("service_time")) {
    instance.service_time = s->number();
  }
  if (auto h = root.find("horizon_days")) {
    instance.horizon_days = static_cast<int>(h->integer());
  }
  if (auto w = root.find("shortfall_penalty"); w && !w->is_null()) {
    instance.shortfall_penalty = w->number();
  }

  const auto cost = root.at("cost");
  cost.allow_only({"unload_fee", "per_ton_fixed", "rate_bands"});
  instance.cost.unload_fee = cost.at("unload_fee").number();
  instance.cost.per_ton_fixed = cost.at("per_ton_fixed").number();
  const auto bands = cost.at("rate_bands");
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const auto band = bands[b];
    band.allow_only({"upper_km", "rate"});
    RateBand rb;
    const auto upper = band.at("upper_km");
    rb.upper_km = upper.is_null() ? infinite_km : upper.number();
    rb.rate = band.at("rate").number();
    if (!instance.cost.rate_bands.empty() &&
        !(rb.upper_km > instance.cost.rate_bands.back().upper_km)) {
      upper.fail(ParseErrorCode::unsorted_rate_bands,
                 "rate band upper_km values must be strictly increasing");
    }
    instance.cost.rate_bands.push_back(rb);
  }

  try {
    validate(instance);
  } catch (const std::exception& e) {
    throw ParseError(ParseErrorCode::invalid_value, "", e.what());
  }
  return instance;
}

std::string serialize_instance(const Instance& instance) {
  ordered_json doc;
  doc["format"] = "hopper-instance";
  doc["format_version"] = format_version;

  doc["feeds"] = ordered_json::array();
  for (const auto& f : instance.feeds) {
    doc["feeds"].push_back({{"id", f.id}, {"name", f.name}});
  }
  doc["customers"] = ordered_json::array();
  for (const auto& c : instance.customers) {
    ordered_json entry{{"id", c.id}, {"name", c.name}};
    if (c.position) {
      entry["position"] = {c.position->x, c.position->y};
    }
    doc["customers"].push_back(std::move(entry));
  }
  doc["orders"] = ordered_json::array();
  for (const auto& o : instance.orders) {
    doc["orders"].push_back({{"id", o.id},
                             {"customer", instance.customers[o.customer].id},
                             {"feed", instance.feeds[o.feed].id},
                             {"quantity", o.quantity},
                             {"days_left", o.days_left}});
  }
  doc["trucks"] = ordered_json::array();
  for (const auto& t : instance.trucks) {
    ordered_json hoppers = ordered_json::array();
    for (const auto& h : t.hoppers) {
      hoppers.push_back({{"id", h.id}, {"capacity", h.capacity}});
    }
    ordered_json reachable = ordered_json::array();
    for (Index c = 0; c < instance.customers.size(); ++c) {
      if (t.reachable[c]) {
        reachable.push_back(instance.customers[c].id);
      }
    }
    doc["trucks"].push_back({{"id", t.id},
                             {"hoppers", std::move(hoppers)},
                             {"max_load", t.max_load},
                             {"max_daily_hours", t.max_daily_hours},
                             {"max_daily_km", t.max_daily_km},
                             {"reachable", std::move(reachable)}});
  }
  doc["distance"] = matrix_json(instance.distance);
  doc["travel_time"] = matrix_json(instance.travel_time);
  doc["service_time"] = instance.service_time;

  ordered_json bands = ordered_json::array();
  for (const auto& b : instance.cost.rate_bands) {
    ordered_json entry;
    entry["upper_km"] =
      std::isfinite(b.upper_km) ? ordered_json(b.upper_km) : ordered_json();
    entry["rate"] = b.rate;
    bands.push_back(std::move(entry));
  }
  doc["cost"] = {{"unload_fee", instance.cost.unload_fee},
                 {"per_ton_fixed", instance.cost.per_ton_fixed},
                 {"rate_bands", std::move(bands)}};
  doc["horizon_days"] = instance.horizon_days;
  if (instance.shortfall_penalty) {
    doc["shortfall_penalty"] = *instance.shortfall_penalty;
  }
  return doc.dump(2) + "\n";
}

Plan parse_plan(std::string_view text, const Instance& instance) {
  const json doc = parse_json(text);
  const Node root(doc, "");
  check_header(root, "hopper-plan");
  root.allow_only({"format", "format_version", "days", "summary"});

  IdTable customer_ids;
  IdTable order_ids;
  IdTable truck_ids;
  const Node none(doc, "");
  for (const auto& c : instance.customers) {
    customer_ids.add(c.id, none, "customer");
  }
  for (const auto& o : instance.orders) {
    order_ids.add(o.id, none, "order");
  }
  for (const auto& t : instance.trucks) {
    truck_ids.add(t.id, none, "truck");
  }

  Plan plan;
  const auto days = root.at("days");
  long long last_day = 0;
  for (std::size_t i = 0; i < days.size(); ++i) {
    const auto d = days[i];
    d.allow_only({"day", "trucks"});
    const auto day_node = d.at("day");
    const auto day = day_node.integer();
    if (day <= last_day) {
      day_node.fail(ParseErrorCode::invalid_value,
                    "days must be listed in increasing order from 1");
    }
    last_day = day;
    plan.ensure_days(static_cast<std::size_t>(day), instance.trucks.size());
    auto& day_plan = plan.days[static_cast<std::size_t>(day - 1)];

    const auto trucks = d.at("trucks");
    std::set<Index> seen;
    for (std::size_t k = 0; k < trucks.size(); ++k) {
      const auto t = trucks[k];
      t.allow_only({"truck", "journeys"});
      const Index truck = truck_ids.resolve(t.at("truck"), "truck");
      if (!seen.insert(truck).second) {
        t.at("truck").fail(ParseErrorCode::duplicate_id,
                           "truck listed twice on one day");
      }
      IdTable hopper_ids;
      for (const auto& h : instance.trucks[truck].hoppers) {
        hopper_ids.add(h.id, none, "hopper");
      }
      const auto journeys = t.at("journeys");
      for (std::size_t j = 0; j < journeys.size(); ++j) {
        const auto jn = journeys[j];
        jn.allow_only({"stops", "loads"});
        Journey journey;
        const auto stops = jn.at("stops");
        for (std::size_t s = 0; s < stops.size(); ++s) {
          journey.stops.push_back(customer_ids.resolve(stops[s], "customer"));
        }
        const auto loads = jn.at("loads");
        for (std::size_t l = 0; l < loads.size(); ++l) {
          const auto a = loads[l];
          a.allow_only({"hopper", "order", "tons"});
          journey.loads.push_back({hopper_ids.resolve(a.at("hopper"), "hopper"),
                                   order_ids.resolve(a.at("order"), "order"),
                                   a.at("tons").number()});
        }
        day_plan.trucks[truck].push_back(std::move(journey));
      }
    }
  }
  return plan;
}

std::string serialize_plan(const Plan& plan, const Instance& instance) {
  check_structure(plan, instance);
  ordered_json doc;
  doc["format"] = "hopper-plan";
  doc["format_version"] = format_version;
  doc["days"] = ordered_json::array();
  for (std::size_t d = 0; d < plan.days.size(); ++d) {
    ordered_json trucks = ordered_json::array();
    const auto& day = plan.days[d];
    for (Index t = 0; t < day.trucks.size(); ++t) {
      if (day.trucks[t].empty()) {
        continue;
      }
      const auto& truck = instance.trucks[t];
      ordered_json journeys = ordered_json::array();
      for (const auto& j : day.trucks[t]) {
        ordered_json stops = ordered_json::array();
        for (const auto c : j.stops) {
          stops.push_back(instance.customers[c].id);
        }
        ordered_json loads = ordered_json::array();
        for (const auto& a : j.loads) {
          loads.push_back({{"hopper", truck.hoppers[a.hopper].id},
                           {"order", instance.orders[a.order].id},
                           {"tons", a.tons}});
        }
        journeys.push_back(
          {{"stops", std::move(stops)}, {"loads", std::move(loads)}});
      }
      trucks.push_back({{"truck", truck.id}, {"journeys", std::move(journeys)}});
    }
    doc["days"].push_back({{"day", d + 1}, {"trucks", std::move(trucks)}});
  }

  const auto cost = evaluate_cost(plan, instance);
  const auto objective = objective_of(plan, instance);
  doc["summary"] = {
    {"delivered_tons", rounded(objective.delivered, 4)},
    {"ordered_tons", rounded(instance.total_ordered(), 4)},
    {"total_km", rounded(plan_km(plan, instance), 3)},
    {"journeys", plan.journey_count()},
    {"cost",
     {{"unloading", rounded(cost.unloading, 4)},
      {"variable_transport", rounded(cost.variable_transport, 4)},
      {"fixed_transport", rounded(cost.fixed_transport, 4)},
      {"total_optimized", rounded(cost.total_optimized, 4)}}}};
  return doc.dump(2) + "\n";
}

const char* to_string(RunPhase phase) {
  switch (phase) {
  case RunPhase::queued:
    return "queued";
  case RunPhase::constructing:
    return "constructing";
  case RunPhase::annealing:
    return "annealing";
  case RunPhase::done:
    return "done";
  case RunPhase::cancelled:
    return "cancelled";
  case RunPhase::failed:
    return "failed";
  }
  return "unknown";
}

std::optional<RunPhase> parse_run_phase(std::string_view text) {
  for (auto p : {RunPhase::queued,
                 RunPhase::constructing,
                 RunPhase::annealing,
                 RunPhase::done,
                 RunPhase::cancelled,
                 RunPhase::failed}) {
    if (text == to_string(p)) {
      return p;
    }
  }
  return std::nullopt;
}

bool is_terminal(RunPhase phase) {
  return phase == RunPhase::done || phase == RunPhase::cancelled ||
         phase == RunPhase::failed;
}

double RunRecord::improvement_percent() const {
  if (initial_scalar == 0) {
    return 0;
  }
  return 100.0 * (initial_scalar - best_scalar) / initial_scalar;
}

namespace {

std::optional<MoveKind> parse_move_kind(std::string_view text) {
  for (std::size_t k = 1; k <= move_kind_count; ++k) {
    const auto kind = static_cast<MoveKind>(k);
    if (text == to_string(kind)) {
      return kind;
    }
  }
  return std::nullopt;
}

} // namespace

std::string serialize_run(const RunRecord& run) {
  ordered_json doc;
  doc["format"] = "hopper-run";
  doc["format_version"] = format_version;
  doc["id"] = run.id;
  doc["instance"] = run.instance;
  doc["phase"] = to_string(run.phase);
  doc["insertion"] = {{"seed_strategy", to_string(run.insertion.seed_strategy)},
                      {"truck_strategy", to_string(run.insertion.truck_strategy)},
                      {"rng_seed", run.insertion.rng_seed}};
  const auto& a = run.anneal;
  ordered_json anneal;
  anneal["max_iterations"] = a.max_iterations;
  anneal["max_wall_seconds"] = a.max_wall_seconds;
  anneal["initial_temp"] =
    a.initial_temp ? ordered_json(*a.initial_temp) : ordered_json();
  anneal["cooling_factor"] = a.cooling_factor;
  anneal["steps_per_temp"] =
    a.steps_per_temp ? ordered_json(*a.steps_per_temp) : ordered_json();
  anneal["rng_seed"] = a.rng_seed;
  anneal["move_weights"] = a.move_weights;
  anneal["trace_stride"] = a.trace_stride;
  doc["anneal"] = std::move(anneal);
  doc["summary"] = {
    {"iterations", run.iterations},
    {"elapsed_seconds", run.elapsed_seconds},
    {"initial_scalar", run.initial_scalar},
    {"best_scalar", run.best_scalar},
    {"improvement_percent", run.improvement_percent()},
    {"initial_objective",
     {{"delivered", run.initial_objective.delivered},
      {"cost", run.initial_objective.cost}}},
    {"best_objective",
     {{"delivered", run.best_objective.delivered},
      {"cost", run.best_objective.cost}}}};
  doc["plan"] = run.plan;
  ordered_json rows = ordered_json::array();
  for (const auto& r : run.trace.rows) {
    rows.push_back({r.iteration,
                    r.elapsed,
                    r.current,
                    r.best,
                    r.temperature,
                    to_string(r.move),
                    r.accepted});
  }
  doc["trace"] = std::move(rows);
  if (!run.error.empty()) {
    doc["error"] = run.error;
  }
  return doc.dump(2) + "\n";
}

RunRecord parse_run(std::string_view text) {
  const json doc = parse_json(text);
  const Node root(doc, "");
  check_header(root, "hopper-run");
  root.allow_only({"format",
                   "format_version",
                   "id",
                   "instance",
                   "phase",
                   "insertion",
                   "anneal",
                   "summary",
                   "plan",
                   "trace",
                   "error"});
  RunRecord run;
  run.id = root.at("id").text();
  run.instance = root.at("instance").text();
  const auto phase = root.at("phase");
  if (auto p = parse_run_phase(phase.text())) {
    run.phase = *p;
  } else {
    phase.fail(ParseErrorCode::invalid_value, "unknown run phase");
  }

  const auto ins = root.at("insertion");
  ins.allow_only({"seed_strategy", "truck_strategy", "rng_seed"});
  if (auto s = parse_seed_strategy(ins.at("seed_strategy").text())) {
    run.insertion.seed_strategy = *s;
  } else {
    ins.at("seed_strategy").fail(ParseErrorCode::invalid_value,
                                 "unknown seed strategy");
  }
  if (auto s = parse_truck_strategy(ins.at("truck_strategy").text())) {
    run.insertion.truck_strategy = *s;
  } else {
    ins.at("truck_strategy").fail(ParseErrorCode::invalid_value,
                                  "unknown truck strategy");
  }
  run.insertion.rng_seed = ins.at("rng_seed").unsigned_integer();

  const auto an = root.at("anneal");
  an.allow_only({"max_iterations",
                 "max_wall_seconds",
                 "initial_temp",
                 "cooling_factor",
                 "steps_per_temp",
                 "rng_seed",
                 "move_weights",
                 "trace_stride"});
  run.anneal.max_iterations = an.at("max_iterations").unsigned_integer();
  run.anneal.max_wall_seconds = an.at("max_wall_seconds").number();
  if (auto t = an.at("initial_temp"); !t.is_null()) {
    run.anneal.initial_temp = t.number();
  }
  run.anneal.cooling_factor = an.at("cooling_factor").number();
  if (auto s = an.at("steps_per_temp"); !s.is_null()) {
    run.anneal.steps_per_temp = s.unsigned_integer();
  }
  run.anneal.rng_seed = an.at("rng_seed").unsigned_integer();
  const auto weights = an.at("move_weights");
  if (weights.size() != move_kind_count) {
    weights.fail(ParseErrorCode::invalid_value,
                 fmt::format("expected {} move weights", move_kind_count));
  }
  for (std::size_t k = 0; k < move_kind_count; ++k) {
    run.anneal.move_weights[k] = weights[k].number();
  }
  run.anneal.trace_stride = an.at("trace_stride").unsigned_integer();

  const auto summary = root.at("summary");
  summary.allow_only({"iterations",
                      "elapsed_seconds",
                      "initial_scalar",
                      "best_scalar",
                      "improvement_percent",
                      "initial_objective",
                      "best_objective"});
  run.iterations = summary.at("iterations").unsigned_integer();
  run.elapsed_seconds = summary.at("elapsed_seconds").number();
  run.initial_scalar = summary.at("initial_scalar").number();
  run.best_scalar = summary.at("best_scalar").number();
  auto objective = [](const Node& n) {
    n.allow_only({"delivered", "cost"});
    return Objective{n.at("delivered").number(), n.at("cost").number()};
  };
  run.initial_objective = objective(summary.at("initial_objective"));
  run.best_objective = objective(summary.at("best_objective"));
  run.plan = root.at("plan").text();

  const auto rows = root.at("trace");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (r.size() != 7) {
      r.fail(ParseErrorCode::invalid_value, "trace rows have 7 columns");
    }
    TraceRow row;
    row.iteration = r[0].unsigned_integer();
    row.elapsed = r[1].number();
    row.current = r[2].number();
    row.best = r[3].number();
    row.temperature = r[4].number();
    if (auto m = parse_move_kind(r[5].text())) {
      row.move = *m;
    } else {
      r[5].fail(ParseErrorCode::invalid_value, "unknown move kind");
    }
    row.accepted = r[6].boolean();
    run.trace.rows.push_back(row);
  }
  if (auto e = root.find("error")) {
    run.error = e->text();
  }
  return run;
}

std::string trace_to_csv(const Trace& trace) {
  std::string out = "iteration,elapsed,current,best,temperature,move,accepted\n";
  for (const auto& r : trace.rows) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6g},{},{}\n",
                       r.iteration,
                       r.elapsed,
                       r.current,
                       r.best,
                       r.temperature,
                       to_string(r.move),
                       r.accepted ? 1 : 0);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(
      fmt::format("cannot open '{}' for reading", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content) {
  static std::atomic<unsigned long> counter{0};
  auto tmp = path;
  tmp += fmt::format(".tmp.{}.{}", ::getpid(), counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error(
        fmt::format("cannot open '{}' for writing", tmp.string()));
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
    }
  }
  std::filesystem::rename(tmp, path);
}

} // namespace hopper
