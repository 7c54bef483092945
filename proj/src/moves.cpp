#include <algorithm>
#include <map>
#include <numeric>

#include "hopper/annealing.h"
#include "hopper/insertion.h"

namespace hopper {

const char* to_string(MoveKind kind) {
  switch (kind) {
  case MoveKind::relocate_anywhere:
    return "relocate-anywhere";
  case MoveKind::relocate_same_truck_day:
    return "relocate-same-truck-day";
  case MoveKind::relocate_same_day:
    return "relocate-same-day";
  case MoveKind::swap_same_truck_day:
    return "swap-same-truck-day";
  case MoveKind::swap_anywhere:
    return "swap-anywhere";
  case MoveKind::swap_visit_order:
    return "swap-visit-order";
  case MoveKind::swap_between_trucks:
    return "swap-between-trucks";
  }
  return "unknown";
}

namespace {

struct Slot {
  std::size_t day = 0;
  Index truck = 0;
  std::size_t journey = 0;
  bool operator==(const Slot&) const = default;
};

struct Block {
  Slot slot;
  std::size_t position = 0;
  Index customer = 0;
};

std::vector<Block> blocks_of(const Plan& plan) {
  std::vector<Block> out;
  for (std::size_t d = 0; d < plan.days.size(); ++d) {
    const auto& trucks = plan.days[d].trucks;
    for (Index t = 0; t < trucks.size(); ++t) {
      for (std::size_t j = 0; j < trucks[t].size(); ++j) {
        const auto& stops = trucks[t][j].stops;
        for (std::size_t p = 0; p < stops.size(); ++p) {
          out.push_back({{d, t, j}, p, stops[p]});
        }
      }
    }
  }
  return out;
}

Journey& at(Plan& plan, const Slot& s) {
  return plan.days[s.day].trucks[s.truck][s.journey];
}

bool visits(const Journey& journey, Index customer) {
  return std::ranges::find(journey.stops, customer) != journey.stops.end();
}

// Removes the customer's loads from the journey, aggregated per order.
std::vector<LoadPiece> take_loads(Journey& journey,
                                  Index customer,
                                  const Instance& instance) {
  std::map<Index, Tons> tons;
  std::erase_if(journey.loads, [&](const HopperAssignment& a) {
    if (instance.orders[a.order].customer != customer) {
      return false;
    }
    tons[a.order] += a.tons;
    return true;
  });
  std::vector<LoadPiece> out;
  for (const auto& [order, t] : tons) {
    out.push_back({order, t});
  }
  return out;
}

// Repacks the journey from scratch with its current tons plus `extra`.
// Fails if anything is left over.
bool reload(Journey& journey,
            const Truck& truck,
            const std::vector<LoadPiece>& extra) {
  std::map<Index, Tons> tons;
  for (const auto& a : journey.loads) {
    tons[a.order] += a.tons;
  }
  for (const auto& p : extra) {
    tons[p.order] += p.tons;
  }
  std::vector<LoadPiece> pieces;
  for (const auto& [order, t] : tons) {
    pieces.push_back({order, t});
  }
  auto packed = load_hoppers(pieces, truck);
  if (packed.leftover > tons_epsilon) {
    return false;
  }
  journey.loads = std::move(packed.assignments);
  return true;
}

// Fills spare hoppers with undelivered tons of the journey's customers.
void top_up(Plan& plan, const Slot& slot, const Instance& instance) {
  auto& journey = at(plan, slot);
  const auto& truck = instance.trucks[slot.truck];
  const int day = static_cast<int>(slot.day) + 1;

  std::vector<Index> free;
  std::vector<bool> used(truck.hoppers.size(), false);
  for (const auto& a : journey.loads) {
    used[a.hopper] = true;
  }
  for (Index h = 0; h < truck.hoppers.size(); ++h) {
    if (!used[h]) {
      free.push_back(h);
    }
  }
  Tons capacity_left = truck.max_load - journey.load();
  if (free.empty() || capacity_left <= tons_epsilon) {
    return;
  }

  const auto delivered = delivered_by_order(plan, instance.orders.size());
  std::vector<LoadPiece> pieces;
  for (Index o = 0; o < instance.orders.size(); ++o) {
    const auto& order = instance.orders[o];
    const Tons outstanding = order.quantity - delivered[o];
    if (outstanding > tons_epsilon && order.deadline_day() >= day &&
        visits(journey, order.customer)) {
      pieces.push_back({o, outstanding});
    }
  }
  if (pieces.empty()) {
    return;
  }
  auto packed = load_hoppers(pieces, truck, free, capacity_left);
  journey.loads.insert(journey.loads.end(),
                       packed.assignments.begin(),
                       packed.assignments.end());
}

std::size_t cheapest_position(const Journey& journey,
                              Index customer,
                              const Instance& instance) {
  std::size_t best = journey.stops.size();
  Km best_cost = infinite_km;
  for (std::size_t pos = 0; pos <= journey.stops.size(); ++pos) {
    const auto cost = insertion_cost(journey, customer, pos, instance);
    if (cost && *cost < best_cost) {
      best_cost = *cost;
      best = pos;
    }
  }
  return best;
}

class MoveContext {
public:
  MoveContext(const Plan& plan, const Instance& instance, Rng& rng)
    : instance_(instance), rng_(rng), candidate_(plan) {
    const int horizon = instance.last_delivery_day();
    day_range_ = static_cast<std::size_t>(std::max(horizon, 1));
    candidate_.ensure_days(std::max(day_range_, candidate_.days.size()),
                           instance.trucks.size());
    blocks_ = blocks_of(candidate_);
  }

  std::optional<Plan> run(MoveKind kind) {
    bool ok = false;
    switch (kind) {
    case MoveKind::relocate_anywhere:
      ok = relocate_anywhere();
      break;
    case MoveKind::relocate_same_truck_day:
      ok = relocate_same_truck_day();
      break;
    case MoveKind::relocate_same_day:
      ok = relocate_same_day();
      break;
    case MoveKind::swap_same_truck_day:
      ok = swap_same_truck_day();
      break;
    case MoveKind::swap_anywhere:
      ok = swap_anywhere();
      break;
    case MoveKind::swap_visit_order:
      ok = swap_visit_order();
      break;
    case MoveKind::swap_between_trucks:
      ok = swap_between_trucks();
      break;
    }
    if (!ok) {
      return std::nullopt;
    }
    candidate_.normalize();
    if (!check_feasibility(candidate_, instance_).empty()) {
      return std::nullopt;
    }
    return std::move(candidate_);
  }

private:
  std::size_t journeys(std::size_t day, Index truck) const {
    return candidate_.days[day].trucks[truck].size();
  }

  const Block* random_block() {
    if (blocks_.empty()) {
      return nullptr;
    }
    return &blocks_[rng_.index(blocks_.size())];
  }

  // Journey index in [0, n], where n opens a new journey, excluding `skip`.
  std::optional<std::size_t> random_journey(std::size_t day,
                                            Index truck,
                                            std::optional<std::size_t> skip) {
    const std::size_t options = journeys(day, truck) + 1;
    if (!skip) {
      return rng_.index(options);
    }
    if (options < 2) {
      return std::nullopt;
    }
    std::size_t j = rng_.index(options - 1);
    return j >= *skip ? j + 1 : j;
  }

  bool relocate(const Block& block, const Slot& target) {
    if (target == block.slot) {
      return false;
    }
    auto& source = at(candidate_, block.slot);
    auto pieces = take_loads(source, block.customer, instance_);
    source.stops.erase(source.stops.begin() +
                       static_cast<long>(block.position));

    auto& list = candidate_.days[target.day].trucks[target.truck];
    if (target.journey == list.size()) {
      list.emplace_back();
    }
    auto& dest = list[target.journey];
    if (!instance_.trucks[target.truck].reachable[block.customer]) {
      return false;
    }
    if (!visits(dest, block.customer)) {
      const auto pos = cheapest_position(dest, block.customer, instance_);
      dest.stops.insert(dest.stops.begin() + static_cast<long>(pos),
                        block.customer);
    }
    if (!reload(dest, instance_.trucks[target.truck], pieces)) {
      return false;
    }
    top_up(candidate_, target, instance_);
    return true;
  }

  bool swap(const Block& a, const Block& b) {
    if (a.slot == b.slot) {
      return false;
    }
    auto& ja = at(candidate_, a.slot);
    auto& jb = at(candidate_, b.slot);
    if (visits(ja, b.customer) || visits(jb, a.customer)) {
      return false;
    }
    auto pieces_a = take_loads(ja, a.customer, instance_);
    auto pieces_b = take_loads(jb, b.customer, instance_);
    ja.stops[a.position] = b.customer;
    jb.stops[b.position] = a.customer;
    if (!reload(ja, instance_.trucks[a.slot.truck], pieces_b) ||
        !reload(jb, instance_.trucks[b.slot.truck], pieces_a)) {
      return false;
    }
    top_up(candidate_, a.slot, instance_);
    top_up(candidate_, b.slot, instance_);
    return true;
  }

  bool relocate_anywhere() {
    const Block* block = random_block();
    if (!block) {
      return false;
    }
    const std::size_t day = rng_.index(day_range_);
    const Index truck = rng_.index(instance_.trucks.size());
    const std::size_t journey = *random_journey(day, truck, std::nullopt);
    return relocate(*block, {day, truck, journey});
  }

  bool relocate_same_truck_day() {
    const Block* block = random_block();
    if (!block) {
      return false;
    }
    const auto& s = block->slot;
    const auto journey = random_journey(s.day, s.truck, s.journey);
    return journey && relocate(*block, {s.day, s.truck, *journey});
  }

  bool relocate_same_day() {
    const Block* block = random_block();
    if (!block) {
      return false;
    }
    const auto& s = block->slot;
    const Index truck = rng_.index(instance_.trucks.size());
    const auto journey = random_journey(
      s.day,
      truck,
      truck == s.truck ? std::optional<std::size_t>(s.journey) : std::nullopt);
    return journey && relocate(*block, {s.day, truck, *journey});
  }

  bool swap_same_truck_day() {
    const Block* a = random_block();
    if (!a) {
      return false;
    }
    std::vector<const Block*> partners;
    for (const auto& b : blocks_) {
      if (b.slot.day == a->slot.day && b.slot.truck == a->slot.truck &&
          b.slot.journey != a->slot.journey) {
        partners.push_back(&b);
      }
    }
    if (partners.empty()) {
      return false;
    }
    return swap(*a, *partners[rng_.index(partners.size())]);
  }

  bool swap_anywhere() {
    const Block* a = random_block();
    if (!a) {
      return false;
    }
    std::vector<const Block*> partners;
    for (const auto& b : blocks_) {
      if (!(b.slot == a->slot)) {
        partners.push_back(&b);
      }
    }
    if (partners.empty()) {
      return false;
    }
    return swap(*a, *partners[rng_.index(partners.size())]);
  }

  bool swap_visit_order() {
    std::vector<Slot> slots;
    for (std::size_t d = 0; d < candidate_.days.size(); ++d) {
      for (Index t = 0; t < instance_.trucks.size(); ++t) {
        for (std::size_t j = 0; j < journeys(d, t); ++j) {
          slots.push_back({d, t, j});
        }
      }
    }
    if (slots.empty()) {
      return false;
    }
    auto& journey = at(candidate_, slots[rng_.index(slots.size())]);
    const auto n = journey.stops.size();
    if (n < 2) {
      return false;
    }
    const std::size_t i = rng_.index(n);
    std::size_t k = rng_.index(n - 1);
    if (k >= i) {
      ++k;
    }
    std::swap(journey.stops[i], journey.stops[k]);
    return true;
  }

  bool swap_between_trucks() {
    std::vector<std::size_t> days;
    for (std::size_t d = 0; d < candidate_.days.size(); ++d) {
      std::size_t active = 0;
      for (Index t = 0; t < instance_.trucks.size(); ++t) {
        active += journeys(d, t) > 0 ? 1 : 0;
      }
      if (active >= 2) {
        days.push_back(d);
      }
    }
    if (days.empty()) {
      return false;
    }
    const std::size_t day = days[rng_.index(days.size())];
    std::vector<Index> trucks;
    for (Index t = 0; t < instance_.trucks.size(); ++t) {
      if (journeys(day, t) > 0) {
        trucks.push_back(t);
      }
    }
    const std::size_t first = rng_.index(trucks.size());
    std::size_t second = rng_.index(trucks.size() - 1);
    if (second >= first) {
      ++second;
    }

    auto pick = [&](Index truck) {
      const std::size_t j = rng_.index(journeys(day, truck));
      const auto& stops = candidate_.days[day].trucks[truck][j].stops;
      const std::size_t p = rng_.index(stops.size());
      return Block{{day, truck, j}, p, stops[p]};
    };
    const Block a = pick(trucks[first]);
    const Block b = pick(trucks[second]);
    return swap(a, b);
  }

  const Instance& instance_;
  Rng& rng_;
  Plan candidate_;
  std::size_t day_range_ = 1;
  std::vector<Block> blocks_;
};

} // namespace

std::optional<Plan> propose_move(MoveKind kind,
                                 const Plan& plan,
                                 const Instance& instance,
                                 Rng& rng) {
  return MoveContext(plan, instance, rng).run(kind);
}

} // namespace hopper
