#include "hdev/transport.hpp"

#include <algorithm>
#include <string>

#include "hdev/error.hpp"

namespace hdev {

TransportGraph::TransportGraph(std::vector<LocationId> locations, std::vector<Road> roads,
                               std::vector<LocationId> stations)
    : locations_(std::move(locations)), roads_(std::move(roads)), stations_(std::move(stations)) {
  std::sort(locations_.begin(), locations_.end());
  if (std::adjacent_find(locations_.begin(), locations_.end()) != locations_.end()) {
    throw Error(ErrorKind::SchemaError, "duplicate location id");
  }
  for (const Road& r : roads_) {
    const std::string name = "road " + std::to_string(r.from) + "-" + std::to_string(r.to);
    if (r.from == r.to) throw Error(ErrorKind::SchemaError, name + " is a self loop");
    if (!has_location(r.from) || !has_location(r.to)) {
      throw Error(ErrorKind::SchemaError, name + " references an undeclared location");
    }
    if (r.travel_steps < 1) throw Error(ErrorKind::SchemaError, name + " has travel_steps < 1");
    if (!(r.km > 0.0)) throw Error(ErrorKind::SchemaError, name + " has non-positive km");
  }
  if (stations_.empty()) {
    stations_ = locations_;
  } else {
    std::sort(stations_.begin(), stations_.end());
    stations_.erase(std::unique(stations_.begin(), stations_.end()), stations_.end());
    for (LocationId s : stations_) {
      if (!has_location(s)) {
        throw Error(ErrorKind::SchemaError, "station " + std::to_string(s) + " is not a location");
      }
    }
  }
}

bool TransportGraph::has_location(LocationId id) const {
  return std::binary_search(locations_.begin(), locations_.end(), id);
}

bool TransportGraph::has_station(LocationId id) const {
  return std::binary_search(stations_.begin(), stations_.end(), id);
}

std::optional<std::size_t> TransportGraph::position(LocationId id) const {
  auto it = std::lower_bound(locations_.begin(), locations_.end(), id);
  if (it == locations_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - locations_.begin());
}

std::vector<LocationId> TransportGraph::neighbors(LocationId id) const {
  std::vector<LocationId> out;
  for (const Road& r : roads_) {
    if (r.from == id) out.push_back(r.to);
    if (r.to == id) out.push_back(r.from);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<Road> TransportGraph::road_between(LocationId a, LocationId b) const {
  std::optional<Road> best;
  for (const Road& r : roads_) {
    if (!((r.from == a && r.to == b) || (r.from == b && r.to == a))) continue;
    if (!best || r.km < best->km || (r.km == best->km && r.travel_steps < best->travel_steps)) {
      best = Road{a, b, r.travel_steps, r.km};
    }
  }
  return best;
}

std::string_view arc_kind_name(ArcKind kind) {
  switch (kind) {
    case ArcKind::Resting: return "rest";
    case ArcKind::Charging: return "charge";
    case ArcKind::Discharging: return "discharge";
    case ArcKind::Driving: return "drive";
  }
  return "unknown";
}

ArcKind validate_arc(const ExpandedNode& tail, const ExpandedNode& head,
                     const TransportGraph& transport, EnergyRange energy, int horizon_steps) {
  if (head.time <= tail.time) {
    throw Error(ErrorKind::BackwardTime, "head time must exceed tail time");
  }
  for (LocationId loc : {tail.location, head.location}) {
    if (!transport.has_location(loc)) {
      throw Error(ErrorKind::UnknownLocation, "location " + std::to_string(loc));
    }
  }

  ArcKind kind;
  int span = 1;
  if (tail.location == head.location) {
    const int de = head.energy - tail.energy;
    if (de == 1) {
      if (tail.energy >= energy.max) throw Error(ErrorKind::EnergyBound, "charging at e_max");
      if (!transport.has_station(tail.location)) {
        throw Error(ErrorKind::InvalidTransition, "no charging station at location");
      }
      kind = ArcKind::Charging;
    } else if (de == -1) {
      if (tail.energy <= energy.min) throw Error(ErrorKind::EnergyBound, "discharging at e_min");
      if (!transport.has_station(tail.location)) {
        throw Error(ErrorKind::InvalidTransition, "no charging station at location");
      }
      kind = ArcKind::Discharging;
    } else if (de == 0) {
      kind = ArcKind::Resting;
    } else {
      throw Error(ErrorKind::InvalidTransition, "energy jump larger than one level");
    }
  } else {
    auto road = transport.road_between(tail.location, head.location);
    if (!road) throw Error(ErrorKind::NotNeighbor, "locations are not road-adjacent");
    span = road->travel_steps;
    if (tail.energy <= energy.min || tail.energy - span < energy.min) {
      throw Error(ErrorKind::EnergyBound, "driving requires energy above e_min");
    }
    if (head.energy != tail.energy - span) {
      throw Error(ErrorKind::InvalidTransition, "driving must consume one level per step");
    }
    kind = ArcKind::Driving;
  }
  if (head.time - tail.time != span) {
    throw Error(ErrorKind::InvalidTransition, "arc duration does not match its kind");
  }
  for (const ExpandedNode* n : {&tail, &head}) {
    if (n->energy < energy.min || n->energy > energy.max) {
      throw Error(ErrorKind::EnergyBound, "energy level outside range");
    }
    if (n->time < 0 || n->time >= horizon_steps) {
      throw Error(ErrorKind::InvalidTransition, "time step outside horizon");
    }
  }
  return kind;
}

std::optional<NodeId> ExpandedGraph::index_of(const ExpandedNode& node) const {
  auto pos = transport_.position(node.location);
  if (!pos || node.energy < energy_.min || node.energy > energy_.max || node.time < 0 ||
      node.time >= horizon_.steps) {
    return std::nullopt;
  }
  const std::size_t levels = static_cast<std::size_t>(energy_.count());
  const std::size_t steps = static_cast<std::size_t>(horizon_.steps);
  return (*pos * levels + static_cast<std::size_t>(node.energy - energy_.min)) * steps +
         static_cast<std::size_t>(node.time);
}

std::span<const ArcId> ExpandedGraph::out_arcs(NodeId id) const {
  return {out_list_.data() + out_offsets_[id], out_offsets_[id + 1] - out_offsets_[id]};
}

std::span<const ArcId> ExpandedGraph::in_arcs(NodeId id) const {
  return {in_list_.data() + in_offsets_[id], in_offsets_[id + 1] - in_offsets_[id]};
}

std::span<const ArcId> ExpandedGraph::charging_arcs_at(LocationId location, int time) const {
  auto pos = transport_.position(location);
  if (!pos) throw Error(ErrorKind::UnknownLocation, "location " + std::to_string(location));
  if (time < 0 || time >= horizon_.steps) return {};
  const std::size_t slot = *pos * static_cast<std::size_t>(horizon_.steps) + static_cast<std::size_t>(time);
  return {charge_list_.data() + charge_offsets_[slot], charge_offsets_[slot + 1] - charge_offsets_[slot]};
}

namespace {

std::vector<std::size_t> build_csr(std::size_t buckets, const std::vector<std::size_t>& keys,
                                   std::vector<std::size_t>& list) {
  std::vector<std::size_t> offsets(buckets + 1, 0);
  for (std::size_t k : keys) ++offsets[k + 1];
  for (std::size_t b = 0; b < buckets; ++b) offsets[b + 1] += offsets[b];
  list.assign(keys.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (std::size_t i = 0; i < keys.size(); ++i) list[cursor[keys[i]]++] = i;
  return offsets;
}

}  // namespace

ExpandedGraph build_expanded_graph(const TransportGraph& transport, EnergyRange energy,
                                   Horizon horizon, double energy_step_kwh) {
  if (horizon.steps < 2 || !(horizon.dt_hours > 0.0)) {
    throw Error(ErrorKind::EmptyHorizon, "horizon needs at least two steps and dt > 0");
  }
  if (energy.min >= energy.max || !(energy_step_kwh > 0.0)) {
    throw Error(ErrorKind::DegenerateEnergyRange, "need e_min < e_max and a positive energy step");
  }

  ExpandedGraph g;
  g.transport_ = transport;
  g.energy_ = energy;
  g.horizon_ = horizon;
  g.energy_step_kwh_ = energy_step_kwh;

  const double unit_mw = energy_step_kwh / 1000.0 / horizon.dt_hours;
  for (LocationId loc : transport.locations()) {
    for (int e = energy.min; e <= energy.max; ++e) {
      for (int t = 0; t < horizon.steps; ++t) g.nodes_.push_back({loc, e, t});
    }
  }

  for (const ExpandedNode& tail : g.nodes_) {
    const bool station = transport.has_station(tail.location);
    if (tail.time + 1 < horizon.steps) {
      g.arcs_.push_back({tail, {tail.location, tail.energy, tail.time + 1}, ArcKind::Resting, 0.0});
      if (station && tail.energy < energy.max) {
        g.arcs_.push_back({tail, {tail.location, tail.energy + 1, tail.time + 1},
                           ArcKind::Charging, unit_mw});
      }
      if (station && tail.energy > energy.min) {
        g.arcs_.push_back({tail, {tail.location, tail.energy - 1, tail.time + 1},
                           ArcKind::Discharging, -unit_mw});
      }
    }
    for (LocationId nb : transport.neighbors(tail.location)) {
      const int w = transport.road_between(tail.location, nb)->travel_steps;
      if (tail.energy - w < energy.min || tail.time + w >= horizon.steps) continue;
      g.arcs_.push_back({tail, {nb, tail.energy - w, tail.time + w}, ArcKind::Driving, 0.0});
    }
  }

  const std::size_t n = g.nodes_.size();
  std::vector<std::size_t> tails, heads;
  tails.reserve(g.arcs_.size());
  heads.reserve(g.arcs_.size());
  for (const Arc& a : g.arcs_) {
    tails.push_back(*g.index_of(a.tail));
    heads.push_back(*g.index_of(a.head));
  }
  g.out_offsets_ = build_csr(n, tails, g.out_list_);
  g.in_offsets_ = build_csr(n, heads, g.in_list_);

  const std::size_t steps = static_cast<std::size_t>(horizon.steps);
  const std::size_t slots = transport.locations().size() * steps;
  std::vector<std::size_t> slot_keys;
  std::vector<ArcId> charge_arc_ids;
  for (ArcId id = 0; id < g.arcs_.size(); ++id) {
    const Arc& a = g.arcs_[id];
    if (a.kind != ArcKind::Charging && a.kind != ArcKind::Discharging) continue;
    slot_keys.push_back(*transport.position(a.tail.location) * steps +
                        static_cast<std::size_t>(a.tail.time));
    charge_arc_ids.push_back(id);
  }
  std::vector<std::size_t> order;
  g.charge_offsets_ = build_csr(slots, slot_keys, order);
  g.charge_list_.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) g.charge_list_[k] = charge_arc_ids[order[k]];
  return g;
}

}  // namespace hdev
