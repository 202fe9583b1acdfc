#pragma once

// Time-energy expanded transportation network.
//
// A physical road graph is lifted to nodes (location, energy level, time step).
// Arcs move strictly forward in time and are one of:
//   Charging     same location, energy +1, one step
//   Discharging  same location, energy -1, one step (vehicle-to-grid)
//   Driving      road neighbor, w steps and w energy levels for a road of w steps
//   Resting      same location, same energy, one step
// Charging and discharging arcs exist only at locations with a station.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace hdev {

using LocationId = int;

struct Road {
  LocationId from = 0;
  LocationId to = 0;
  int travel_steps = 1;
  double km = 1.0;
};

class TransportGraph {
 public:
  TransportGraph() = default;
  // Throws Error(SchemaError) on self loops, unknown endpoints, duplicate
  // locations or non-positive weights. An empty `stations` means every
  // location has a charging station.
  TransportGraph(std::vector<LocationId> locations, std::vector<Road> roads,
                 std::vector<LocationId> stations = {});

  std::span<const LocationId> locations() const { return locations_; }
  std::span<const Road> roads() const { return roads_; }

  bool has_location(LocationId id) const;
  bool has_station(LocationId id) const;
  // Position of a location in the sorted location list.
  std::optional<std::size_t> position(LocationId id) const;
  // Road-adjacent locations, ascending.
  std::vector<LocationId> neighbors(LocationId id) const;
  // Shortest road (by km, then steps) between two adjacent locations.
  std::optional<Road> road_between(LocationId a, LocationId b) const;
  std::span<const LocationId> stations() const { return stations_; }

 private:
  std::vector<LocationId> locations_;
  std::vector<Road> roads_;
  std::vector<LocationId> stations_;
};

struct EnergyRange {
  int min = 0;
  int max = 1;
  int count() const { return max - min + 1; }
};

struct Horizon {
  int steps = 2;
  double dt_hours = 1.0;
};

struct ExpandedNode {
  LocationId location = 0;
  int energy = 0;
  int time = 0;
  auto operator<=>(const ExpandedNode&) const = default;
};

enum class ArcKind : std::uint8_t { Resting, Charging, Discharging, Driving };

std::string_view arc_kind_name(ArcKind kind);

struct Arc {
  ExpandedNode tail;
  ExpandedNode head;
  ArcKind kind = ArcKind::Resting;
  // MW drawn per vehicle on this arc; negative when discharging.
  double power_mw = 0.0;
};

using ArcId = std::size_t;
using NodeId = std::size_t;

// Classifies a candidate arc. Throws Error with BackwardTime, EnergyBound,
// NotNeighbor, UnknownLocation or InvalidTransition.
ArcKind validate_arc(const ExpandedNode& tail, const ExpandedNode& head,
                     const TransportGraph& transport, EnergyRange energy, int horizon_steps);

class ExpandedGraph {
 public:
  std::span<const ExpandedNode> nodes() const { return nodes_; }
  std::span<const Arc> arcs() const { return arcs_; }
  const TransportGraph& transport() const { return transport_; }
  EnergyRange energy() const { return energy_; }
  Horizon horizon() const { return horizon_; }
  double energy_step_kwh() const { return energy_step_kwh_; }

  // Canonical index: location-major, then energy, then time.
  std::optional<NodeId> index_of(const ExpandedNode& node) const;
  const ExpandedNode& node(NodeId id) const { return nodes_[id]; }

  std::span<const ArcId> out_arcs(NodeId id) const;
  std::span<const ArcId> in_arcs(NodeId id) const;

  // Charging and discharging arcs whose tail is at `location` at step `time`.
  // Throws Error(UnknownLocation); empty for locations without a station.
  std::span<const ArcId> charging_arcs_at(LocationId location, int time) const;

 private:
  friend ExpandedGraph build_expanded_graph(const TransportGraph&, EnergyRange, Horizon, double);

  TransportGraph transport_;
  EnergyRange energy_;
  Horizon horizon_;
  double energy_step_kwh_ = 0.0;
  std::vector<ExpandedNode> nodes_;
  std::vector<Arc> arcs_;
  // CSR adjacency.
  std::vector<std::size_t> out_offsets_, in_offsets_;
  std::vector<ArcId> out_list_, in_list_;
  // (location position * steps + time) -> arc ids
  std::vector<std::size_t> charge_offsets_;
  std::vector<ArcId> charge_list_;
};

// Throws Error(EmptyHorizon) when steps < 2 or dt <= 0 and
// Error(DegenerateEnergyRange) when min >= max or step_kwh <= 0.
ExpandedGraph build_expanded_graph(const TransportGraph& transport, EnergyRange energy,
                                   Horizon horizon, double energy_step_kwh);

}  // namespace hdev
