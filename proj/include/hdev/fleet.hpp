#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hdev/transport.hpp"

namespace hdev {

// Operator-specified injections and withdrawals, in vehicles.
struct TravelCriteria {
  std::map<ExpandedNode, double> injections;
  std::map<ExpandedNode, double> withdrawals;
};

struct FleetSpec {
  std::string id;
  double size = 0.0;
  TravelCriteria criteria;
};

// Throws Error(SchemaError) on negative entries or when injections,
// withdrawals and size disagree (relative tolerance 1e-9).
void validate_fleet(const FleetSpec& fleet);

// Nodes at which vehicles bound for `target` may leave the network: same
// location, at least the target energy, no later than the target time.
struct FlexibilitySet {
  ExpandedNode target;
  std::vector<ExpandedNode> members;
};

FlexibilitySet flexibility_set(const ExpandedGraph& g, const ExpandedNode& target);

// Per-fleet arc flows (indexed by ArcId) and realized departures.
struct FleetFlows {
  std::vector<std::vector<double>> lambda;
  std::vector<std::map<ExpandedNode, double>> departures;
};

// One conservation row per expanded node:
//   sum(out lambda) - sum(in lambda) + departure(node) = injection(node)
struct FlowBalanceRow {
  NodeId node = 0;
  std::vector<std::pair<ArcId, double>> lambda_terms;
  double departure_coeff = 1.0;
  double rhs = 0.0;
};

// Throws Error(UnknownNode) when the criteria reference nodes outside g.
std::vector<FlowBalanceRow> flow_balance_rows(const ExpandedGraph& g, const FleetSpec& fleet);

// Largest absolute conservation residual over all nodes.
double flow_balance_violation(const ExpandedGraph& g, const FleetSpec& fleet,
                              const std::vector<double>& lambda,
                              const std::map<ExpandedNode, double>& departures);

// Largest |sum of departures over U_v - withdrawal(v)| over all targets.
double flexibility_violation(const ExpandedGraph& g, const FleetSpec& fleet,
                             const std::map<ExpandedNode, double>& departures);

// Distance-shortest location path; ties broken by total travel steps, then by
// the lexicographically lowest id sequence. Empty when unreachable.
std::vector<LocationId> shortest_location_path(const TransportGraph& transport, LocationId from,
                                               LocationId to);

// Grid-agnostic dispatch: vehicles follow the shortest path and charge where
// they stand whenever the next hop would leave them short of energy, top up at
// the destination (or before the last hop when it has no station), then wait
// there until the target time. Injections are matched to
// withdrawals in node order. Throws Error(Infeasible) if the horizon or energy
// range cannot accommodate the trip.
FleetFlows baseline_schedule(const ExpandedGraph& g, const TransportGraph& transport,
                             const FleetSpec& fleet);

// Nearest level, ties rounded up.
int soc_percent_to_level(double soc_percent, EnergyRange energy);
int hour_to_step(double hour, double dt_hours);

struct FleetSamplerConfig {
  std::uint64_t seed = 1;
  int fleets = 1;
  double size = 100.0;
  int earliest_start_step = 0;
  int latest_start_step = 0;
  int min_trip_steps = 1;
  int max_trip_steps = 1;
  int min_start_level = 0;
  int max_start_level = 0;
  int min_end_level = 0;
  int max_end_level = 0;
};

// Draws origin/destination pairs, start steps, trip lengths and charge levels
// uniformly from the configured ranges. Reproducible for a given seed.
std::vector<FleetSpec> sample_fleets(const ExpandedGraph& g, const FleetSamplerConfig& config);

}  // namespace hdev
