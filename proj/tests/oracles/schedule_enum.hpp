#pragma once

// Exhaustive single-vehicle schedule enumeration. Every integer schedule is a
// path in the expanded graph from the injection node to a node of the
// withdrawal flexibility set; each one is priced by pinning the station demand
// it induces and solving the grid-only program.

#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include "hdev/coopt.hpp"

namespace hdev::oracle {

struct EnumeratedBest {
  double objective = std::numeric_limits<double>::infinity();
  std::size_t schedules = 0;
  std::vector<ArcId> path;
};

inline std::vector<std::vector<ArcId>> vehicle_paths(const ExpandedGraph& g, const ExpandedNode& from,
                                                     const ExpandedNode& target, bool enable_v2g) {
  const auto members = flexibility_set(g, target).members;
  std::vector<std::vector<ArcId>> out;
  std::vector<ArcId> path;
  std::function<void(NodeId)> walk = [&](NodeId u) {
    if (std::find(members.begin(), members.end(), g.node(u)) != members.end()) out.push_back(path);
    for (ArcId a : g.out_arcs(u)) {
      const Arc& arc = g.arcs()[a];
      if (arc.kind == ArcKind::Discharging && !enable_v2g) continue;
      path.push_back(a);
      walk(*g.index_of(arc.head));
      path.pop_back();
    }
  };
  walk(*g.index_of(from));
  return out;
}

inline EnumeratedBest best_integer_schedule(const GridCase& grid, std::span<const OperatingPoint> ops,
                                            const ExpandedGraph& g, const FleetSpec& fleet,
                                            const CoOptConfig& config) {
  const ExpandedNode from = fleet.criteria.injections.begin()->first;
  const ExpandedNode target = fleet.criteria.withdrawals.begin()->first;
  const auto stations = g.transport().stations();
  EnumeratedBest best;
  for (const auto& path : vehicle_paths(g, from, target, config.enable_v2g)) {
    DemandProfile demand(static_cast<std::size_t>(g.horizon().steps),
                         std::vector<double>(stations.size(), 0.0));
    for (ArcId a : path) {
      const Arc& arc = g.arcs()[a];
      if (arc.kind != ArcKind::Charging && arc.kind != ArcKind::Discharging) continue;
      const auto s = static_cast<std::size_t>(
          std::find(stations.begin(), stations.end(), arc.tail.location) - stations.begin());
      demand[static_cast<std::size_t>(arc.tail.time)][s] += arc.power_mw * fleet.size;
    }
    const CoOptProblem p = assemble(grid, ops, g, {}, config, demand);
    const SolveResult r = solve(p.qp);
    ++best.schedules;
    if (r.status == QpStatus::Optimal && r.objective < best.objective) {
      best.objective = r.objective;
      best.path = path;
    }
  }
  return best;
}

}  // namespace hdev::oracle
