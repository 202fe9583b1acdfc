#include "hdev/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

#include "hdev/error.hpp"

namespace hdev {
namespace {

std::string describe(const ExpandedNode& n) {
  return "(" + std::to_string(n.location) + ", e=" + std::to_string(n.energy) +
         ", t=" + std::to_string(n.time) + ")";
}

NodeId require_node(const ExpandedGraph& g, const ExpandedNode& n) {
  auto id = g.index_of(n);
  if (!id) throw Error(ErrorKind::UnknownNode, "node " + describe(n) + " is not in the graph");
  return *id;
}

bool in_flexibility_set(const ExpandedNode& target, const ExpandedNode& u) {
  return u.location == target.location && u.energy >= target.energy && u.time <= target.time;
}

ArcId find_arc(const ExpandedGraph& g, const ExpandedNode& tail, const ExpandedNode& head) {
  const NodeId t = require_node(g, tail);
  for (ArcId a : g.out_arcs(t)) {
    if (g.arcs()[a].head == head) return a;
  }
  throw Error(ErrorKind::Infeasible, "no arc " + describe(tail) + " -> " + describe(head));
}

}  // namespace

void validate_fleet(const FleetSpec& fleet) {
  double in = 0.0, out = 0.0;
  for (const auto& [node, v] : fleet.criteria.injections) {
    if (!(v >= 0.0)) throw Error(ErrorKind::SchemaError, "fleet " + fleet.id + ": negative injection");
    in += v;
  }
  for (const auto& [node, v] : fleet.criteria.withdrawals) {
    if (!(v >= 0.0)) throw Error(ErrorKind::SchemaError, "fleet " + fleet.id + ": negative withdrawal");
    out += v;
  }
  const double scale = std::max({1.0, std::abs(in), std::abs(fleet.size)});
  if (std::abs(in - out) > 1e-9 * scale) {
    throw Error(ErrorKind::SchemaError, "fleet " + fleet.id + ": injections and withdrawals differ");
  }
  if (std::abs(in - fleet.size) > 1e-9 * scale) {
    throw Error(ErrorKind::SchemaError, "fleet " + fleet.id + ": injections do not sum to size");
  }
}

FlexibilitySet flexibility_set(const ExpandedGraph& g, const ExpandedNode& target) {
  require_node(g, target);
  FlexibilitySet set{target, {}};
  const EnergyRange er = g.energy();
  for (int e = target.energy; e <= er.max; ++e) {
    for (int t = 0; t <= target.time; ++t) set.members.push_back({target.location, e, t});
  }
  return set;
}

std::vector<FlowBalanceRow> flow_balance_rows(const ExpandedGraph& g, const FleetSpec& fleet) {
  for (const auto& [node, v] : fleet.criteria.injections) require_node(g, node);
  for (const auto& [node, v] : fleet.criteria.withdrawals) require_node(g, node);

  std::vector<FlowBalanceRow> rows(g.nodes().size());
  for (NodeId v = 0; v < rows.size(); ++v) {
    FlowBalanceRow& row = rows[v];
    row.node = v;
    for (ArcId a : g.out_arcs(v)) row.lambda_terms.emplace_back(a, 1.0);
    for (ArcId a : g.in_arcs(v)) row.lambda_terms.emplace_back(a, -1.0);
  }
  for (const auto& [node, v] : fleet.criteria.injections) rows[*g.index_of(node)].rhs += v;
  return rows;
}

double flow_balance_violation(const ExpandedGraph& g, const FleetSpec& fleet,
                              const std::vector<double>& lambda,
                              const std::map<ExpandedNode, double>& departures) {
  const auto rows = flow_balance_rows(g, fleet);
  double worst = 0.0;
  for (const FlowBalanceRow& row : rows) {
    double lhs = 0.0;
    for (const auto& [a, c] : row.lambda_terms) lhs += c * lambda[a];
    if (auto it = departures.find(g.node(row.node)); it != departures.end()) {
      lhs += row.departure_coeff * it->second;
    }
    worst = std::max(worst, std::abs(lhs - row.rhs));
  }
  return worst;
}

double flexibility_violation(const ExpandedGraph& g, const FleetSpec& fleet,
                             const std::map<ExpandedNode, double>& departures) {
  (void)g;
  double worst = 0.0;
  for (const auto& [target, required] : fleet.criteria.withdrawals) {
    double sum = 0.0;
    for (const auto& [u, v] : departures) {
      if (in_flexibility_set(target, u)) sum += v;
    }
    worst = std::max(worst, std::abs(sum - required));
  }
  return worst;
}

std::vector<LocationId> shortest_location_path(const TransportGraph& transport, LocationId from,
                                               LocationId to) {
  if (!transport.has_location(from) || !transport.has_location(to)) {
    throw Error(ErrorKind::UnknownLocation, "path endpoints must be locations");
  }
  using Label = std::tuple<double, int, std::vector<LocationId>>;
  const auto locs = transport.locations();
  std::vector<std::optional<Label>> label(locs.size());
  std::vector<bool> done(locs.size(), false);
  label[*transport.position(from)] = Label{0.0, 0, {from}};
  for (;;) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < locs.size(); ++i) {
      if (!done[i] && label[i] && (!best || *label[i] < *label[*best])) best = i;
    }
    if (!best) return {};
    done[*best] = true;
    if (locs[*best] == to) return std::get<2>(*label[*best]);
    const auto [km, steps, path] = *label[*best];
    for (LocationId nb : transport.neighbors(locs[*best])) {
      const std::size_t j = *transport.position(nb);
      if (done[j]) continue;
      const Road r = *transport.road_between(locs[*best], nb);
      Label cand{km + r.km, steps + r.travel_steps, path};
      std::get<2>(cand).push_back(nb);
      if (!label[j] || cand < *label[j]) label[j] = std::move(cand);
    }
  }
}

FleetFlows baseline_schedule(const ExpandedGraph& g, const TransportGraph& transport,
                             const FleetSpec& fleet) {
  validate_fleet(fleet);
  FleetFlows flows;
  flows.lambda.assign(1, std::vector<double>(g.arcs().size(), 0.0));
  flows.departures.resize(1);

  std::vector<std::pair<ExpandedNode, double>> supply(fleet.criteria.injections.begin(),
                                                      fleet.criteria.injections.end());
  std::vector<std::pair<ExpandedNode, double>> demand(fleet.criteria.withdrawals.begin(),
                                                      fleet.criteria.withdrawals.end());
  for (const auto& [n, v] : supply) require_node(g, n);
  for (const auto& [n, v] : demand) require_node(g, n);

  const EnergyRange er = g.energy();
  const int steps = g.horizon().steps;
  std::size_t si = 0, di = 0;
  while (si < supply.size() && di < demand.size()) {
    const double amount = std::min(supply[si].second, demand[di].second);
    const ExpandedNode origin = supply[si].first;
    const ExpandedNode target = demand[di].first;
    if (amount > 0.0) {
      const auto path = shortest_location_path(transport, origin.location, target.location);
      if (path.empty()) {
        throw Error(ErrorKind::Infeasible, "fleet " + fleet.id + ": destination unreachable");
      }
      std::vector<ArcId> used;
      ExpandedNode cur = origin;
      auto step_to = [&](const ExpandedNode& next) {
        if (next.time >= steps) {
          throw Error(ErrorKind::Infeasible, "fleet " + fleet.id + ": horizon too short");
        }
        used.push_back(find_arc(g, cur, next));
        cur = next;
      };
      auto charge_to = [&](int level) {
        if (level > er.max) {
          throw Error(ErrorKind::Infeasible, "fleet " + fleet.id + ": trip exceeds battery range");
        }
        if (cur.energy < level && !transport.has_station(cur.location)) {
          throw Error(ErrorKind::Infeasible, "fleet " + fleet.id + ": no station at location " +
                                                 std::to_string(cur.location));
        }
        while (cur.energy < level) step_to({cur.location, cur.energy + 1, cur.time + 1});
      };
      for (std::size_t k = 1; k < path.size(); ++k) {
        const Road road = *transport.road_between(path[k - 1], path[k]);
        const bool last = k + 1 == path.size();
        const bool top_up_before = last && !transport.has_station(path[k]);
        const int floor_after = top_up_before ? std::max(target.energy, er.min) : er.min;
        charge_to(std::max(floor_after + road.travel_steps, er.min + 1));
        step_to({path[k], cur.energy - road.travel_steps, cur.time + road.travel_steps});
      }
      charge_to(target.energy);
      if (cur.time > target.time) {
        throw Error(ErrorKind::Infeasible, "fleet " + fleet.id + ": cannot reach " +
                                               describe(target) + " in time");
      }
      while (cur.time < target.time) step_to({cur.location, cur.energy, cur.time + 1});
      for (ArcId a : used) flows.lambda[0][a] += amount;
      flows.departures[0][cur] += amount;
    }
    supply[si].second -= amount;
    demand[di].second -= amount;
    if (supply[si].second <= 0.0) ++si;
    if (demand[di].second <= 0.0) ++di;
  }
  return flows;
}

int soc_percent_to_level(double soc_percent, EnergyRange energy) {
  const double span = static_cast<double>(energy.max - energy.min);
  const int level = energy.min + static_cast<int>(std::floor(soc_percent / 100.0 * span + 0.5));
  return std::clamp(level, energy.min, energy.max);
}

int hour_to_step(double hour, double dt_hours) {
  return static_cast<int>(std::floor(hour / dt_hours + 0.5));
}

std::vector<FleetSpec> sample_fleets(const ExpandedGraph& g, const FleetSamplerConfig& config) {
  std::mt19937_64 rng(config.seed);
  // Modulo mapping keeps draws identical across standard library implementations.
  auto draw = [&rng](int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  const auto locs = g.transport().locations();
  if (locs.size() < 2) throw Error(ErrorKind::SchemaError, "sampler needs two locations");
  const EnergyRange er = g.energy();
  std::vector<FleetSpec> fleets;
  for (int f = 0; f < config.fleets; ++f) {
    const auto o = static_cast<std::size_t>(draw(0, static_cast<int>(locs.size()) - 1));
    auto d = static_cast<std::size_t>(draw(0, static_cast<int>(locs.size()) - 2));
    if (d >= o) ++d;
    const int start = draw(config.earliest_start_step, config.latest_start_step);
    const int trip = draw(config.min_trip_steps, config.max_trip_steps);
    const int e0 = std::clamp(draw(config.min_start_level, config.max_start_level), er.min, er.max);
    const int e1 = std::clamp(draw(config.min_end_level, config.max_end_level), er.min, er.max);
    const int end = std::min(start + trip, g.horizon().steps - 1);
    FleetSpec spec;
    spec.id = "sampled-" + std::to_string(f);
    spec.size = config.size;
    spec.criteria.injections[{locs[o], e0, start}] = config.size;
    spec.criteria.withdrawals[{locs[d], e1, end}] = config.size;
    fleets.push_back(std::move(spec));
  }
  return fleets;
}

}  // namespace hdev
