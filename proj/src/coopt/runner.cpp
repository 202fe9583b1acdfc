#include <algorithm>
#include <chrono>
#include <cmath>

#include "hdev/error.hpp"
#include "hdev/scenario.hpp"

namespace hdev {

std::string_view run_mode_name(RunMode mode) {
  return mode == RunMode::Baseline ? "baseline" : "coopt";
}

namespace {

std::vector<FleetSpec> resolve_fleets(const Scenario& sc, const ExpandedGraph& g,
                                      const RunOptions& opts) {
  std::vector<FleetSpec> fleets = sc.fleets;
  if (sc.sampler) {
    FleetSamplerConfig cfg = *sc.sampler;
    cfg.seed = sc.seed;
    for (FleetSpec& f : sample_fleets(g, cfg)) fleets.push_back(std::move(f));
  }
  if (opts.fleet_size) {
    for (FleetSpec& f : fleets) {
      const double k = f.size > 0.0 ? *opts.fleet_size / f.size : 0.0;
      for (auto& [node, v] : f.criteria.injections) v *= k;
      for (auto& [node, v] : f.criteria.withdrawals) v *= k;
      f.size = *opts.fleet_size;
    }
  }
  return fleets;
}

DemandProfile demand_from_flows(const GridCase& grid, const ExpandedGraph& g,
                                const std::vector<std::vector<double>>& lambda, bool enable_v2g) {
  const auto rows = coupling_rows(grid, g, enable_v2g);
  const auto stations = g.transport().stations();
  DemandProfile demand(static_cast<std::size_t>(g.horizon().steps),
                       std::vector<double>(stations.size(), 0.0));
  for (const CouplingRow& row : rows) {
    const auto s = static_cast<std::size_t>(
        std::find(stations.begin(), stations.end(), row.location) - stations.begin());
    double x = 0.0;
    for (const auto& flows : lambda) {
      for (const auto& [a, delta] : row.terms) x += delta * flows[a];
    }
    demand[static_cast<std::size_t>(row.time)][s] = x;
  }
  return demand;
}

// Expansion points: the no-vehicle base case, or one per step about the power
// flow at that step's baseline demand.
std::vector<OperatingPoint> expansion_points(const GridCase& grid, const ExpandedGraph& g,
                                             const DemandProfile& baseline_demand, bool per_step) {
  std::vector<OperatingPoint> ops;
  ops.push_back(solve_operating_point(grid));
  if (!per_step) return ops;
  ops.clear();
  const auto stations = g.transport().stations();
  const auto pd = grid.pd();
  const auto qd = grid.qd();
  const auto pg = grid.pg_scheduled();
  for (const auto& row : baseline_demand) {
    PowerFlowSpec spec;
    for (std::size_t i = 0; i < grid.bus_count(); ++i) {
      spec.p_net.push_back(pg[i] - pd[i]);
      spec.q_net.push_back(-qd[i]);
    }
    for (std::size_t s = 0; s < stations.size(); ++s) {
      const std::size_t i = *grid.bus_index(stations[s]);
      spec.p_net[i] -= row[s] / grid.base_mva();
      spec.q_net[i] -= grid.alpha_pq() * row[s] / grid.base_mva();
    }
    ops.push_back(solve_operating_point(grid, spec));
  }
  return ops;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  RunResult out;
  out.scenario = scenario;
  out.mode = options.mode;
  Scenario& sc = out.scenario;
  if (options.penalty) sc.penalty.kind = *options.penalty;
  if (options.seed) sc.seed = *options.seed;
  if (options.enable_v2g) sc.enable_v2g = *options.enable_v2g;

  const GridCase grid(sc.grid);
  require_connected(grid);
  const ExpandedGraph g = build_expanded_graph(sc.transport, sc.energy, sc.horizon, sc.energy_step_kwh);
  out.fleets = resolve_fleets(sc, g, options);
  (void)coupling_rows(grid, g, sc.enable_v2g);  // reject stations that are not buses early

  CoOptConfig config;
  config.penalty = sc.penalty;
  config.cost_weight = sc.cost_weight;
  config.enable_v2g = sc.enable_v2g;
  config.station_limits = sc.station_limits;

  double vehicles = 0.0;
  for (const FleetSpec& f : out.fleets) vehicles += f.size;

  // Baseline flows are needed by baseline mode and by per-step expansion.
  FleetFlows baseline;
  if (options.mode == RunMode::Baseline || sc.relinearize_per_step) {
    baseline.lambda.assign(out.fleets.size(), std::vector<double>(g.arcs().size(), 0.0));
    baseline.departures.resize(out.fleets.size());
    for (std::size_t h = 0; h < out.fleets.size(); ++h) {
      FleetFlows f = baseline_schedule(g, sc.transport, out.fleets[h]);
      baseline.lambda[h] = std::move(f.lambda.front());
      baseline.departures[h] = std::move(f.departures.front());
    }
  }
  const DemandProfile baseline_demand =
      baseline.lambda.empty()
          ? DemandProfile(static_cast<std::size_t>(g.horizon().steps),
                          std::vector<double>(sc.transport.stations().size(), 0.0))
          : demand_from_flows(grid, g, baseline.lambda, sc.enable_v2g);
  const std::vector<OperatingPoint> ops = expansion_points(grid, g, baseline_demand, sc.relinearize_per_step);

  if (options.mode == RunMode::Baseline || vehicles == 0.0) {
    const DemandProfile& demand = options.mode == RunMode::Baseline
                                      ? baseline_demand
                                      : DemandProfile(static_cast<std::size_t>(g.horizon().steps),
                                                      std::vector<double>(sc.transport.stations().size(), 0.0));
    out.schedule = dispatch_fixed_demand(grid, ops, g, demand, config, options.qp);
    if (options.mode == RunMode::Baseline) {
      out.schedule.flows = baseline;
    } else {
      out.schedule.flows.lambda.assign(out.fleets.size(), std::vector<double>(g.arcs().size(), 0.0));
      out.schedule.flows.departures.resize(out.fleets.size());
    }
    const auto stations = g.transport().stations();
    for (int t = 0; t < g.horizon().steps; ++t) {
      auto& st = out.schedule.per_step[static_cast<std::size_t>(t)];
      st.vehicles_charging.assign(stations.size(), 0.0);
      for (std::size_t s = 0; s < stations.size(); ++s) {
        for (ArcId a : g.charging_arcs_at(stations[s], t)) {
          if (g.arcs()[a].kind == ArcKind::Discharging && !sc.enable_v2g) continue;
          for (const auto& lam : out.schedule.flows.lambda) st.vehicles_charging[s] += lam[a];
        }
      }
    }
    ScheduleChecks& c = out.schedule.checks;
    for (std::size_t h = 0; h < out.fleets.size(); ++h) {
      const auto& lam = out.schedule.flows.lambda[h];
      const auto& dep = out.schedule.flows.departures[h];
      c.flow_balance_residual =
          std::max(c.flow_balance_residual, flow_balance_violation(g, out.fleets[h], lam, dep));
      c.flexibility_residual = std::max(c.flexibility_residual, flexibility_violation(g, out.fleets[h], dep));
    }
    const DemandProfile recomputed = demand_from_flows(grid, g, out.schedule.flows.lambda, sc.enable_v2g);
    for (std::size_t t = 0; t < recomputed.size(); ++t) {
      for (std::size_t s = 0; s < recomputed[t].size(); ++s) {
        c.coupling_residual_mw =
            std::max(c.coupling_residual_mw, std::abs(recomputed[t][s] - out.schedule.per_step[t].x_mw[s]));
      }
    }
  } else {
    const CoOptProblem problem = assemble(grid, ops, g, out.fleets, config);
    out.schedule = solve_coopt(problem, options.qp);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace hdev
