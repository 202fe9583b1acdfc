#include "hdev/coopt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>

#include "hdev/error.hpp"

namespace hdev {

std::string_view penalty_kind_name(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::L2: return "l2";
    case PenaltyKind::L1: return "l1";
    case PenaltyKind::Linf: return "linf";
  }
  return "?";
}

std::optional<PenaltyKind> parse_penalty_kind(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "l1") return PenaltyKind::L1;
  if (s == "l2") return PenaltyKind::L2;
  if (s == "linf") return PenaltyKind::Linf;
  return std::nullopt;
}

std::vector<double> default_vref(const GridCase& grid) {
  std::vector<double> out;
  for (std::size_t i = 0; i < grid.bus_count(); ++i) {
    const BusData& b = grid.bus(i);
    out.push_back(b.avr || i == grid.slack() ? b.vref : 1.0);
  }
  return out;
}

std::vector<std::size_t> top_l_buses(std::span<const double> v0, std::span<const double> vref,
                                     std::size_t top_l) {
  const std::size_t n = v0.size();
  if (vref.size() != n) throw Error(ErrorKind::DimensionMismatch, "vref length differs from bus count");
  if (top_l == 0) top_l = n;
  if (top_l > n) {
    throw Error(ErrorKind::BadTopL, "top_l " + std::to_string(top_l) + " exceeds bus count " +
                                        std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(v0[a] - vref[a]) > std::abs(v0[b] - vref[b]);
  });
  order.resize(top_l);
  std::sort(order.begin(), order.end());
  return order;
}

double penalty_value(PenaltyKind kind, std::span<const double> deviation,
                     std::span<const std::size_t> top_set) {
  double out = 0.0;
  switch (kind) {
    case PenaltyKind::L2:
      for (double d : deviation) out += d * d;
      break;
    case PenaltyKind::L1:
      for (double d : deviation) out += std::abs(d);
      break;
    case PenaltyKind::Linf:
      for (std::size_t i : top_set) out = std::max(out, std::abs(deviation[i]));
      break;
  }
  return out;
}

std::vector<CouplingRow> coupling_rows(const GridCase& grid, const ExpandedGraph& g,
                                       bool enable_v2g) {
  std::vector<CouplingRow> rows;
  for (LocationId loc : g.transport().stations()) {
    auto bus = grid.bus_index(loc);
    if (!bus) {
      throw Error(ErrorKind::LocationNotABus,
                  "station location " + std::to_string(loc) + " is not a grid bus");
    }
    for (int t = 0; t < g.horizon().steps; ++t) {
      CouplingRow row{loc, *bus, t, {}};
      for (ArcId a : g.charging_arcs_at(loc, t)) {
        const Arc& arc = g.arcs()[a];
        if (arc.kind == ArcKind::Discharging && !enable_v2g) continue;
        row.terms.emplace_back(a, arc.power_mw);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

using Terms = std::vector<std::pair<std::size_t, double>>;

std::string first_infeasible_family(const CoOptProblem& p) {
  // Fleet constraints alone.
  if (!p.fleets.empty()) {
    QpBuilder b;
    const auto& g = *p.graph;
    for (std::size_t h = 0; h < p.fleets.size(); ++h) {
      std::vector<std::size_t> lam(g.arcs().size(), kNoVar);
      for (ArcId a = 0; a < g.arcs().size(); ++a) {
        if (p.vars.lambda[h][a] != kNoVar) lam[a] = b.add_variable(0.0, kInf);
      }
      std::map<ExpandedNode, std::size_t> psi;
      for (const auto& [node, idx] : p.vars.psi[h]) psi[node] = b.add_variable(0.0, kInf);
      for (const auto& row : flow_balance_rows(g, p.fleets[h])) {
        Terms t;
        for (const auto& [a, c] : row.lambda_terms) {
          if (lam[a] != kNoVar) t.emplace_back(lam[a], c);
        }
        if (auto it = psi.find(g.node(row.node)); it != psi.end()) t.emplace_back(it->second, 1.0);
        b.add_equality(t, row.rhs);
      }
      for (const auto& [target, amount] : p.fleets[h].criteria.withdrawals) {
        Terms t;
        for (const auto& u : flexibility_set(g, target).members) t.emplace_back(psi.at(u), 1.0);
        b.add_equality(t, amount);
      }
    }
    if (solve(b.build()).status == QpStatus::Infeasible) {
      return "fleet flow balance / departure flexibility";
    }
  }
  return "grid constraints (flow balance, generator limits, thermal limits, station limits)";
}

}  // namespace

CoOptProblem assemble(const GridCase& grid, std::span<const OperatingPoint> ops,
                      const ExpandedGraph& g, std::span<const FleetSpec> fleets,
                      const CoOptConfig& config, const std::optional<DemandProfile>& fixed_demand) {
  const int steps = g.horizon().steps;
  const std::size_t n = grid.bus_count();
  const std::size_t ng = grid.generator_count();
  const double base = grid.base_mva();
  if (ops.size() != 1 && ops.size() != static_cast<std::size_t>(steps)) {
    throw Error(ErrorKind::InconsistentHorizon, "expected 1 or " + std::to_string(steps) +
                                                    " operating points, got " +
                                                    std::to_string(ops.size()));
  }
  for (const auto& op : ops) {
    if (op.v0.size() != n) throw Error(ErrorKind::DimensionMismatch, "operating point size");
  }
  if (fixed_demand && !fleets.empty()) {
    throw Error(ErrorKind::InconsistentHorizon, "fixed demand excludes fleet variables");
  }
  for (const FleetSpec& f : fleets) {
    validate_fleet(f);
    for (const auto& [node, v] : f.criteria.injections) {
      if (!g.index_of(node)) {
        throw Error(node.time >= steps || node.time < 0 ? ErrorKind::InconsistentHorizon
                                                        : ErrorKind::UnknownNode,
                    "fleet " + f.id + " injects outside the expanded graph");
      }
    }
    for (const auto& [node, v] : f.criteria.withdrawals) {
      if (!g.index_of(node)) {
        throw Error(node.time >= steps || node.time < 0 ? ErrorKind::InconsistentHorizon
                                                        : ErrorKind::UnknownNode,
                    "fleet " + f.id + " withdraws outside the expanded graph");
      }
    }
  }

  CoOptProblem p;
  p.grid = &grid;
  p.graph = &g;
  p.fleets.assign(fleets.begin(), fleets.end());
  p.ops.assign(ops.begin(), ops.end());
  p.config = config;
  p.steps = steps;
  p.dt_hours = g.horizon().dt_hours;
  p.coupling = coupling_rows(grid, g, config.enable_v2g);
  for (LocationId loc : g.transport().stations()) {
    p.stations.push_back(loc);
    p.station_bus.push_back(*grid.bus_index(loc));
  }
  const std::size_t ns = p.stations.size();
  if (fixed_demand) {
    if (fixed_demand->size() != static_cast<std::size_t>(steps)) {
      throw Error(ErrorKind::InconsistentHorizon, "demand profile covers " +
                                                      std::to_string(fixed_demand->size()) +
                                                      " steps, horizon has " + std::to_string(steps));
    }
    for (const auto& row : *fixed_demand) {
      if (row.size() != ns) throw Error(ErrorKind::DimensionMismatch, "demand profile station count");
    }
  }

  p.vref = config.penalty.vref.empty() ? default_vref(grid) : config.penalty.vref;
  if (p.vref.size() != n) throw Error(ErrorKind::DimensionMismatch, "vref length differs from bus count");
  p.top_set = top_l_buses(ops.front().v0, p.vref, config.penalty.top_l);

  double max_delta = 0.0;
  for (const Arc& a : g.arcs()) max_delta = std::max(max_delta, std::abs(a.power_mw));
  double total_size = 0.0;
  for (const FleetSpec& f : fleets) total_size += f.size;
  const double default_cap = total_size * max_delta;

  QpBuilder b;
  Census& census = p.census;
  const double w = config.penalty.weight;

  // Grid variables per step.
  p.vars.steps.resize(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    StepVars& sv = p.vars.steps[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < n; ++i) {
      const bool pinned = grid.bus(i).avr || i == grid.slack();
      sv.v.push_back(pinned ? b.add_variable(grid.bus(i).vref, grid.bus(i).vref)
                            : b.add_variable());
      if (pinned) ++census.fixed_variables;
    }
    for (std::size_t i = 0; i < n; ++i) {
      sv.theta.push_back(i == grid.slack() ? b.add_variable(0.0, 0.0) : b.add_variable());
    }
    ++census.fixed_variables;
    for (std::size_t k = 0; k < ng; ++k) {
      const GeneratorData& gen = grid.generator(k);
      const std::size_t j = b.add_variable(gen.pmin_mw / base, gen.pmax_mw / base,
                                           config.cost_weight * gen.c1 * base);
      b.add_quadratic(j, j, config.cost_weight * gen.c2 * base * base);
      b.add_constant(config.cost_weight * gen.c0);
      sv.pg.push_back(j);
    }
    for (std::size_t k = 0; k < ng; ++k) {
      const GeneratorData& gen = grid.generator(k);
      sv.qg.push_back(b.add_variable(gen.qmin_mvar / base, gen.qmax_mvar / base));
    }
    for (std::size_t s = 0; s < ns; ++s) {
      double lo, hi;
      if (fixed_demand) {
        lo = hi = (*fixed_demand)[static_cast<std::size_t>(t)][s] / base;
      } else {
        StationLimit lim;
        if (auto it = config.station_limits.find(p.stations[s]); it != config.station_limits.end()) {
          lim = it->second;
        } else if (config.enable_v2g) {
          lim.min_mw = -default_cap;
        }
        if (!std::isfinite(lim.max_mw)) lim.max_mw = default_cap;
        lo = lim.min_mw / base;
        hi = lim.max_mw / base;
      }
      sv.x.push_back(b.add_variable(lo, hi));
    }
    if (config.penalty.kind == PenaltyKind::L1) {
      for (std::size_t i = 0; i < n; ++i) sv.aux.push_back(b.add_variable(-kInf, kInf, w));
    } else if (config.penalty.kind == PenaltyKind::Linf) {
      sv.linf = b.add_variable(-kInf, kInf, w);
    }
  }

  // Fleet variables.
  p.vars.lambda.resize(fleets.size());
  p.vars.psi.resize(fleets.size());
  for (std::size_t h = 0; h < fleets.size(); ++h) {
    auto& lam = p.vars.lambda[h];
    lam.assign(g.arcs().size(), kNoVar);
    for (ArcId a = 0; a < g.arcs().size(); ++a) {
      if (g.arcs()[a].kind == ArcKind::Discharging && !config.enable_v2g) continue;
      lam[a] = b.add_variable(0.0, kInf);
    }
    std::vector<ExpandedNode> members;
    for (const auto& [target, amount] : fleets[h].criteria.withdrawals) {
      for (const auto& u : flexibility_set(g, target).members) members.push_back(u);
    }
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (const auto& u : members) p.vars.psi[h][u] = b.add_variable(0.0, kInf);
  }

  // Linearized flow balance, bus by bus.
  const auto pd = grid.pd();
  const auto qd = grid.qd();
  for (int t = 0; t < steps; ++t) {
    const StepVars& sv = p.vars.steps[static_cast<std::size_t>(t)];
    const OperatingPoint& op = ops.size() == 1 ? ops.front() : ops[static_cast<std::size_t>(t)];
    std::vector<std::size_t> station_at(n, kNoVar);
    for (std::size_t s = 0; s < ns; ++s) station_at[p.station_bus[s]] = sv.x[s];
    for (int part = 0; part < 2; ++part) {
      const bool active = part == 0;
      const DenseMatrix& jv = active ? op.jac.p_v : op.jac.q_v;
      const DenseMatrix& jt = active ? op.jac.p_theta : op.jac.q_theta;
      for (std::size_t i = 0; i < n; ++i) {
        Terms terms;
        double rhs = (active ? pd[i] + op.p0[i] : qd[i] + op.q0[i]);
        for (std::size_t k = 0; k < ng; ++k) {
          if (grid.generator_bus(k) == i) terms.emplace_back(active ? sv.pg[k] : sv.qg[k], 1.0);
        }
        if (station_at[i] != kNoVar) {
          terms.emplace_back(station_at[i], active ? -1.0 : -grid.alpha_pq());
        }
        for (std::size_t j = 0; j < n; ++j) {
          if (jv(i, j) != 0.0) {
            terms.emplace_back(sv.v[j], -jv(i, j));
            rhs -= jv(i, j) * op.v0[j];
          }
          if (jt(i, j) != 0.0) {
            terms.emplace_back(sv.theta[j], -jt(i, j));
            rhs -= jt(i, j) * op.theta0[j];
          }
        }
        b.add_equality(terms, rhs);
        ++census.flow_balance_rows;
      }
    }
  }

  // Coupling: x = sum delta lambda (pu).
  for (const CouplingRow& row : p.coupling) {
    const StepVars& sv = p.vars.steps[static_cast<std::size_t>(row.time)];
    const std::size_t s = static_cast<std::size_t>(
        std::find(p.stations.begin(), p.stations.end(), row.location) - p.stations.begin());
    Terms terms{{sv.x[s], 1.0}};
    for (std::size_t h = 0; h < fleets.size(); ++h) {
      for (const auto& [a, delta] : row.terms) {
        if (p.vars.lambda[h][a] != kNoVar) terms.emplace_back(p.vars.lambda[h][a], -delta / base);
      }
    }
    if (fixed_demand) continue;  // x is pinned by its bounds
    b.add_equality(terms, 0.0);
    ++census.coupling_rows;
  }

  // Fleet flow balance and departure flexibility.
  for (std::size_t h = 0; h < fleets.size(); ++h) {
    for (const auto& row : flow_balance_rows(g, fleets[h])) {
      Terms terms;
      for (const auto& [a, c] : row.lambda_terms) {
        if (p.vars.lambda[h][a] != kNoVar) terms.emplace_back(p.vars.lambda[h][a], c);
      }
      if (auto it = p.vars.psi[h].find(g.node(row.node)); it != p.vars.psi[h].end()) {
        terms.emplace_back(it->second, row.departure_coeff);
      }
      b.add_equality(terms, row.rhs);
      ++census.fleet_balance_rows;
    }
    for (const auto& [target, amount] : fleets[h].criteria.withdrawals) {
      Terms terms;
      for (const auto& u : flexibility_set(g, target).members) {
        terms.emplace_back(p.vars.psi[h].at(u), 1.0);
      }
      b.add_equality(terms, amount);
      ++census.flexibility_rows;
    }
  }

  // Linearized thermal limits.
  for (int t = 0; t < steps; ++t) {
    const StepVars& sv = p.vars.steps[static_cast<std::size_t>(t)];
    const OperatingPoint& op = ops.size() == 1 ? ops.front() : ops[static_cast<std::size_t>(t)];
    for (std::size_t k = 0; k < grid.lines().size(); ++k) {
      const ThermalRow row = linear_thermal_limit(grid, op, k);
      if (!row.active) continue;
      const double rhs = row.limit_sq - row.value + row.d_vi * op.v0[row.from] +
                         row.d_vj * op.v0[row.to] + row.d_thi * op.theta0[row.from] +
                         row.d_thj * op.theta0[row.to];
      b.add_inequality({{sv.v[row.from], row.d_vi},
                        {sv.v[row.to], row.d_vj},
                        {sv.theta[row.from], row.d_thi},
                        {sv.theta[row.to], row.d_thj}},
                       rhs);
      ++census.thermal_rows;
    }
  }

  // Voltage penalty.
  for (int t = 0; t < steps; ++t) {
    const StepVars& sv = p.vars.steps[static_cast<std::size_t>(t)];
    switch (config.penalty.kind) {
      case PenaltyKind::L2:
        for (std::size_t i = 0; i < n; ++i) {
          b.add_quadratic(sv.v[i], sv.v[i], w);
          b.add_cost(sv.v[i], -2.0 * w * p.vref[i]);
          b.add_constant(w * p.vref[i] * p.vref[i]);
        }
        break;
      case PenaltyKind::L1:
        for (std::size_t i = 0; i < n; ++i) {
          b.add_inequality({{sv.v[i], 1.0}, {sv.aux[i], -1.0}}, p.vref[i]);
          b.add_inequality({{sv.v[i], -1.0}, {sv.aux[i], -1.0}}, -p.vref[i]);
          census.penalty_rows += 2;
        }
        break;
      case PenaltyKind::Linf:
        for (std::size_t i : p.top_set) {
          b.add_inequality({{sv.v[i], 1.0}, {sv.linf, -1.0}}, p.vref[i]);
          b.add_inequality({{sv.v[i], -1.0}, {sv.linf, -1.0}}, -p.vref[i]);
          census.penalty_rows += 2;
        }
        break;
    }
  }

  census.variables = b.num_vars();
  p.qp = b.build();
  return p;
}

namespace {

// Re-solves the nonlinear power flow at the dispatched generation and demand.
PowerFlowSolution resolve_step(const GridCase& grid, const std::vector<double>& pg_pu,
                               const std::vector<double>& qg_pu, const std::vector<double>& x_bus_pu) {
  const std::size_t n = grid.bus_count();
  PowerFlowSpec spec;
  spec.p_net.assign(n, 0.0);
  spec.q_net.assign(n, 0.0);
  const auto pd = grid.pd();
  const auto qd = grid.qd();
  for (std::size_t k = 0; k < grid.generator_count(); ++k) {
    spec.p_net[grid.generator_bus(k)] += pg_pu[k];
    spec.q_net[grid.generator_bus(k)] += qg_pu[k];
  }
  for (std::size_t i = 0; i < n; ++i) {
    spec.p_net[i] -= pd[i] + x_bus_pu[i];
    spec.q_net[i] -= qd[i] + grid.alpha_pq() * x_bus_pu[i];
  }
  return solve_power_flow(grid, spec);
}

void summarize_voltages(Schedule& s, const GridCase& grid, const std::vector<double>& vref,
                        PenaltyKind kind, const std::vector<std::size_t>& top_set) {
  const std::size_t n = grid.bus_count();
  std::vector<bool> bus_violated(n, false);
  ViolationSummary& vs = s.violations;
  for (const StepResult& st : s.per_step) {
    std::vector<double> dev(n), dev_lin(n);
    for (std::size_t i = 0; i < n; ++i) {
      dev[i] = st.v[i] - vref[i];
      dev_lin[i] = st.v_linear[i] - vref[i];
      if (outside_band(st.v[i])) {
        ++vs.count;
        bus_violated[i] = true;
      }
      if (outside_band(st.v_linear[i])) ++vs.count_linear;
      vs.max_deviation = std::max(vs.max_deviation, std::abs(dev[i]));
      vs.max_deviation_linear = std::max(vs.max_deviation_linear, std::abs(dev_lin[i]));
      vs.sum_deviation_linear += std::abs(dev_lin[i]);
    }
    for (std::size_t i : top_set) {
      vs.max_abs_deviation_linear_top = std::max(vs.max_abs_deviation_linear_top, std::abs(dev_lin[i]));
    }
    s.objective.penalty += penalty_value(kind, dev_lin, top_set);
    s.objective.penalty_nonlinear += penalty_value(kind, dev, top_set);
  }
  vs.buses_with_violation = static_cast<std::size_t>(std::count(bus_violated.begin(), bus_violated.end(), true));
}

double generation_cost(const GridCase& grid, const std::vector<double>& pg_mw) {
  double c = 0.0;
  for (std::size_t k = 0; k < grid.generator_count(); ++k) {
    const GeneratorData& gen = grid.generator(k);
    c += gen.c2 * pg_mw[k] * pg_mw[k] + gen.c1 * pg_mw[k] + gen.c0;
  }
  return c;
}

double bound_violation(const QuadraticProgram& qp, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t j = 0; j < qp.num_vars; ++j) {
    worst = std::max({worst, qp.lower[j] - x[j], x[j] - qp.upper[j]});
  }
  return worst;
}

}  // namespace

Schedule solve_coopt(const CoOptProblem& p, const QpOptions& options) {
  const GridCase& grid = *p.grid;
  const ExpandedGraph& g = *p.graph;
  const std::size_t n = grid.bus_count();
  const std::size_t ng = grid.generator_count();
  const double base = grid.base_mva();

  SolveResult r = solve(p.qp, options);
  if (r.status == QpStatus::Infeasible) {
    throw Error(ErrorKind::Infeasible, "co-optimization is infeasible; first infeasible family: " +
                                           first_infeasible_family(p));
  }
  if (r.status != QpStatus::Optimal) {
    throw Error(ErrorKind::SolverFailure, "quadratic program ended with status " + qp_status_name(r.status));
  }
  for (std::size_t j = 0; j < p.qp.num_vars; ++j) {
    if (p.qp.lower[j] == p.qp.upper[j]) r.x[j] = p.qp.lower[j];
  }

  Schedule s;
  s.steps = p.steps;
  s.dt_hours = p.dt_hours;
  s.stations = p.stations;
  s.iterations = r.iterations;
  for (std::size_t i = 0; i < n; ++i) s.bus_ids.push_back(grid.bus(i).id);
  s.flows.lambda.assign(p.fleets.size(), std::vector<double>(g.arcs().size(), 0.0));
  s.flows.departures.resize(p.fleets.size());
  for (std::size_t h = 0; h < p.fleets.size(); ++h) {
    for (ArcId a = 0; a < g.arcs().size(); ++a) {
      if (p.vars.lambda[h][a] != kNoVar) s.flows.lambda[h][a] = r.x[p.vars.lambda[h][a]];
    }
    for (const auto& [node, idx] : p.vars.psi[h]) s.flows.departures[h][node] = r.x[idx];
  }

  for (int t = 0; t < p.steps; ++t) {
    const StepVars& sv = p.vars.steps[static_cast<std::size_t>(t)];
    StepResult st;
    std::vector<double> pg(ng), qg(ng), x_bus(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      st.v_linear.push_back(r.x[sv.v[i]]);
      st.theta_linear.push_back(r.x[sv.theta[i]]);
    }
    for (std::size_t k = 0; k < ng; ++k) {
      pg[k] = r.x[sv.pg[k]];
      qg[k] = r.x[sv.qg[k]];
      st.pg_mw.push_back(pg[k] * base);
      st.qg_mvar.push_back(qg[k] * base);
    }
    for (std::size_t si = 0; si < p.stations.size(); ++si) {
      const double x = r.x[sv.x[si]];
      x_bus[p.station_bus[si]] += x;
      st.x_mw.push_back(x * base);
      double vehicles = 0.0;
      for (ArcId a : g.charging_arcs_at(p.stations[si], t)) {
        for (std::size_t h = 0; h < p.fleets.size(); ++h) vehicles += s.flows.lambda[h][a];
      }
      st.vehicles_charging.push_back(vehicles);
    }
    const PowerFlowSolution pf = resolve_step(grid, pg, qg, x_bus);
    st.v = pf.v;
    st.theta = pf.theta;
    s.objective.generation_cost += generation_cost(grid, st.pg_mw);
    s.per_step.push_back(std::move(st));
  }
  summarize_voltages(s, grid, p.vref, p.config.penalty.kind, p.top_set);
  s.objective.total =
      p.config.cost_weight * s.objective.generation_cost + p.config.penalty.weight * s.objective.penalty;
  s.objective.solver_objective = r.objective;

  ScheduleChecks& c = s.checks;
  c.primal_residual = std::max(r.residuals.primal_eq, r.residuals.primal_ineq);
  c.bound_violation = bound_violation(p.qp, r.x);
  for (const CouplingRow& row : p.coupling) {
    double x = 0.0;
    for (std::size_t h = 0; h < p.fleets.size(); ++h) {
      for (const auto& [a, delta] : row.terms) x += delta * s.flows.lambda[h][a];
    }
    const std::size_t si = static_cast<std::size_t>(
        std::find(p.stations.begin(), p.stations.end(), row.location) - p.stations.begin());
    c.coupling_residual_mw =
        std::max(c.coupling_residual_mw, std::abs(x - s.per_step[static_cast<std::size_t>(row.time)].x_mw[si]));
  }
  for (std::size_t h = 0; h < p.fleets.size(); ++h) {
    c.flow_balance_residual = std::max(
        c.flow_balance_residual, flow_balance_violation(g, p.fleets[h], s.flows.lambda[h], s.flows.departures[h]));
    c.flexibility_residual =
        std::max(c.flexibility_residual, flexibility_violation(g, p.fleets[h], s.flows.departures[h]));
    for (double v : s.flows.lambda[h]) c.min_flow = std::min(c.min_flow, v);
    for (const auto& [node, v] : s.flows.departures[h]) c.min_flow = std::min(c.min_flow, v);
  }
  return s;
}

Schedule dispatch_fixed_demand(const GridCase& grid, std::span<const OperatingPoint> ops,
                               const ExpandedGraph& g, const DemandProfile& demand,
                               const CoOptConfig& config, const QpOptions& options) {
  const int steps = g.horizon().steps;
  if (demand.size() != static_cast<std::size_t>(steps)) {
    throw Error(ErrorKind::InconsistentHorizon, "demand profile covers " + std::to_string(demand.size()) +
                                                    " steps, horizon has " + std::to_string(steps));
  }
  if (ops.size() != 1 && ops.size() != static_cast<std::size_t>(steps)) {
    throw Error(ErrorKind::InconsistentHorizon, "operating points do not match the horizon");
  }
  // A two-step graph over the same transport network; only step 0 carries demand.
  const ExpandedGraph single = build_expanded_graph(g.transport(), g.energy(), {2, g.horizon().dt_hours},
                                                    g.energy_step_kwh());
  Schedule out;
  out.steps = steps;
  out.dt_hours = g.horizon().dt_hours;
  for (int t = 0; t < steps; ++t) {
    const auto& row = demand[static_cast<std::size_t>(t)];
    DemandProfile one{row, std::vector<double>(row.size(), 0.0)};
    const OperatingPoint& op = ops.size() == 1 ? ops.front() : ops[static_cast<std::size_t>(t)];
    CoOptProblem p = assemble(grid, std::span<const OperatingPoint>(&op, 1), single, {}, config, one);
    Schedule step = solve_coopt(p, options);
    if (t == 0) {
      out.bus_ids = step.bus_ids;
      out.stations = step.stations;
    }
    out.per_step.push_back(std::move(step.per_step.front()));
    out.iterations += step.iterations;
    out.checks.primal_residual = std::max(out.checks.primal_residual, step.checks.primal_residual);
    out.checks.bound_violation = std::max(out.checks.bound_violation, step.checks.bound_violation);
  }
  // Recompute summaries over the whole horizon.
  const std::vector<double> vref = config.penalty.vref.empty() ? default_vref(grid) : config.penalty.vref;
  const auto top = top_l_buses(ops.front().v0, vref, config.penalty.top_l);
  for (const StepResult& st : out.per_step) out.objective.generation_cost += generation_cost(grid, st.pg_mw);
  summarize_voltages(out, grid, vref, config.penalty.kind, top);
  out.objective.total =
      config.cost_weight * out.objective.generation_cost + config.penalty.weight * out.objective.penalty;
  out.objective.solver_objective = out.objective.total;
  return out;
}

}  // namespace hdev
