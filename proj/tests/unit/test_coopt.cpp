#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "hdev/coopt.hpp"
#include "hdev/error.hpp"
#include "hdev/io.hpp"
#include "oracles/schedule_enum.hpp"

using namespace hdev;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an hdev::Error");
  return ErrorKind::IoError;
}

std::string fixture(const char* name) { return std::string(HDEV_FIXTURES) + "/" + name; }

// One bus, one generator, a 10 MW load.
CaseData one_bus(double pd_mw = 10.0) {
  CaseData c;
  c.slack = 1;
  c.buses.push_back({1, pd_mw, 0.0, 0.0, 0.0, true, 1.0});
  GeneratorData gen;
  gen.bus = 1;
  gen.pmin_mw = 0.0;
  gen.pmax_mw = 100.0;
  gen.qmin_mvar = -50.0;
  gen.qmax_mvar = 50.0;
  gen.c2 = 0.01;
  gen.c1 = 10.0;
  c.generators.push_back(gen);
  return c;
}

FleetSpec fleet(ExpandedNode from, ExpandedNode to, double size) {
  FleetSpec f;
  f.id = "f";
  f.size = size;
  f.criteria.injections[from] = size;
  f.criteria.withdrawals[to] = size;
  return f;
}

struct TwoBus {
  GridCase grid;
  TransportGraph transport;
  ExpandedGraph g;
  std::vector<OperatingPoint> ops;
};

TwoBus two_bus(int steps, int levels) {
  TwoBus tb{io::load_grid_case(fixture("two_bus.json")), io::load_transport(fixture("transport_two_bus.json")).graph,
            {}, {}};
  tb.g = build_expanded_graph(tb.transport, {0, levels - 1}, {steps, 1.0}, 20000.0);
  tb.ops.push_back(solve_operating_point(tb.grid));
  return tb;
}

}  // namespace

TEST_CASE("three vehicles on one charging arc draw 0.45 MW") {
  const GridCase grid(one_bus());
  const TransportGraph tg({1}, {}, {1});
  const ExpandedGraph g = build_expanded_graph(tg, {0, 1}, {2, 1.0}, 150.0);
  const OperatingPoint op = solve_operating_point(grid);
  const std::vector<FleetSpec> fleets{fleet({1, 0, 0}, {1, 1, 1}, 3.0)};
  CoOptConfig cfg;
  cfg.penalty.weight = 1.0;
  const CoOptProblem p = assemble(grid, std::span(&op, 1), g, fleets, cfg);
  const Schedule s = solve_coopt(p);
  CHECK(s.per_step[0].x_mw[0] == doctest::Approx(0.45).epsilon(1e-9));
  CHECK(std::abs(s.per_step[1].x_mw[0]) < 1e-9);
  CHECK(s.per_step[0].vehicles_charging[0] == doctest::Approx(3.0).epsilon(1e-9));
  // Single balance row: generation covers load plus charging.
  CHECK(s.per_step[0].pg_mw[0] == doctest::Approx(10.45).epsilon(1e-8));
  CHECK(s.per_step[1].pg_mw[0] == doctest::Approx(10.0).epsilon(1e-8));
  CHECK(s.checks.coupling_residual_mw < 1e-6);
}

TEST_CASE("one bus with pinned demand: generation equals load plus demand") {
  const GridCase grid(one_bus(25.0));
  const TransportGraph tg({1}, {}, {1});
  const ExpandedGraph g = build_expanded_graph(tg, {0, 1}, {2, 1.0}, 100.0);
  const OperatingPoint op = solve_operating_point(grid);
  const DemandProfile demand{{1.0}, {0.0}};
  const CoOptProblem p = assemble(grid, std::span(&op, 1), g, {}, CoOptConfig{}, demand);
  const Schedule s = solve_coopt(p);
  CHECK(s.per_step[0].pg_mw[0] == doctest::Approx(26.0).epsilon(1e-9));
  CHECK(s.per_step[1].pg_mw[0] == doctest::Approx(25.0).epsilon(1e-9));
}

TEST_CASE("vehicles with nothing to charge leave demand at zero") {
  const GridCase grid(one_bus());
  const TransportGraph tg({1}, {}, {1});
  const ExpandedGraph g = build_expanded_graph(tg, {0, 2}, {3, 1.0}, 150.0);
  const OperatingPoint op = solve_operating_point(grid);
  const std::vector<FleetSpec> fleets{fleet({1, 1, 0}, {1, 1, 2}, 4.0)};
  const CoOptProblem p = assemble(grid, std::span(&op, 1), g, fleets, CoOptConfig{});
  const Schedule s = solve_coopt(p);
  for (const StepResult& st : s.per_step) {
    CHECK(std::abs(st.x_mw[0]) < 1e-6);
    CHECK(st.pg_mw[0] == doctest::Approx(10.0).epsilon(1e-6));
  }
}

TEST_CASE("coupling rows equal a direct summation over arcs") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    CaseData c;
    c.slack = 1;
    const int n = 2 + static_cast<int>(rng() % 4);
    for (int i = 1; i <= n; ++i) c.buses.push_back({i, 5.0, 1.0, 0.0, 0.0, i == 1, 1.0});
    for (int i = 2; i <= n; ++i) c.branches.push_back({i - 1, i, 0.01, 0.1, 0.0, 0.0, 1.0});
    GeneratorData gen;
    gen.bus = 1;
    gen.pmax_mw = 500.0;
    gen.qmin_mvar = -500.0;
    gen.qmax_mvar = 500.0;
    c.generators.push_back(gen);
    const GridCase grid(c);
    std::vector<LocationId> locs, stations;
    std::vector<Road> roads;
    for (int i = 1; i <= n; ++i) {
      locs.push_back(i);
      if (rng() % 2 || i == 1) stations.push_back(i);
      if (i > 1) roads.push_back({i - 1, i, 1 + static_cast<int>(rng() % 2), 1.0});
    }
    const TransportGraph tg(locs, roads, stations);
    const bool v2g = rng() % 2;
    const ExpandedGraph g = build_expanded_graph(tg, {0, 1 + static_cast<int>(rng() % 3)},
                                                 {2 + static_cast<int>(rng() % 4), 0.5}, 50.0);
    const auto rows = coupling_rows(grid, g, v2g);
    CHECK(rows.size() == stations.size() * static_cast<std::size_t>(g.horizon().steps));
    std::vector<double> flows(g.arcs().size());
    for (double& f : flows) f = static_cast<double>(rng() % 7);
    for (const CouplingRow& row : rows) {
      double assembled = 0.0;
      for (const auto& [a, delta] : row.terms) assembled += delta * flows[a];
      double direct = 0.0;
      for (ArcId a = 0; a < g.arcs().size(); ++a) {
        const Arc& arc = g.arcs()[a];
        if (arc.tail.location != row.location || arc.tail.time != row.time) continue;
        if (arc.kind == ArcKind::Charging) direct += 0.1 * flows[a];
        if (arc.kind == ArcKind::Discharging && v2g) direct -= 0.1 * flows[a];
      }
      CHECK(assembled == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("stations must be grid buses") {
  const GridCase grid(one_bus());
  const TransportGraph tg({1, 7}, {{1, 7, 1, 1.0}}, {7});
  const ExpandedGraph g = build_expanded_graph(tg, {0, 1}, {2, 1.0}, 100.0);
  CHECK(kind_of([&] { coupling_rows(grid, g, false); }) == ErrorKind::LocationNotABus);
}

TEST_CASE("penalty arithmetic") {
  const std::vector<double> zero(3, 0.0);
  const std::vector<std::size_t> all{0, 1, 2};
  for (PenaltyKind k : {PenaltyKind::L2, PenaltyKind::L1, PenaltyKind::Linf}) {
    CHECK(penalty_value(k, zero, all) == 0.0);
  }
  const std::vector<double> dev{0.03, 0.01, 0.05};
  CHECK(penalty_value(PenaltyKind::L1, dev, all) == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(penalty_value(PenaltyKind::Linf, dev, top_l_buses(dev, zero, 3)) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(penalty_value(PenaltyKind::L2, dev, all) == doctest::Approx(0.0035).epsilon(1e-12));
  const std::vector<double> mixed{-0.04, 0.01, 0.02};
  CHECK(penalty_value(PenaltyKind::Linf, mixed, top_l_buses(mixed, zero, 1)) == doctest::Approx(0.04));
}

TEST_CASE("top-L set selection") {
  const std::vector<double> v0{1.0, 0.97, 1.02, 0.97};
  const std::vector<double> vref(4, 1.0);
  CHECK(top_l_buses(v0, vref, 1) == std::vector<std::size_t>{1});
  CHECK(top_l_buses(v0, vref, 2) == std::vector<std::size_t>{1, 3});
  CHECK(top_l_buses(v0, vref, 0).size() == 4);
  CHECK(kind_of([&] { top_l_buses(v0, vref, 5); }) == ErrorKind::BadTopL);
  CHECK(parse_penalty_kind("LINF") == PenaltyKind::Linf);
  CHECK(!parse_penalty_kind("l3"));
}

TEST_CASE("L1 epigraph optimum matches direct evaluation") {
  // Three free voltages tied by one balance-like row; L1 epigraph via the QP.
  QpBuilder b;
  const std::vector<double> vref{1.0, 0.98, 1.03};
  std::vector<std::size_t> v, s;
  for (int i = 0; i < 3; ++i) v.push_back(b.add_variable(0.9, 1.1, 0.0));
  for (int i = 0; i < 3; ++i) s.push_back(b.add_variable(-kInf, kInf, 1.0));
  b.add_equality({{v[0], 1.0}, {v[1], 1.0}, {v[2], 1.0}}, 2.95);
  for (int i = 0; i < 3; ++i) {
    b.add_inequality({{v[i], 1.0}, {s[i], -1.0}}, vref[i]);
    b.add_inequality({{v[i], -1.0}, {s[i], -1.0}}, -vref[i]);
  }
  const SolveResult r = solve(b.build());
  REQUIRE(r.status == QpStatus::Optimal);
  double direct = 0.0;
  for (int i = 0; i < 3; ++i) direct += std::abs(r.x[v[i]] - vref[i]);
  CHECK(r.objective == doctest::Approx(direct).epsilon(1e-6));
  // Sum of references is 3.01, so at least 0.06 of deviation is forced.
  CHECK(direct == doctest::Approx(0.06).epsilon(1e-6));
}

TEST_CASE("census matches the closed form") {
  const GridCase grid = io::load_grid_case(fixture("ieee24.json"));
  const TransportGraph tg = io::load_transport(fixture("transport_ieee24.json")).graph;
  const ExpandedGraph g = build_expanded_graph(tg, {0, 4}, {6, 1.0}, 100.0);
  const OperatingPoint op = solve_operating_point(grid);
  const std::vector<FleetSpec> fleets{fleet({1, 4, 0}, {22, 1, 5}, 10.0), fleet({2, 3, 1}, {14, 2, 4}, 5.0)};
  const std::size_t n = grid.bus_count(), ng = grid.generator_count(), T = 6;
  const std::size_t ns = tg.stations().size();
  std::size_t limited = 0;
  for (const Line& l : grid.lines()) limited += std::isfinite(l.i_max) ? 1 : 0;
  std::size_t arcs_no_discharge = 0, pinned = 0;
  for (const Arc& a : g.arcs()) arcs_no_discharge += a.kind == ArcKind::Discharging ? 0 : 1;
  for (std::size_t i = 0; i < n; ++i) pinned += grid.bus(i).avr || i == grid.slack() ? 1 : 0;
  std::size_t psi = 0, targets = 0;
  for (const FleetSpec& f : fleets) {
    for (const auto& [target, amount] : f.criteria.withdrawals) {
      psi += flexibility_set(g, target).members.size();
      ++targets;
    }
  }

  for (PenaltyKind k : {PenaltyKind::L2, PenaltyKind::L1, PenaltyKind::Linf}) {
    CAPTURE(penalty_kind_name(k));
    CoOptConfig cfg;
    cfg.penalty.kind = k;
    cfg.penalty.weight = 1.0;
    cfg.penalty.top_l = 5;
    const CoOptProblem p = assemble(grid, std::span(&op, 1), g, fleets, cfg);
    const Census& c = p.census;
    const std::size_t aux = k == PenaltyKind::L1 ? n : k == PenaltyKind::Linf ? 1 : 0;
    CHECK(c.variables == T * (2 * n + 2 * ng + ns + aux) + fleets.size() * arcs_no_discharge + psi);
    CHECK(c.fixed_variables == T * (pinned + 1));
    CHECK(c.flow_balance_rows == 2 * n * T);
    CHECK(c.coupling_rows == ns * T);
    CHECK(c.fleet_balance_rows == fleets.size() * g.nodes().size());
    CHECK(c.flexibility_rows == targets);
    CHECK(c.thermal_rows == limited * T);
    const std::size_t pen = k == PenaltyKind::L1 ? 2 * n * T : k == PenaltyKind::Linf ? 2 * 5 * T : 0;
    CHECK(c.penalty_rows == pen);
    CHECK(p.qp.num_vars == c.variables);
  }
}

TEST_CASE("zero fleets with zero weight reduce to linearized dispatch") {
  const GridCase grid = io::load_grid_case(fixture("ieee24.json"));
  const TransportGraph tg = io::load_transport(fixture("transport_ieee24.json")).graph;
  const ExpandedGraph g = build_expanded_graph(tg, {0, 1}, {2, 1.0}, 100.0);
  const OperatingPoint op = solve_operating_point(grid);
  CoOptConfig cfg;
  cfg.penalty.kind = PenaltyKind::L2;
  cfg.penalty.weight = 0.0;
  const Schedule s = solve_coopt(assemble(grid, std::span(&op, 1), g, {}, cfg));
  for (const StepResult& st : s.per_step) {
    for (std::size_t i = 0; i < grid.bus_count(); ++i) {
      if (grid.bus(i).avr) CHECK(st.v_linear[i] == doctest::Approx(grid.bus(i).vref).epsilon(1e-9));
    }
    for (double x : st.x_mw) CHECK(std::abs(x) < 1e-6);
    for (std::size_t k = 0; k < grid.generator_count(); ++k) {
      CHECK(st.pg_mw[k] >= grid.generator(k).pmin_mw - 1e-6);
      CHECK(st.pg_mw[k] <= grid.generator(k).pmax_mw + 1e-6);
    }
  }
  CHECK(s.objective.penalty >= 0.0);
  CHECK(s.objective.solver_objective == doctest::Approx(s.objective.generation_cost).epsilon(1e-6));
}

TEST_CASE("two-bus optimum is bounded by exhaustive integer schedules") {
  for (int steps : {2, 3}) {
    for (PenaltyKind k : {PenaltyKind::L2, PenaltyKind::L1, PenaltyKind::Linf}) {
      CAPTURE(steps);
      CAPTURE(penalty_kind_name(k));
      const TwoBus tb = two_bus(steps, 3);
      const FleetSpec f = fleet({1, 1, 0}, {2, steps == 2 ? 0 : 1, steps - 1}, 1.0);
      CoOptConfig cfg;
      cfg.penalty.kind = k;
      cfg.penalty.weight = 1000.0;
      const CoOptProblem p = assemble(tb.grid, tb.ops, tb.g, std::vector<FleetSpec>{f}, cfg);
      const SolveResult r = solve(p.qp);
      REQUIRE(r.status == QpStatus::Optimal);
      const auto best = oracle::best_integer_schedule(tb.grid, tb.ops, tb.g, f, cfg);
      REQUIRE(best.schedules > 0);
      CHECK(r.objective <= best.objective + 1e-6);
      bool integral = true;
      for (const auto& lam : p.vars.lambda) {
        for (std::size_t j : lam) {
          if (j != kNoVar) integral = integral && std::abs(r.x[j] - std::round(r.x[j])) < 1e-6;
        }
      }
      if (integral) CHECK(r.objective == doctest::Approx(best.objective).epsilon(1e-6));
    }
  }
}

TEST_CASE("raising the penalty weight never raises the penalty") {
  const TwoBus tb = two_bus(3, 3);
  const FleetSpec f = fleet({1, 1, 0}, {2, 1, 2}, 1.0);
  for (PenaltyKind k : {PenaltyKind::L2, PenaltyKind::L1, PenaltyKind::Linf}) {
    double previous = std::numeric_limits<double>::infinity();
    double previous_cost = -1.0;
    for (double w : {0.0, 10.0, 100.0, 1000.0, 10000.0}) {
      CoOptConfig cfg;
      cfg.penalty.kind = k;
      cfg.penalty.weight = w;
      const Schedule s = solve_coopt(assemble(tb.grid, tb.ops, tb.g, std::vector<FleetSpec>{f}, cfg));
      CHECK(s.objective.penalty <= previous + 1e-6);
      CHECK(s.objective.generation_cost >= previous_cost - 1e-4);
      previous = s.objective.penalty;
      previous_cost = s.objective.generation_cost;
    }
  }
}

TEST_CASE("L1 and Linf optima dominate each other on their own measure") {
  const GridCase grid = io::load_grid_case(fixture("ieee24.json"));
  const TransportGraph tg = io::load_transport(fixture("transport_ieee24.json")).graph;
  const ExpandedGraph g = build_expanded_graph(tg, {0, 4}, {10, 1.0}, 100.0);
  const OperatingPoint op = solve_operating_point(grid);
  const std::vector<FleetSpec> fleets{fleet({1, 4, 0}, {14, 2, 9}, 1000.0)};
  auto run = [&](PenaltyKind k) {
    CoOptConfig cfg;
    cfg.penalty.kind = k;
    cfg.penalty.weight = 1.0;
    cfg.cost_weight = 0.0;
    const CoOptProblem p = assemble(grid, std::span(&op, 1), g, fleets, cfg);
    return std::make_pair(solve_coopt(p), p.top_set);
  };
  const auto [l1, top1] = run(PenaltyKind::L1);
  const auto [li, topi] = run(PenaltyKind::Linf);
  const std::vector<double> vref = default_vref(grid);
  auto measure = [&](const Schedule& s, PenaltyKind k) {
    double total = 0.0;
    for (const StepResult& st : s.per_step) {
      std::vector<double> dev(st.v_linear.size());
      for (std::size_t i = 0; i < dev.size(); ++i) dev[i] = st.v_linear[i] - vref[i];
      total += penalty_value(k, dev, topi);
    }
    return total;
  };
  CHECK(measure(li, PenaltyKind::Linf) <= measure(l1, PenaltyKind::Linf) + 1e-6);
  CHECK(measure(l1, PenaltyKind::L1) <= measure(li, PenaltyKind::L1) + 1e-6);
}

TEST_CASE("contradictory criteria are infeasible") {
  const TwoBus tb = two_bus(3, 3);
  // Level 0 to level 2 across a road in one step cannot be done.
  const FleetSpec f = fleet({1, 0, 0}, {2, 2, 1}, 1.0);
  const CoOptProblem p = assemble(tb.grid, tb.ops, tb.g, std::vector<FleetSpec>{f}, CoOptConfig{});
  try {
    solve_coopt(p);
    FAIL("expected Infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
    CHECK(std::string(e.what()).find("fleet") != std::string::npos);
  }
}

TEST_CASE("station load past the grid limit is infeasible on both backends") {
  const Scenario sc = io::load_scenario(fixture("scenario_case_study.json"));
  const GridCase grid(sc.grid);
  const ExpandedGraph g = build_expanded_graph(sc.transport, sc.energy, {2, 0.5}, sc.energy_step_kwh);
  const std::vector<OperatingPoint> ops{solve_operating_point(grid)};
  const auto stations = sc.transport.stations();
  const auto bus4 = std::find_if(stations.begin(), stations.end(), [](LocationId s) { return s == 4; });
  REQUIRE(bus4 != stations.end());
  CoOptConfig cfg;
  cfg.penalty = sc.penalty;
  for (double mw : {250.0, 260.0, 280.0}) {
    DemandProfile d(2, std::vector<double>(stations.size(), 0.0));
    d[0][static_cast<std::size_t>(bus4 - stations.begin())] = mw;
    const CoOptProblem p = assemble(grid, ops, g, {}, cfg, d);
    for (KktBackend be : {KktBackend::Dense, KktBackend::Sparse}) {
      CAPTURE(mw);
      QpOptions o;
      o.backend = be;
      const SolveResult r = solve(p.qp, o);
      CHECK(r.status == (mw < 255.0 ? QpStatus::Optimal : QpStatus::Infeasible));
    }
  }
}

TEST_CASE("large fleet Linf run converges") {
  Scenario sc = io::load_scenario(fixture("scenario_case_study.json"));
  RunOptions o;
  o.penalty = PenaltyKind::Linf;
  o.fleet_size = 6000.0;
  const RunResult r = run_scenario(sc, o);
  CHECK(r.schedule.steps == sc.horizon.steps);
  CHECK(r.schedule.checks.coupling_residual_mw < 1e-6);
  CHECK(r.schedule.checks.flow_balance_residual < 1e-6);
}

TEST_CASE("assembly rejects inconsistent horizons") {
  const TwoBus tb = two_bus(3, 3);
  const std::vector<OperatingPoint> two(2, tb.ops.front());
  CHECK(kind_of([&] { assemble(tb.grid, two, tb.g, {}, CoOptConfig{}); }) == ErrorKind::InconsistentHorizon);
  const DemandProfile short_profile(2, std::vector<double>(2, 0.0));
  CHECK(kind_of([&] { assemble(tb.grid, tb.ops, tb.g, {}, CoOptConfig{}, short_profile); }) ==
        ErrorKind::InconsistentHorizon);
  const FleetSpec late = fleet({1, 1, 0}, {2, 1, 5}, 1.0);
  CHECK(kind_of([&] { assemble(tb.grid, tb.ops, tb.g, std::vector<FleetSpec>{late}, CoOptConfig{}); }) ==
        ErrorKind::InconsistentHorizon);
  CoOptConfig bad;
  bad.penalty.kind = PenaltyKind::Linf;
  bad.penalty.top_l = 3;
  CHECK(kind_of([&] { assemble(tb.grid, tb.ops, tb.g, {}, bad); }) == ErrorKind::BadTopL);
}

TEST_CASE("solved schedules satisfy fleet and bound invariants") {
  const TwoBus tb = two_bus(4, 3);
  const std::vector<FleetSpec> fleets{fleet({1, 1, 0}, {2, 1, 3}, 2.0), fleet({2, 2, 0}, {1, 0, 2}, 1.0)};
  for (bool v2g : {false, true}) {
    CoOptConfig cfg;
    cfg.enable_v2g = v2g;
    cfg.penalty.weight = 100.0;
    const Schedule s = solve_coopt(assemble(tb.grid, tb.ops, tb.g, fleets, cfg));
    CHECK(s.checks.flow_balance_residual < 1e-6);
    CHECK(s.checks.flexibility_residual < 1e-6);
    CHECK(s.checks.coupling_residual_mw < 1e-6);
    CHECK(s.checks.min_flow > -1e-6);
    CHECK(s.checks.bound_violation < 1e-6);
    CHECK(s.checks.primal_residual < 1e-6);
  }
}
