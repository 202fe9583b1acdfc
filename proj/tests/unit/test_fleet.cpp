#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "doctest.h"
#include "hdev/error.hpp"
#include "hdev/fleet.hpp"
#include "hdev/qp.hpp"

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

FleetSpec make_fleet(ExpandedNode from, ExpandedNode to, double size) {
  FleetSpec f;
  f.id = "f";
  f.size = size;
  if (size > 0) {
    f.criteria.injections[from] = size;
    f.criteria.withdrawals[to] = size;
  }
  return f;
}

// All expanded-graph paths from `from` ending at any node accepted by `stop`.
void enumerate_paths(const ExpandedGraph& g, NodeId from, const std::function<bool(NodeId)>& stop,
                     std::vector<ArcId>& prefix, std::vector<std::vector<ArcId>>& out) {
  if (stop(from)) out.push_back(prefix);
  for (ArcId a : g.out_arcs(from)) {
    prefix.push_back(a);
    enumerate_paths(g, *g.index_of(g.arcs()[a].head), stop, prefix, out);
    prefix.pop_back();
  }
}

bool in_set(const FlexibilitySet& s, const ExpandedNode& n) {
  return std::find(s.members.begin(), s.members.end(), n) != s.members.end();
}

}  // namespace

TEST_CASE("single rest arc forces unit flow") {
  TransportGraph t({0, 1}, {}, {1});
  auto g = build_expanded_graph(t, {0, 1}, {2, 1.0}, 100.0);
  const ExpandedNode u{0, 0, 0}, w{0, 0, 1};
  auto fleet = make_fleet(u, w, 1.0);
  auto rows = flow_balance_rows(g, fleet);
  CHECK(rows.size() == g.nodes().size());

  const auto& ru = rows[*g.index_of(u)];
  REQUIRE(ru.lambda_terms.size() == 1);
  CHECK(g.arcs()[ru.lambda_terms[0].first].kind == ArcKind::Resting);
  CHECK(ru.lambda_terms[0].second == 1.0);
  CHECK(ru.rhs == 1.0);
  const auto& rw = rows[*g.index_of(w)];
  REQUIRE(rw.lambda_terms.size() == 1);
  CHECK(rw.lambda_terms[0].second == -1.0);
  CHECK(rw.rhs == 0.0);

  auto flows = baseline_schedule(g, t, fleet);
  CHECK(flows.lambda[0][ru.lambda_terms[0].first] == 1.0);
  CHECK(flows.departures[0].at(w) == 1.0);
  CHECK(flow_balance_violation(g, fleet, flows.lambda[0], flows.departures[0]) == 0.0);
}

TEST_CASE("zero-size fleet has zero right-hand sides") {
  TransportGraph t({0, 1}, {{0, 1, 1, 1.0}});
  auto g = build_expanded_graph(t, {0, 2}, {3, 1.0}, 100.0);
  FleetSpec f;
  f.id = "empty";
  for (const auto& row : flow_balance_rows(g, f)) CHECK(row.rhs == 0.0);
  std::vector<double> zero(g.arcs().size(), 0.0);
  CHECK(flow_balance_violation(g, f, zero, {}) == 0.0);
}

TEST_CASE("criteria outside the graph are rejected") {
  TransportGraph t({0, 1}, {{0, 1, 1, 1.0}});
  auto g = build_expanded_graph(t, {0, 2}, {3, 1.0}, 100.0);
  auto f = make_fleet({0, 1, 0}, {1, 0, 5}, 1.0);
  CHECK(kind_of([&] { flow_balance_rows(g, f); }) == ErrorKind::UnknownNode);
  CHECK(kind_of([&] { flexibility_set(g, {7, 0, 0}); }) == ErrorKind::UnknownNode);
}

TEST_CASE("chain polytope optimum matches integer path enumeration") {
  TransportGraph t({0, 1, 2}, {{0, 1, 1, 1.0}, {1, 2, 1, 1.0}});
  auto g = build_expanded_graph(t, {0, 1}, {3, 1.0}, 100.0);
  const ExpandedNode origin{0, 1, 0}, target{1, 0, 2};
  const double vehicles = 2.0;
  auto fleet = make_fleet(origin, target, vehicles);
  const auto flex = flexibility_set(g, target);

  std::vector<std::vector<ArcId>> paths;
  std::vector<ArcId> prefix;
  enumerate_paths(
      g, *g.index_of(origin), [&](NodeId v) { return in_set(flex, g.node(v)); }, prefix, paths);
  REQUIRE(!paths.empty());

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> cost(-1.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> arc_cost(g.arcs().size());
    for (double& c : arc_cost) c = cost(rng);

    // Integer assignments of 2 vehicles to paths: both on the cheapest one.
    double best_path = std::numeric_limits<double>::infinity();
    for (const auto& p : paths) {
      double s = 0.0;
      for (ArcId a : p) s += arc_cost[a];
      best_path = std::min(best_path, s);
    }

    QpBuilder b;
    for (ArcId a = 0; a < g.arcs().size(); ++a) b.add_variable(0.0, kInf, arc_cost[a]);
    std::vector<std::size_t> psi;
    for (std::size_t k = 0; k < flex.members.size(); ++k) psi.push_back(b.add_variable(0.0, kInf));
    for (const auto& row : flow_balance_rows(g, fleet)) {
      auto terms = row.lambda_terms;
      for (std::size_t k = 0; k < flex.members.size(); ++k) {
        if (g.node(row.node) == flex.members[k]) terms.emplace_back(psi[k], row.departure_coeff);
      }
      b.add_equality(terms, row.rhs);
    }
    std::vector<std::pair<std::size_t, double>> flex_terms;
    for (std::size_t k : psi) flex_terms.emplace_back(k, 1.0);
    b.add_equality(flex_terms, vehicles);
    auto r = solve(b.build());
    CAPTURE(trial);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(r.objective == doctest::Approx(vehicles * best_path).epsilon(1e-6));
  }
}

TEST_CASE("flexibility set membership") {
  TransportGraph t({22}, {});
  const EnergyRange er{0, 4};
  auto g = build_expanded_graph(t, er, {9, 1.0}, 100.0);
  const int quarter = soc_percent_to_level(25.0, er);
  const int half = soc_percent_to_level(50.0, er);
  CHECK(quarter == 1);
  CHECK(half == 2);
  auto s = flexibility_set(g, {22, quarter, 7});
  CHECK(in_set(s, {22, half, 5}));
  CHECK_FALSE(in_set(s, {22, 0, 5}));
  CHECK_FALSE(in_set(s, {22, half, 8}));

  auto single = flexibility_set(g, {22, er.max, 0});
  REQUIRE(single.members.size() == 1);
  CHECK(single.members[0] == ExpandedNode{22, er.max, 0});

  TransportGraph t2({1, 2}, {{1, 2, 1, 1.0}});
  auto g2 = build_expanded_graph(t2, {0, 3}, {4, 1.0}, 100.0);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const ExpandedNode target = g2.node(rng() % g2.nodes().size());
    auto set = flexibility_set(g2, target);
    std::vector<ExpandedNode> scan;
    for (const auto& n : g2.nodes()) {
      if (n.location == target.location && n.energy >= target.energy && n.time <= target.time) {
        scan.push_back(n);
      }
    }
    std::sort(set.members.begin(), set.members.end());
    CHECK(set.members == scan);
  }
}

TEST_CASE("soc and hour rounding") {
  const EnergyRange er{0, 4};
  CHECK(soc_percent_to_level(12.5, er) == 1);
  CHECK(soc_percent_to_level(12.4, er) == 0);
  CHECK(soc_percent_to_level(100.0, er) == 4);
  CHECK(soc_percent_to_level(0.0, {2, 6}) == 2);
  CHECK(hour_to_step(7.0, 1.0) == 7);
  CHECK(hour_to_step(3.0, 0.5) == 6);
  CHECK(hour_to_step(1.25, 0.5) == 3);
}

TEST_CASE("baseline with origin equal to destination only rests") {
  TransportGraph t({3, 4}, {{3, 4, 1, 1.0}});
  auto g = build_expanded_graph(t, {0, 4}, {6, 1.0}, 100.0);
  auto fleet = make_fleet({3, 3, 1}, {3, 2, 4}, 10.0);
  auto flows = baseline_schedule(g, t, fleet);
  for (ArcId a = 0; a < g.arcs().size(); ++a) {
    if (flows.lambda[0][a] != 0.0) CHECK(g.arcs()[a].kind == ArcKind::Resting);
  }
  CHECK(flows.departures[0].at({3, 3, 4}) == 10.0);
  CHECK(flow_balance_violation(g, fleet, flows.lambda[0], flows.departures[0]) == 0.0);
  CHECK(flexibility_violation(g, fleet, flows.departures[0]) == 0.0);
}

TEST_CASE("baseline matches exhaustive single-vehicle path search") {
  // Line 1 - 2 - 3 with a long bypass 1 - 3.
  TransportGraph t({1, 2, 3}, {{1, 2, 1, 2.0}, {2, 3, 1, 2.0}, {1, 3, 1, 5.0}});
  auto g = build_expanded_graph(t, {0, 3}, {7, 1.0}, 100.0);
  for (int e0 = 0; e0 <= 3; ++e0) {
    for (int e1 = 0; e1 <= 3; ++e1) {
      const ExpandedNode origin{1, e0, 0}, target{3, e1, 6};
      auto fleet = make_fleet(origin, target, 1.0);
      const auto flex = flexibility_set(g, target);

      // Oracle: minimize (distance, first arrival at destination) over all paths.
      std::vector<std::vector<ArcId>> paths;
      std::vector<ArcId> prefix;
      enumerate_paths(
          g, *g.index_of(origin), [&](NodeId v) { return in_set(flex, g.node(v)); }, prefix, paths);
      auto score = [&](const std::vector<ArcId>& p) {
        double km = 0.0;
        int arrive = std::numeric_limits<int>::max();
        for (ArcId a : p) {
          const Arc& arc = g.arcs()[a];
          if (arc.kind == ArcKind::Driving) {
            km += t.road_between(arc.tail.location, arc.head.location)->km;
            if (arc.head.location == 3) arrive = std::min(arrive, arc.head.time);
          }
        }
        if (origin.location == 3) arrive = 0;
        return std::pair{km, arrive};
      };
      std::pair best{std::numeric_limits<double>::infinity(), 0};
      for (const auto& p : paths) best = std::min(best, score(p));

      CAPTURE(e0);
      CAPTURE(e1);
      if (paths.empty()) {
        CHECK(kind_of([&] { baseline_schedule(g, t, fleet); }) == ErrorKind::Infeasible);
        continue;
      }
      FleetFlows flows;
      try {
        flows = baseline_schedule(g, t, fleet);
      } catch (const Error& e) {
        // Only acceptable when no path of shortest road distance fits.
        CHECK(e.kind() == ErrorKind::Infeasible);
        CHECK(best.first > 4.0);
        continue;
      }
      std::vector<ArcId> used;
      for (ArcId a = 0; a < g.arcs().size(); ++a) {
        if (flows.lambda[0][a] > 0) used.push_back(a);
      }
      const auto got = score(used);
      CHECK(got.first == doctest::Approx(best.first));
      CHECK(got.second == best.second);
      CHECK(flow_balance_violation(g, fleet, flows.lambda[0], flows.departures[0]) < 1e-12);
      CHECK(flexibility_violation(g, fleet, flows.departures[0]) < 1e-12);
    }
  }
}

TEST_CASE("baseline splits several origins and destinations and stays integral") {
  TransportGraph t({1, 2, 3}, {{1, 2, 1, 1.0}, {2, 3, 1, 1.0}});
  auto g = build_expanded_graph(t, {0, 4}, {8, 1.0}, 100.0);
  FleetSpec f;
  f.id = "mix";
  f.size = 30.0;
  f.criteria.injections[{1, 2, 0}] = 10.0;
  f.criteria.injections[{2, 1, 1}] = 20.0;
  f.criteria.withdrawals[{3, 2, 6}] = 25.0;
  f.criteria.withdrawals[{2, 3, 7}] = 5.0;
  auto flows = baseline_schedule(g, t, f);
  CHECK(flow_balance_violation(g, f, flows.lambda[0], flows.departures[0]) < 1e-12);
  CHECK(flexibility_violation(g, f, flows.departures[0]) < 1e-12);
  for (double v : flows.lambda[0]) {
    CHECK(v >= 0.0);
    CHECK(v == std::round(v));
  }
}

TEST_CASE("baseline reports infeasible horizons") {
  TransportGraph t({1, 2}, {{1, 2, 3, 1.0}});
  auto g = build_expanded_graph(t, {0, 4}, {4, 1.0}, 100.0);
  auto f = make_fleet({1, 0, 0}, {2, 0, 3}, 1.0);
  CHECK(kind_of([&] { baseline_schedule(g, t, f); }) == ErrorKind::Infeasible);
}

TEST_CASE("shortest path tie-breaks") {
  TransportGraph t({1, 2, 3, 4}, {{1, 2, 1, 1.0}, {2, 4, 1, 1.0}, {1, 3, 1, 1.0}, {3, 4, 1, 1.0}});
  CHECK(shortest_location_path(t, 1, 4) == std::vector<LocationId>{1, 2, 4});
  TransportGraph t2({1, 2, 3, 4}, {{1, 2, 2, 1.0}, {2, 4, 1, 1.0}, {1, 3, 1, 1.0}, {3, 4, 1, 1.0}});
  CHECK(shortest_location_path(t2, 1, 4) == std::vector<LocationId>{1, 3, 4});
  TransportGraph t3({1, 2}, {});
  CHECK(shortest_location_path(t3, 1, 2).empty());
}

TEST_CASE("sampler is reproducible") {
  TransportGraph t({1, 2, 3}, {{1, 2, 1, 1.0}, {2, 3, 1, 1.0}});
  auto g = build_expanded_graph(t, {0, 4}, {8, 1.0}, 100.0);
  FleetSamplerConfig cfg;
  cfg.seed = 42;
  cfg.fleets = 5;
  cfg.latest_start_step = 3;
  cfg.max_trip_steps = 4;
  cfg.min_start_level = 2;
  cfg.max_start_level = 4;
  cfg.max_end_level = 2;
  auto a = sample_fleets(g, cfg);
  auto b = sample_fleets(g, cfg);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].criteria.injections == b[i].criteria.injections);
    CHECK(a[i].criteria.withdrawals == b[i].criteria.withdrawals);
    validate_fleet(a[i]);
    CHECK(a[i].criteria.injections.begin()->first.location !=
          a[i].criteria.withdrawals.begin()->first.location);
  }
  cfg.seed = 43;
  auto c = sample_fleets(g, cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    differs |= a[i].criteria.injections != c[i].criteria.injections ||
               a[i].criteria.withdrawals != c[i].criteria.withdrawals;
  }
  CHECK(differs);
}
