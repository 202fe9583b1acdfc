#pragma once

// Joint fleet routing / charging and linearized AC optimal power flow over a
// multi-step horizon, assembled as one convex quadratic program.

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hdev/fleet.hpp"
#include "hdev/grid.hpp"
#include "hdev/powerflow.hpp"
#include "hdev/qp.hpp"
#include "hdev/transport.hpp"

namespace hdev {

enum class PenaltyKind { L2, L1, Linf };

std::string_view penalty_kind_name(PenaltyKind kind);
// Accepts "l1", "l2", "linf" in any case.
std::optional<PenaltyKind> parse_penalty_kind(std::string_view text);

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::L1;
  double weight = 0.0;
  std::size_t top_l = 0;      // Linf only; 0 means every bus
  std::vector<double> vref;   // empty: AVR setpoint at AVR buses, 1 pu elsewhere
};

std::vector<double> default_vref(const GridCase& grid);

// Buses with the largest |V0 - vref| at the operating point, ties to the lower
// position, returned in ascending position order. Throws Error(BadTopL).
std::vector<std::size_t> top_l_buses(std::span<const double> v0, std::span<const double> vref,
                                     std::size_t top_l);

// Phi for one time step given per-bus deviations V - vref. `top_set` is used
// by Linf only.
double penalty_value(PenaltyKind kind, std::span<const double> deviation,
                     std::span<const std::size_t> top_set);

// Charging demand at one station bus and step:
//   x = sum over fleets of sum_a delta_a lambda_a, a in charging_arcs_at(location, t)
struct CouplingRow {
  LocationId location = 0;
  std::size_t bus = 0;  // position in the grid
  int time = 0;
  std::vector<std::pair<ArcId, double>> terms;  // (arc, delta in MW)
};

// One row per (station, step), stations ascending. Discharging arcs are left
// out unless V2G is enabled. Throws Error(LocationNotABus).
std::vector<CouplingRow> coupling_rows(const GridCase& grid, const ExpandedGraph& g,
                                       bool enable_v2g);

struct StationLimit {
  double min_mw = 0.0;
  double max_mw = std::numeric_limits<double>::infinity();  // infinity: fleet-derived default
};

struct CoOptConfig {
  PenaltySpec penalty;
  double cost_weight = 1.0;
  bool enable_v2g = false;
  std::map<LocationId, StationLimit> station_limits;
};

inline constexpr std::size_t kNoVar = std::numeric_limits<std::size_t>::max();

struct StepVars {
  std::vector<std::size_t> v, theta, pg, qg;
  std::vector<std::size_t> x;    // per station
  std::vector<std::size_t> aux;  // L1: per bus
  std::size_t linf = kNoVar;     // Linf: epigraph scalar
};

struct VariableMap {
  std::vector<StepVars> steps;
  std::vector<std::vector<std::size_t>> lambda;  // [fleet][arc], kNoVar if absent
  std::vector<std::map<ExpandedNode, std::size_t>> psi;
};

// Row and column counts by family.
struct Census {
  std::size_t variables = 0;
  std::size_t fixed_variables = 0;  // slack angle and AVR voltages
  std::size_t flow_balance_rows = 0;   // 2 per bus and step
  std::size_t coupling_rows = 0;       // 1 per station and step
  std::size_t fleet_balance_rows = 0;  // 1 per fleet and node
  std::size_t flexibility_rows = 0;    // 1 per fleet and withdrawal target
  std::size_t thermal_rows = 0;        // 1 per limited line and step
  std::size_t penalty_rows = 0;        // L1: 2 per bus and step, Linf: 2 per top bus and step
  std::size_t equality_rows() const {
    return flow_balance_rows + coupling_rows + fleet_balance_rows + flexibility_rows;
  }
  std::size_t inequality_rows() const { return thermal_rows + penalty_rows; }
};

// Demand imposed on each station, MW, indexed [step][station].
using DemandProfile = std::vector<std::vector<double>>;

// Holds references to the grid, graph and fleets it was assembled from; they
// must outlive the problem.
struct CoOptProblem {
  QuadraticProgram qp;
  VariableMap vars;
  Census census;
  const GridCase* grid = nullptr;
  const ExpandedGraph* graph = nullptr;
  std::vector<FleetSpec> fleets;
  std::vector<OperatingPoint> ops;  // one per step, or one shared
  std::vector<CouplingRow> coupling;
  std::vector<LocationId> stations;
  std::vector<std::size_t> station_bus;
  std::vector<double> vref;
  std::vector<std::size_t> top_set;
  CoOptConfig config;
  int steps = 0;
  double dt_hours = 1.0;
};

// Builds the joint program. `ops` holds either one shared expansion point or
// one per step. With `fixed_demand` the station demands are pinned and no
// fleet variables are created (fleets must be empty). Throws
// Error(InconsistentHorizon), Error(LocationNotABus), Error(BadTopL) or
// Error(UnknownNode).
CoOptProblem assemble(const GridCase& grid, std::span<const OperatingPoint> ops,
                      const ExpandedGraph& g, std::span<const FleetSpec> fleets,
                      const CoOptConfig& config,
                      const std::optional<DemandProfile>& fixed_demand = std::nullopt);

struct StepResult {
  std::vector<double> v_linear, theta_linear;
  std::vector<double> v, theta;  // nonlinear re-solve
  std::vector<double> pg_mw, qg_mvar;
  std::vector<double> x_mw;               // per station
  std::vector<double> vehicles_charging;  // per station
};

struct ObjectiveBreakdown {
  double generation_cost = 0.0;
  double penalty = 0.0;            // Phi on the linear-model voltages
  double penalty_nonlinear = 0.0;  // Phi on the re-solved voltages
  double total = 0.0;              // cost_weight * cost + weight * Phi
  double solver_objective = 0.0;
};

struct ViolationSummary {
  std::size_t count = 0;  // bus-steps outside [0.95, 1.05] pu, re-solved voltages
  std::size_t count_linear = 0;
  std::size_t buses_with_violation = 0;
  double max_deviation = 0.0;  // max |V - vref|, re-solved
  double max_deviation_linear = 0.0;
  double sum_deviation_linear = 0.0;  // sum over bus-steps of |V - vref|
  double max_abs_deviation_linear_top = 0.0;
};

struct ScheduleChecks {
  double primal_residual = 0.0;
  double coupling_residual_mw = 0.0;
  double flow_balance_residual = 0.0;
  double flexibility_residual = 0.0;
  double min_flow = 0.0;
  double bound_violation = 0.0;
};

struct Schedule {
  int steps = 0;
  double dt_hours = 1.0;
  std::vector<BusId> bus_ids;
  std::vector<LocationId> stations;
  std::vector<StepResult> per_step;
  FleetFlows flows;
  ObjectiveBreakdown objective;
  ViolationSummary violations;
  ScheduleChecks checks;
  int iterations = 0;
};

inline constexpr double kVoltageLow = 0.95;
inline constexpr double kVoltageHigh = 1.05;
inline constexpr double kVoltageBandTol = 1e-6;

inline bool outside_band(double v) {
  return v < kVoltageLow - kVoltageBandTol || v > kVoltageHigh + kVoltageBandTol;
}

// Solves and interprets the program; all reported values are recomputed from
// the primal solution. Throws Error(Infeasible) naming the first infeasible
// constraint family, Error(SolverFailure) or NonConvergence from the re-solve.
Schedule solve_coopt(const CoOptProblem& problem, const QpOptions& options = {});

// Grid-only dispatch with the station demand fixed, solved one step at a time.
Schedule dispatch_fixed_demand(const GridCase& grid, std::span<const OperatingPoint> ops,
                               const ExpandedGraph& g, const DemandProfile& demand,
                               const CoOptConfig& config, const QpOptions& options = {});

}  // namespace hdev
