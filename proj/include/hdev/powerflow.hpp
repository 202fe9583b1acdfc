#pragma once

#include <span>
#include <vector>

#include "hdev/dense.hpp"
#include "hdev/error.hpp"
#include "hdev/grid.hpp"

namespace hdev {

struct Injections {
  std::vector<double> p;
  std::vector<double> q;
};

// Net injections implied by the polar power-flow sums:
//   P_i = V_i sum_j V_j (G_ij cos(th_i - th_j) + B_ij sin(th_i - th_j))
//   Q_i = V_i sum_j V_j (G_ij sin(th_i - th_j) - B_ij cos(th_i - th_j))
// Throws Error(DimensionMismatch).
Injections ac_injections(const GridCase& grid, std::span<const double> v,
                         std::span<const double> theta);

// dP/dV, dP/dtheta, dQ/dV, dQ/dtheta, bus by bus.
struct Jacobians {
  DenseMatrix p_v;
  DenseMatrix p_theta;
  DenseMatrix q_v;
  DenseMatrix q_theta;
};

Jacobians jacobians(const GridCase& grid, std::span<const double> v, std::span<const double> theta);

// Specified quantities for a Newton solve. Empty vectors take the case
// defaults: scheduled generation minus base demand, and the AVR setpoints.
struct PowerFlowSpec {
  std::vector<double> p_net;  // pu, ignored at the slack
  std::vector<double> q_net;  // pu, ignored at voltage-controlled buses
  std::vector<double> v_set;  // pu, used at voltage-controlled buses
  double tolerance = 1e-8;
  int max_iterations = 50;
};

struct PowerFlowSolution {
  std::vector<double> v;
  std::vector<double> theta;
  Injections injections;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;  // max |mismatch| per iterate
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& message, std::vector<double> history)
      : Error(ErrorKind::NonConvergence, message), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Newton-Raphson from a flat start (V = 1 except pinned buses, theta = 0).
// The slack and every AVR bus hold their voltage; the slack holds theta = 0.
// Throws NonConvergence or Error(SingularJacobian).
PowerFlowSolution solve_power_flow(const GridCase& grid, const PowerFlowSpec& spec = {});

struct OperatingPoint {
  std::vector<double> v0;
  std::vector<double> theta0;
  std::vector<double> p0;  // net injection, pu
  std::vector<double> q0;
  Jacobians jac;
  int iterations = 0;
  double residual = 0.0;
};

OperatingPoint solve_operating_point(const GridCase& grid, const PowerFlowSpec& spec = {});

// First-order model of the net injections about an operating point:
//   P = P0 + J_PV (V - V0) + J_Ptheta (theta - theta0), likewise for Q.
class LinearFlowModel {
 public:
  explicit LinearFlowModel(const OperatingPoint& op) : op_(&op) {}
  Injections evaluate(std::span<const double> v, std::span<const double> theta) const;
  const OperatingPoint& point() const { return *op_; }

 private:
  const OperatingPoint* op_;
};

LinearFlowModel linear_flow_balance(const OperatingPoint& op);

// Tangent of |y|^2 (Vi^2 + Vj^2 - 2 Vi Vj cos(thi - thj)) <= Imax^2:
//   value + dvi dVi + dvj dVj + dthi dthi + dthj dthj <= limit_sq
// where d* multiply deviations from the operating point.
struct ThermalRow {
  std::size_t line = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  double value = 0.0;
  double d_vi = 0.0;
  double d_vj = 0.0;
  double d_thi = 0.0;
  double d_thj = 0.0;
  double limit_sq = 0.0;
  bool active = true;  // false for unlimited lines
};

double thermal_lhs(const Line& line, double vi, double vj, double thi, double thj);

// Throws Error(UnknownLine).
ThermalRow linear_thermal_limit(const GridCase& grid, const OperatingPoint& op, std::size_t line);

struct BranchFlow {
  double p_ij = 0.0, p_ji = 0.0;
  double q_ij = 0.0, q_ji = 0.0;
  double p_loss = 0.0, q_loss = 0.0;
  double thermal_lhs = 0.0;
  double thermal_limit_sq = 0.0;
};

struct BranchFlowReport {
  std::vector<BranchFlow> lines;
};

// Pi-model branch flows in pu; losses are P_ij + P_ji by construction.
BranchFlowReport branch_report(const GridCase& grid, std::span<const double> v,
                               std::span<const double> theta);

}  // namespace hdev
