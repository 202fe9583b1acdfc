#include "hdev/powerflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <cmath>
#include <limits>
#include <string>

#include "hdev/kernels.hpp"

namespace hdev {
namespace {

void require_size(const GridCase& grid, std::span<const double> v, std::span<const double> theta) {
  if (v.size() != grid.bus_count() || theta.size() != grid.bus_count()) {
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(grid.bus_count()) + " bus values");
  }
}

bool pinned_voltage(const GridCase& grid, std::size_t i) {
  return i == grid.slack() || grid.bus(i).avr;
}

}  // namespace

Injections ac_injections(const GridCase& grid, std::span<const double> v,
                         std::span<const double> theta) {
  require_size(grid, v, theta);
  const std::size_t n = grid.bus_count();
  std::vector<double> e(n), f(n), gi(n), bi(n), ge(n), be(n);
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = v[i] * std::cos(theta[i]);
    f[i] = v[i] * std::sin(theta[i]);
  }
  const auto& g = grid.g_matrix();
  const auto& b = grid.b_matrix();
  kernels::gemv(g.data(), n, n, e, ge);
  kernels::gemv(g.data(), n, n, f, gi);
  kernels::gemv(b.data(), n, n, e, be);
  kernels::gemv(b.data(), n, n, f, bi);
  Injections out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double i_re = ge[i] - bi[i];
    const double i_im = be[i] + gi[i];
    out.p[i] = e[i] * i_re + f[i] * i_im;
    out.q[i] = f[i] * i_re - e[i] * i_im;
  }
  return out;
}

Jacobians jacobians(const GridCase& grid, std::span<const double> v, std::span<const double> theta) {
  require_size(grid, v, theta);
  const std::size_t n = grid.bus_count();
  const auto& g = grid.g_matrix();
  const auto& b = grid.b_matrix();
  const Injections s = ac_injections(grid, v, theta);
  Jacobians jac{DenseMatrix(n, n), DenseMatrix(n, n), DenseMatrix(n, n), DenseMatrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (g(i, j) == 0.0 && b(i, j) == 0.0) continue;
      const double d = theta[i] - theta[j];
      const double c = std::cos(d), sn = std::sin(d);
      const double re = g(i, j) * c + b(i, j) * sn;  // G cos + B sin
      const double im = g(i, j) * sn - b(i, j) * c;  // G sin - B cos
      jac.p_theta(i, j) = v[i] * v[j] * im;
      jac.p_v(i, j) = v[i] * re;
      jac.q_theta(i, j) = -v[i] * v[j] * re;
      jac.q_v(i, j) = v[i] * im;
    }
    const double vi = v[i];
    jac.p_theta(i, i) = -s.q[i] - b(i, i) * vi * vi;
    jac.p_v(i, i) = s.p[i] / vi + g(i, i) * vi;
    jac.q_theta(i, i) = s.p[i] - g(i, i) * vi * vi;
    jac.q_v(i, i) = s.q[i] / vi - b(i, i) * vi;
  }
  return jac;
}

PowerFlowSolution solve_power_flow(const GridCase& grid, const PowerFlowSpec& spec) {
  const std::size_t n = grid.bus_count();
  std::vector<double> p_net = spec.p_net;
  std::vector<double> q_net = spec.q_net;
  std::vector<double> v_set = spec.v_set;
  if (p_net.empty()) {
    p_net = grid.pg_scheduled();
    const auto pd = grid.pd();
    for (std::size_t i = 0; i < n; ++i) p_net[i] -= pd[i];
  }
  if (q_net.empty()) {
    q_net = grid.qd();
    for (double& q : q_net) q = -q;
  }
  if (v_set.empty()) {
    for (std::size_t i = 0; i < n; ++i) v_set.push_back(grid.bus(i).vref);
  }
  if (p_net.size() != n || q_net.size() != n || v_set.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "power-flow specification has wrong length");
  }

  std::vector<std::size_t> angle_buses, voltage_buses;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != grid.slack()) angle_buses.push_back(i);
    if (!pinned_voltage(grid, i)) voltage_buses.push_back(i);
  }

  PowerFlowSolution sol;
  sol.v.assign(n, 1.0);
  sol.theta.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (pinned_voltage(grid, i)) sol.v[i] = v_set[i];
  }

  const std::size_t na = angle_buses.size();
  const std::size_t nv = voltage_buses.size();
  const std::size_t dim = na + nv;
  Eigen::VectorXd mismatch(dim);
  auto evaluate = [&]() {
    sol.injections = ac_injections(grid, sol.v, sol.theta);
    for (std::size_t k = 0; k < na; ++k) {
      mismatch[static_cast<Eigen::Index>(k)] = sol.injections.p[angle_buses[k]] - p_net[angle_buses[k]];
    }
    for (std::size_t k = 0; k < nv; ++k) {
      mismatch[static_cast<Eigen::Index>(na + k)] =
          sol.injections.q[voltage_buses[k]] - q_net[voltage_buses[k]];
    }
    return dim == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
  };

  sol.residual = evaluate();
  sol.history.push_back(sol.residual);
  while (sol.residual >= spec.tolerance) {
    if (sol.iterations >= spec.max_iterations || !std::isfinite(sol.residual)) {
      throw NonConvergence("Newton iteration stopped after " + std::to_string(sol.iterations) +
                               " iterations with mismatch " + std::to_string(sol.residual),
                           sol.history);
    }
    const Jacobians jac = jacobians(grid, sol.v, sol.theta);
    Eigen::MatrixXd j(dim, dim);
    for (std::size_t r = 0; r < na; ++r) {
      for (std::size_t c = 0; c < na; ++c) j(r, c) = jac.p_theta(angle_buses[r], angle_buses[c]);
      for (std::size_t c = 0; c < nv; ++c) j(r, na + c) = jac.p_v(angle_buses[r], voltage_buses[c]);
    }
    for (std::size_t r = 0; r < nv; ++r) {
      for (std::size_t c = 0; c < na; ++c) j(na + r, c) = jac.q_theta(voltage_buses[r], angle_buses[c]);
      for (std::size_t c = 0; c < nv; ++c) j(na + r, na + c) = jac.q_v(voltage_buses[r], voltage_buses[c]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
    if (!lu.isInvertible()) {
      throw Error(ErrorKind::SingularJacobian, "power-flow Jacobian is singular");
    }
    const Eigen::VectorXd step = lu.solve(-mismatch);
    for (std::size_t k = 0; k < na; ++k) sol.theta[angle_buses[k]] += step[static_cast<Eigen::Index>(k)];
    for (std::size_t k = 0; k < nv; ++k) sol.v[voltage_buses[k]] += step[static_cast<Eigen::Index>(na + k)];
    ++sol.iterations;
    sol.residual = evaluate();
    sol.history.push_back(sol.residual);
  }
  return sol;
}

OperatingPoint solve_operating_point(const GridCase& grid, const PowerFlowSpec& spec) {
  PowerFlowSolution sol = solve_power_flow(grid, spec);
  OperatingPoint op;
  op.jac = jacobians(grid, sol.v, sol.theta);
  op.v0 = std::move(sol.v);
  op.theta0 = std::move(sol.theta);
  op.p0 = std::move(sol.injections.p);
  op.q0 = std::move(sol.injections.q);
  op.iterations = sol.iterations;
  op.residual = sol.residual;
  return op;
}

Injections LinearFlowModel::evaluate(std::span<const double> v, std::span<const double> theta) const {
  const std::size_t n = op_->v0.size();
  if (v.size() != n || theta.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "linear model evaluated with wrong length");
  }
  std::vector<double> dv(n), dth(n);
  for (std::size_t i = 0; i < n; ++i) {
    dv[i] = v[i] - op_->v0[i];
    dth[i] = theta[i] - op_->theta0[i];
  }
  Injections out{op_->p0, op_->q0};
  for (std::size_t i = 0; i < n; ++i) {
    out.p[i] += kernels::dot(op_->jac.p_v.row(i), dv) + kernels::dot(op_->jac.p_theta.row(i), dth);
    out.q[i] += kernels::dot(op_->jac.q_v.row(i), dv) + kernels::dot(op_->jac.q_theta.row(i), dth);
  }
  return out;
}

LinearFlowModel linear_flow_balance(const OperatingPoint& op) { return LinearFlowModel(op); }

double thermal_lhs(const Line& line, double vi, double vj, double thi, double thj) {
  return line.y_abs * line.y_abs * (vi * vi + vj * vj - 2.0 * vi * vj * std::cos(thi - thj));
}

ThermalRow linear_thermal_limit(const GridCase& grid, const OperatingPoint& op, std::size_t line) {
  if (line >= grid.lines().size()) {
    throw Error(ErrorKind::UnknownLine, "line " + std::to_string(line));
  }
  const Line& l = grid.lines()[line];
  const double vi = op.v0[l.from], vj = op.v0[l.to];
  const double d = op.theta0[l.from] - op.theta0[l.to];
  const double y2 = l.y_abs * l.y_abs;
  ThermalRow row;
  row.line = line;
  row.from = l.from;
  row.to = l.to;
  row.value = thermal_lhs(l, vi, vj, op.theta0[l.from], op.theta0[l.to]);
  row.d_vi = y2 * (2.0 * vi - 2.0 * vj * std::cos(d));
  row.d_vj = y2 * (2.0 * vj - 2.0 * vi * std::cos(d));
  row.d_thi = y2 * 2.0 * vi * vj * std::sin(d);
  row.d_thj = -row.d_thi;
  row.active = std::isfinite(l.i_max);
  row.limit_sq = row.active ? l.i_max * l.i_max : std::numeric_limits<double>::infinity();
  return row;
}

BranchFlowReport branch_report(const GridCase& grid, std::span<const double> v,
                               std::span<const double> theta) {
  require_size(grid, v, theta);
  BranchFlowReport report;
  for (const Line& l : grid.lines()) {
    const std::complex<double> y(l.g, l.b);
    const std::complex<double> half_charging(0.0, l.b_charging / 2.0);
    const std::complex<double> vi = std::polar(v[l.from], theta[l.from]);
    const std::complex<double> vj = std::polar(v[l.to], theta[l.to]);
    const std::complex<double> i_ij = (y + half_charging) / (l.tap * l.tap) * vi - y / l.tap * vj;
    const std::complex<double> i_ji = (y + half_charging) * vj - y / l.tap * vi;
    const std::complex<double> s_ij = vi * std::conj(i_ij);
    const std::complex<double> s_ji = vj * std::conj(i_ji);
    BranchFlow bf;
    bf.p_ij = s_ij.real();
    bf.q_ij = s_ij.imag();
    bf.p_ji = s_ji.real();
    bf.q_ji = s_ji.imag();
    bf.p_loss = bf.p_ij + bf.p_ji;
    bf.q_loss = bf.q_ij + bf.q_ji;
    bf.thermal_lhs = thermal_lhs(l, v[l.from], v[l.to], theta[l.from], theta[l.to]);
    bf.thermal_limit_sq = std::isfinite(l.i_max) ? l.i_max * l.i_max
                                                 : std::numeric_limits<double>::infinity();
    report.lines.push_back(bf);
  }
  return report;
}

}  // namespace hdev
