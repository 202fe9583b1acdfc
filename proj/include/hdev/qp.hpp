#pragma once

// Convex quadratic programming by a primal-dual interior-point method.
//
//   minimize    1/2 x'Hx + c'x + constant
//   subject to  A_eq x = b_eq
//               A_ineq x <= b_ineq
//               lower <= x <= upper
//
// Mehrotra predictor-corrector on the reduced KKT system
//   [H + G'WG + rho I   A' ] [dx]
//   [A                 -dI ] [dy]
// with static regularization and iterative refinement. The system is factored
// densely (LDL^T over the SIMD kernels) for small problems and with a sparse
// LDL^T otherwise.

#include <Eigen/SparseCore>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace hdev {

struct QuadraticProgram {
  std::size_t num_vars = 0;
  Eigen::SparseMatrix<double> h;  // symmetric, full storage
  std::vector<double> c;
  double constant = 0.0;
  Eigen::SparseMatrix<double> a_eq;
  std::vector<double> b_eq;
  Eigen::SparseMatrix<double> a_ineq;
  std::vector<double> b_ineq;
  std::vector<double> lower;
  std::vector<double> upper;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Incremental builder; rows and quadratic terms accumulate duplicates.
class QpBuilder {
 public:
  std::size_t add_variable(double lower = -kInf, double upper = kInf, double cost = 0.0);
  std::size_t num_vars() const { return lower_.size(); }
  void set_bounds(std::size_t j, double lower, double upper);
  void add_cost(std::size_t j, double c) { c_[j] += c; }
  // Adds v * x_i * x_j to the objective (both orders when i != j).
  void add_quadratic(std::size_t i, std::size_t j, double v);
  void add_constant(double v) { constant_ += v; }
  std::size_t add_equality(const std::vector<std::pair<std::size_t, double>>& terms, double rhs);
  std::size_t add_inequality(const std::vector<std::pair<std::size_t, double>>& terms, double rhs);
  std::size_t num_equalities() const { return b_eq_.size(); }
  std::size_t num_inequalities() const { return b_ineq_.size(); }

  QuadraticProgram build() const;

 private:
  std::vector<double> lower_, upper_, c_;
  double constant_ = 0.0;
  std::vector<Eigen::Triplet<double>> h_, a_eq_, a_ineq_;
  std::vector<double> b_eq_, b_ineq_;
};

enum class QpStatus { Optimal, Infeasible, Unbounded, IterLimit };
enum class KktBackend { Auto, Dense, Sparse };

std::string qp_status_name(QpStatus status);

struct QpOptions {
  double tol = 1e-8;      // relative to the data norms
  double abs_tol = 1e-9;  // extra iterations aim for this absolute residual
  int polish_iter = 10;
  int max_iter = 200;
  double regularization = 1e-9;
  KktBackend backend = KktBackend::Auto;
  std::size_t dense_threshold = 300;  // Auto uses dense when n + m_eq <= this
  bool equilibrate = true;
  double divergence_threshold = 1e8;
};

struct QpResiduals {
  double primal_eq = 0.0;
  double primal_ineq = 0.0;  // includes bound violations
  double dual = 0.0;         // stationarity
  double complementarity = 0.0;
  double relative_gap = 0.0;
};

struct SolveResult {
  QpStatus status = QpStatus::IterLimit;
  std::vector<double> x;
  std::vector<double> y_eq;     // multipliers of A_eq x = b_eq
  std::vector<double> z_ineq;   // >= 0, multipliers of A_ineq x <= b_ineq
  std::vector<double> z_lower;  // >= 0
  std::vector<double> z_upper;  // >= 0
  double objective = 0.0;
  QpResiduals residuals;
  int iterations = 0;
  bool used_dense = false;
};

// Stationarity: H x + c + A_eq' y + A_ineq' z - z_lower + z_upper = 0.
QpResiduals kkt_residuals(const QuadraticProgram& qp, const SolveResult& r);

// Throws Error(DimensionMismatch) for inconsistent input and
// Error(NumericalBreakdown) when the KKT system cannot be factored even with
// increased regularization.
SolveResult solve(const QuadraticProgram& qp, const QpOptions& opts = {});

// Writes H, c, A_eq, b_eq, A_ineq, b_ineq and bounds as a plain-text matrix
// dump (one "name rows cols" header per block followed by "i j v" triplets or
// one value per line for vectors).
std::string dump_text(const QuadraticProgram& qp);

}  // namespace hdev
