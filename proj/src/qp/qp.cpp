#include "hdev/qp.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "hdev/dense.hpp"
#include "hdev/error.hpp"

namespace hdev {

std::size_t QpBuilder::add_variable(double lower, double upper, double cost) {
  lower_.push_back(lower);
  upper_.push_back(upper);
  c_.push_back(cost);
  return lower_.size() - 1;
}

void QpBuilder::set_bounds(std::size_t j, double lower, double upper) {
  lower_[j] = lower;
  upper_[j] = upper;
}

void QpBuilder::add_quadratic(std::size_t i, std::size_t j, double v) {
  const auto ii = static_cast<int>(i), jj = static_cast<int>(j);
  if (i == j) {
    h_.emplace_back(ii, ii, 2.0 * v);
  } else {
    h_.emplace_back(ii, jj, v);
    h_.emplace_back(jj, ii, v);
  }
}

std::size_t QpBuilder::add_equality(const std::vector<std::pair<std::size_t, double>>& terms,
                                    double rhs) {
  const auto row = static_cast<int>(b_eq_.size());
  for (const auto& [j, v] : terms) a_eq_.emplace_back(row, static_cast<int>(j), v);
  b_eq_.push_back(rhs);
  return b_eq_.size() - 1;
}

std::size_t QpBuilder::add_inequality(const std::vector<std::pair<std::size_t, double>>& terms,
                                      double rhs) {
  const auto row = static_cast<int>(b_ineq_.size());
  for (const auto& [j, v] : terms) a_ineq_.emplace_back(row, static_cast<int>(j), v);
  b_ineq_.push_back(rhs);
  return b_ineq_.size() - 1;
}

QuadraticProgram QpBuilder::build() const {
  QuadraticProgram qp;
  const auto n = static_cast<Eigen::Index>(lower_.size());
  qp.num_vars = lower_.size();
  qp.h.resize(n, n);
  qp.h.setFromTriplets(h_.begin(), h_.end());
  qp.c = c_;
  qp.constant = constant_;
  qp.a_eq.resize(static_cast<Eigen::Index>(b_eq_.size()), n);
  qp.a_eq.setFromTriplets(a_eq_.begin(), a_eq_.end());
  qp.b_eq = b_eq_;
  qp.a_ineq.resize(static_cast<Eigen::Index>(b_ineq_.size()), n);
  qp.a_ineq.setFromTriplets(a_ineq_.begin(), a_ineq_.end());
  qp.b_ineq = b_ineq_;
  qp.lower = lower_;
  qp.upper = upper_;
  return qp;
}

std::string qp_status_name(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::Unbounded: return "Unbounded";
    case QpStatus::IterLimit: return "IterLimit";
  }
  return "Unknown";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double max_abs(const SpMat& m) {
  double out = 0.0;
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SpMat::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
  }
  return out;
}

// Problem in internal form: A x = b, G x <= h, with bounds folded into G and
// fixed variables into A.
struct Internal {
  SpMat H, A, G;
  Vec c, b, h;
  std::size_t m_eq_user = 0;
  std::size_t m_in_user = 0;
  std::vector<std::size_t> fixed_vars;                 // extra A rows
  std::vector<std::pair<std::size_t, bool>> bound_rows;  // extra G rows (var, is_upper)
};

Internal to_internal(const QuadraticProgram& qp) {
  const std::size_t n = qp.num_vars;
  Internal in;
  in.m_eq_user = qp.b_eq.size();
  in.m_in_user = qp.b_ineq.size();
  Triplets a, g;
  std::vector<double> b(qp.b_eq), h(qp.b_ineq);
  for (int k = 0; k < qp.a_eq.outerSize(); ++k) {
    for (SpMat::InnerIterator it(qp.a_eq, k); it; ++it) a.emplace_back(it.row(), it.col(), it.value());
  }
  for (int k = 0; k < qp.a_ineq.outerSize(); ++k) {
    for (SpMat::InnerIterator it(qp.a_ineq, k); it; ++it) g.emplace_back(it.row(), it.col(), it.value());
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = qp.lower[j], up = qp.upper[j];
    const int col = static_cast<int>(j);
    if (lo == up) {
      a.emplace_back(static_cast<int>(b.size()), col, 1.0);
      b.push_back(lo);
      in.fixed_vars.push_back(j);
      continue;
    }
    if (std::isfinite(lo)) {
      g.emplace_back(static_cast<int>(h.size()), col, -1.0);
      h.push_back(-lo);
      in.bound_rows.emplace_back(j, false);
    }
    if (std::isfinite(up)) {
      g.emplace_back(static_cast<int>(h.size()), col, 1.0);
      h.push_back(up);
      in.bound_rows.emplace_back(j, true);
    }
  }
  const auto nn = static_cast<Eigen::Index>(n);
  in.H = qp.h;
  in.A.resize(static_cast<Eigen::Index>(b.size()), nn);
  in.A.setFromTriplets(a.begin(), a.end());
  in.G.resize(static_cast<Eigen::Index>(h.size()), nn);
  in.G.setFromTriplets(g.begin(), g.end());
  in.c = to_vec(qp.c);
  in.b = to_vec(b);
  in.h = to_vec(h);
  return in;
}

struct Scaling {
  Vec d, e, f;  // columns, equality rows, inequality rows
  double k = 1.0;
};

void scale_rows_cols(SpMat& m, const Vec& rows, const Vec& cols) {
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SpMat::InnerIterator it(m, k); it; ++it) it.valueRef() *= rows[it.row()] * cols[it.col()];
  }
}

// Ruiz equilibration followed by objective scaling, applied in place.
Scaling equilibrate(Internal& p, bool enabled) {
  const auto n = p.H.cols();
  Scaling s{Vec::Ones(n), Vec::Ones(p.A.rows()), Vec::Ones(p.G.rows()), 1.0};
  if (!enabled) return s;
  auto clamp_norm = [](double v) { return v < 1e-4 ? 1.0 : std::min(v, 1e4); };
  for (int pass = 0; pass < 15; ++pass) {
    Vec col = Vec::Zero(n), row_a = Vec::Zero(p.A.rows()), row_g = Vec::Zero(p.G.rows());
    for (const SpMat* m : {&p.H, &p.A, &p.G}) {
      for (int k = 0; k < m->outerSize(); ++k) {
        for (SpMat::InnerIterator it(*m, k); it; ++it) {
          col[it.col()] = std::max(col[it.col()], std::abs(it.value()));
        }
      }
    }
    for (int k = 0; k < p.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(p.A, k); it; ++it) {
        row_a[it.row()] = std::max(row_a[it.row()], std::abs(it.value()));
      }
    }
    for (int k = 0; k < p.G.outerSize(); ++k) {
      for (SpMat::InnerIterator it(p.G, k); it; ++it) {
        row_g[it.row()] = std::max(row_g[it.row()], std::abs(it.value()));
      }
    }
    Vec dc(n), da(p.A.rows()), dg(p.G.rows());
    for (Eigen::Index j = 0; j < n; ++j) dc[j] = 1.0 / std::sqrt(clamp_norm(col[j]));
    for (Eigen::Index i = 0; i < da.size(); ++i) da[i] = 1.0 / std::sqrt(clamp_norm(row_a[i]));
    for (Eigen::Index i = 0; i < dg.size(); ++i) dg[i] = 1.0 / std::sqrt(clamp_norm(row_g[i]));
    scale_rows_cols(p.H, dc, dc);
    scale_rows_cols(p.A, da, dc);
    scale_rows_cols(p.G, dg, dc);
    p.c = p.c.cwiseProduct(dc);
    p.b = p.b.cwiseProduct(da);
    p.h = p.h.cwiseProduct(dg);
    s.d = s.d.cwiseProduct(dc);
    s.e = s.e.cwiseProduct(da);
    s.f = s.f.cwiseProduct(dg);
  }
  const double m = std::max(inf_norm(p.c), max_abs(p.H));
  s.k = m > 0.0 ? std::clamp(1.0 / m, 1e-4, 1e4) : 1.0;
  p.H *= s.k;
  p.c *= s.k;
  return s;
}

// Factorization of the regularized reduced KKT matrix.
class KktSolver {
 public:
  KktSolver(const Internal& p, const QpOptions& opts) : p_(p), opts_(opts) {
    const auto n = static_cast<std::size_t>(p.H.cols());
    const auto m = static_cast<std::size_t>(p.A.rows());
    dense_ = opts.backend == KktBackend::Dense ||
             (opts.backend == KktBackend::Auto && n + m <= opts.dense_threshold);
  }

  bool dense() const { return dense_; }

  // Factors with scaling weights w = z / s. Throws NumericalBreakdown.
  void factor(const Vec& w) {
    const Eigen::Index n = p_.H.cols();
    const Eigen::Index m = p_.A.rows();
    SpMat q = p_.H;
    if (p_.G.rows() > 0) {
      SpMat gw = w.asDiagonal() * p_.G;
      q += SpMat(p_.G.transpose() * gw);
    }
    q_ = q;
    for (double reg = opts_.regularization; reg <= 1e-3; reg *= 100.0) {
      reg_ = reg;
      Triplets t;
      t.reserve(static_cast<std::size_t>(q.nonZeros() + 2 * p_.A.nonZeros() + n + m));
      for (int k = 0; k < q.outerSize(); ++k) {
        for (SpMat::InnerIterator it(q, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
      }
      for (int k = 0; k < p_.A.outerSize(); ++k) {
        for (SpMat::InnerIterator it(p_.A, k); it; ++it) {
          t.emplace_back(n + it.row(), it.col(), it.value());
          t.emplace_back(it.col(), n + it.row(), it.value());
        }
      }
      for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(i, i, reg);
      for (Eigen::Index i = 0; i < m; ++i) t.emplace_back(n + i, n + i, -reg);
      SpMat k(n + m, n + m);
      k.setFromTriplets(t.begin(), t.end());
      if (try_factor(k)) return;
    }
    throw Error(ErrorKind::NumericalBreakdown, "KKT factorization failed with regularization");
  }

  // Solves the unregularized system with iterative refinement.
  void solve(const Vec& r1, const Vec& r2, Vec& dx, Vec& dy) const {
    const Eigen::Index n = p_.H.cols();
    const Eigen::Index m = p_.A.rows();
    Vec rhs(n + m);
    rhs << r1, r2;
    Vec sol = raw_solve(rhs);
    double last = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 4; ++it) {
      Vec res = rhs - apply(sol);
      const double nr = inf_norm(res);
      if (!(nr < last) || nr <= 1e-14 * (1.0 + inf_norm(rhs))) break;
      last = nr;
      sol += raw_solve(res);
    }
    dx = sol.head(n);
    dy = sol.tail(m);
  }

 private:
  bool try_factor(const SpMat& k) {
    if (dense_) {
      DenseMatrix dm(static_cast<std::size_t>(k.rows()), static_cast<std::size_t>(k.cols()));
      for (int c = 0; c < k.outerSize(); ++c) {
        for (SpMat::InnerIterator it(k, c); it; ++it) {
          dm(static_cast<std::size_t>(it.row()), static_cast<std::size_t>(it.col())) += it.value();
        }
      }
      return dense_ldlt_.factor(dm, 1e-300);
    }
    sparse_ldlt_.compute(k);
    if (sparse_ldlt_.info() != Eigen::Success) return false;
    const Vec d = sparse_ldlt_.vectorD();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!std::isfinite(d[i]) || d[i] == 0.0) return false;
    }
    return true;
  }

  Vec raw_solve(const Vec& rhs) const {
    if (dense_) {
      std::vector<double> v = to_std(rhs);
      dense_ldlt_.solve(v);
      return to_vec(v);
    }
    return sparse_ldlt_.solve(rhs);
  }

  Vec apply(const Vec& sol) const {
    const Eigen::Index n = p_.H.cols();
    const Eigen::Index m = p_.A.rows();
    Vec out(n + m);
    out.head(n) = q_ * sol.head(n) + p_.A.transpose() * sol.tail(m);
    out.tail(m) = p_.A * sol.head(n);
    return out;
  }

  const Internal& p_;
  const QpOptions& opts_;
  bool dense_ = false;
  double reg_ = 0.0;
  SpMat q_;
  DenseLdlt dense_ldlt_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> sparse_ldlt_;
};

double max_step(const Vec& v, const Vec& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

}  // namespace

QpResiduals kkt_residuals(const QuadraticProgram& qp, const SolveResult& r) {
  QpResiduals res;
  const Vec x = to_vec(r.x);
  const Vec c = to_vec(qp.c);
  Vec stat = qp.h * x + c;
  if (!r.y_eq.empty()) stat += qp.a_eq.transpose() * to_vec(r.y_eq);
  if (!r.z_ineq.empty()) stat += qp.a_ineq.transpose() * to_vec(r.z_ineq);
  stat -= to_vec(r.z_lower);
  stat += to_vec(r.z_upper);
  res.dual = inf_norm(stat);
  if (qp.a_eq.rows() > 0) res.primal_eq = inf_norm(qp.a_eq * x - to_vec(qp.b_eq));
  double comp = 0.0;
  if (qp.a_ineq.rows() > 0) {
    const Vec slack = to_vec(qp.b_ineq) - qp.a_ineq * x;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
      res.primal_ineq = std::max(res.primal_ineq, -slack[i]);
      comp += r.z_ineq[static_cast<std::size_t>(i)] * slack[i];
    }
  }
  for (std::size_t j = 0; j < qp.num_vars; ++j) {
    if (std::isfinite(qp.lower[j])) {
      res.primal_ineq = std::max(res.primal_ineq, qp.lower[j] - r.x[j]);
      if (qp.lower[j] != qp.upper[j]) comp += r.z_lower[j] * (r.x[j] - qp.lower[j]);
    }
    if (std::isfinite(qp.upper[j])) {
      res.primal_ineq = std::max(res.primal_ineq, r.x[j] - qp.upper[j]);
      if (qp.lower[j] != qp.upper[j]) comp += r.z_upper[j] * (qp.upper[j] - r.x[j]);
    }
  }
  res.complementarity = std::abs(comp);
  const double obj_no_const = r.objective - qp.constant;
  res.relative_gap = res.complementarity / std::max(1.0, std::abs(obj_no_const));
  return res;
}

SolveResult solve(const QuadraticProgram& qp, const QpOptions& opts) {
  const std::size_t n = qp.num_vars;
  const auto nn = static_cast<Eigen::Index>(n);
  if (qp.h.rows() != nn || qp.h.cols() != nn || qp.c.size() != n || qp.lower.size() != n ||
      qp.upper.size() != n || qp.a_eq.cols() != nn || qp.a_ineq.cols() != nn ||
      static_cast<std::size_t>(qp.a_eq.rows()) != qp.b_eq.size() ||
      static_cast<std::size_t>(qp.a_ineq.rows()) != qp.b_ineq.size()) {
    throw Error(ErrorKind::DimensionMismatch, "quadratic program dimensions are inconsistent");
  }

  SolveResult result;
  result.x.assign(n, 0.0);
  result.y_eq.assign(qp.b_eq.size(), 0.0);
  result.z_ineq.assign(qp.b_ineq.size(), 0.0);
  result.z_lower.assign(n, 0.0);
  result.z_upper.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (qp.lower[j] > qp.upper[j]) {
      result.status = QpStatus::Infeasible;
      return result;
    }
  }

  Internal p = to_internal(qp);
  const Internal original = p;
  const Scaling sc = equilibrate(p, opts.equilibrate);
  const Eigen::Index m_eq = p.A.rows();
  const Eigen::Index m_in = p.G.rows();

  KktSolver kkt(p, opts);
  result.used_dense = kkt.dense();

  const double b_norm = std::max(inf_norm(original.b), inf_norm(original.h));
  const double c_norm = inf_norm(original.c);

  // Initial point: least-squares primal and dual estimates with W = I,
  // shifted into the positive orthant.
  Vec x(nn), y(m_eq), z(m_in), s(m_in);
  {
    kkt.factor(Vec::Ones(m_in));
    Vec dy;
    kkt.solve(p.G.transpose() * p.h, p.b, x, dy);
    s = p.h - p.G * x;
    Vec x_dual;
    kkt.solve(-p.c, Vec::Zero(m_eq), x_dual, y);
    z = p.G * x_dual;
    if (m_in > 0) {
      const double ap = -s.minCoeff();
      if (ap >= -1e-8) s.array() += 1.0 + ap;
      const double ad = -z.minCoeff();
      if (ad >= -1e-8) z.array() += 1.0 + ad;
    }
  }

  auto unscale = [&](const Vec& xs, const Vec& ys, const Vec& zs) {
    result.x = to_std(sc.d.cwiseProduct(xs));
    const Vec yo = sc.e.cwiseProduct(ys) / sc.k;
    const Vec zo = sc.f.cwiseProduct(zs) / sc.k;
    std::fill(result.z_lower.begin(), result.z_lower.end(), 0.0);
    std::fill(result.z_upper.begin(), result.z_upper.end(), 0.0);
    for (std::size_t i = 0; i < original.m_eq_user; ++i) result.y_eq[i] = yo[static_cast<Eigen::Index>(i)];
    for (std::size_t k = 0; k < original.fixed_vars.size(); ++k) {
      const double v = yo[static_cast<Eigen::Index>(original.m_eq_user + k)];
      const std::size_t j = original.fixed_vars[k];
      result.z_upper[j] = std::max(v, 0.0);
      result.z_lower[j] = std::max(-v, 0.0);
    }
    for (std::size_t i = 0; i < original.m_in_user; ++i) result.z_ineq[i] = zo[static_cast<Eigen::Index>(i)];
    for (std::size_t k = 0; k < original.bound_rows.size(); ++k) {
      const auto [j, upper] = original.bound_rows[k];
      (upper ? result.z_upper[j] : result.z_lower[j]) = zo[static_cast<Eigen::Index>(original.m_in_user + k)];
    }
    const Vec xo = to_vec(result.x);
    result.objective = 0.5 * xo.dot(qp.h * xo) + to_vec(qp.c).dot(xo) + qp.constant;
  };

  auto finish = [&](QpStatus status) {
    unscale(x, y, z);
    result.status = status;
    result.residuals = kkt_residuals(qp, result);
    return result;
  };

  auto infeasibility_certificate = [&](double min_norm, double ratio) {
    const double nrm = std::max(inf_norm(y), inf_norm(z));
    if (!(nrm > min_norm) || nrm == 0.0) return false;
    const double beta = -(p.b.dot(y) + p.h.dot(z));
    if (!(beta > 0.0)) return false;
    const Vec at = p.A.transpose() * y + p.G.transpose() * z;
    return inf_norm(at) <= ratio * beta;
  };
  // Used once the iteration cannot continue: primal residual stalled while
  // the normalized dual direction separates.
  auto stalled_infeasible = [&](double pres, double b_tol) {
    if (infeasibility_certificate(0.0, 1e-4)) return true;
    const double nrm = std::max(inf_norm(y), inf_norm(z));
    if (!(pres > b_tol) || !(nrm > 1e6)) return false;
    const double beta = -(p.b.dot(y) + p.h.dot(z));
    return beta > 0.0 && inf_norm(p.A.transpose() * y + p.G.transpose() * z) <= 1e-5 * nrm;
  };
  auto unbounded_direction = [&](double min_norm) {
    const double nrm = inf_norm(x);
    if (!(nrm > min_norm) || nrm == 0.0) return false;
    const Vec d = x / nrm;
    if (!(p.c.dot(d) < -1e-9)) return false;
    if (inf_norm(p.H * d) > 1e-6) return false;
    if (m_eq > 0 && inf_norm(p.A * d) > 1e-6) return false;
    if (m_in > 0 && (p.G * d).maxCoeff() > 1e-6) return false;
    return true;
  };

  int polish = 0;
  double last_worst = std::numeric_limits<double>::infinity();
  double best_worst = std::numeric_limits<double>::infinity();
  struct Iterate {
    Vec x, y, z, s;
  } best;
  auto finish_best = [&] {
    x = best.x;
    y = best.y;
    z = best.z;
    s = best.s;
    return finish(QpStatus::Optimal);
  };
  for (int iter = 0;; ++iter) {
    result.iterations = iter;
    const Vec hx = p.H * x;
    const Vec rd = hx + p.c + p.A.transpose() * y + p.G.transpose() * z;
    const Vec rp = p.A * x - p.b;
    const Vec ri = p.G * x + s - p.h;
    const double mu = m_in > 0 ? s.dot(z) / static_cast<double>(m_in) : 0.0;

    // Convergence measured in the original units.
    const double pres_eq = m_eq > 0 ? inf_norm(rp.cwiseQuotient(sc.e)) : 0.0;
    const double pres_in = m_in > 0 ? inf_norm(ri.cwiseQuotient(sc.f)) : 0.0;
    const double dres = inf_norm(rd.cwiseQuotient(sc.d)) / sc.k;
    const double gap = m_in > 0 ? s.dot(z) / sc.k : 0.0;
    const double pobj = (0.5 * x.dot(hx) + p.c.dot(x)) / sc.k;
    const double b_tol = opts.tol * (1.0 + b_norm);
    if (std::max(pres_eq, pres_in) <= b_tol && dres <= opts.tol * (1.0 + c_norm) &&
        gap <= opts.tol * std::max(1.0, std::abs(pobj))) {
      // Keep stepping while the absolute residuals still improve; the best
      // converged iterate is returned.
      const double worst = std::max({pres_eq, pres_in, dres});
      if (worst < best_worst) {
        best_worst = worst;
        best = {x, y, z, s};
      }
      if (worst <= opts.abs_tol || polish >= opts.polish_iter || !(worst < 0.9 * last_worst)) {
        return finish_best();
      }
      ++polish;
      last_worst = worst;
    } else if (polish > 0) {
      return finish_best();
    }
    if (infeasibility_certificate(opts.divergence_threshold, 1e-6)) return finish(QpStatus::Infeasible);
    if (unbounded_direction(opts.divergence_threshold)) return finish(QpStatus::Unbounded);
    if (iter >= opts.max_iter || !std::isfinite(mu) || !std::isfinite(pobj)) {
      if (stalled_infeasible(std::max(pres_eq, pres_in), b_tol)) return finish(QpStatus::Infeasible);
      if (unbounded_direction(1e4)) return finish(QpStatus::Unbounded);
      return finish(QpStatus::IterLimit);
    }

    const Vec w = z.cwiseQuotient(s);
    try {
      kkt.factor(w);
    } catch (const Error&) {
      if (polish > 0) return finish_best();
      if (stalled_infeasible(std::max(pres_eq, pres_in), b_tol)) return finish(QpStatus::Infeasible);
      if (unbounded_direction(1e4)) return finish(QpStatus::Unbounded);
      throw;
    }

    Vec dx, dy, dz, ds;
    auto newton = [&](const Vec& rc) {
      const Vec r1 = -rd - p.G.transpose() * (w.cwiseProduct(ri) - rc.cwiseQuotient(s));
      kkt.solve(r1, -rp, dx, dy);
      dz = w.cwiseProduct(p.G * dx + ri) - rc.cwiseQuotient(s);
      ds = -(rc + s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    if (m_in == 0) {
      newton(Vec::Zero(0));
      x += dx;
      y += dy;
      continue;
    }

    // Predictor.
    newton(s.cwiseProduct(z));
    const double alpha_aff = std::min({1.0, max_step(s, ds), max_step(z, dz)});
    const double mu_aff = (s + alpha_aff * ds).dot(z + alpha_aff * dz) / static_cast<double>(m_in);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
    const Vec ds_aff = ds, dz_aff = dz;

    // Corrector.
    newton(s.cwiseProduct(z) + ds_aff.cwiseProduct(dz_aff) - Vec::Constant(m_in, sigma * mu));
    const double eta = std::max(0.95, 1.0 - mu);
    const double alpha = std::min({1.0, eta * max_step(s, ds), eta * max_step(z, dz)});
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
  }
}

std::string dump_text(const QuadraticProgram& qp) {
  std::ostringstream out;
  out.precision(17);
  auto matrix = [&](const char* name, const Eigen::SparseMatrix<double>& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (int k = 0; k < m.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
        out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
      }
    }
  };
  auto vector = [&](const char* name, const std::vector<double>& v) {
    out << name << ' ' << v.size() << " 1\n";
    for (double d : v) out << d << '\n';
  };
  matrix("H", qp.h);
  vector("c", qp.c);
  out << "constant " << qp.constant << '\n';
  matrix("A_eq", qp.a_eq);
  vector("b_eq", qp.b_eq);
  matrix("A_ineq", qp.a_ineq);
  vector("b_ineq", qp.b_ineq);
  vector("lower", qp.lower);
  vector("upper", qp.upper);
  return out.str();
}

}  // namespace hdev
