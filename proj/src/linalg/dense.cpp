#include "hdev/dense.hpp"

#include <cmath>

#include "hdev/kernels.hpp"

namespace hdev {

std::vector<double> DenseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(rows_, 0.0);
  if (rows_ > 0 && cols_ > 0) kernels::gemv(data_, rows_, cols_, x, y);
  return y;
}

bool DenseLdlt::factor(const DenseMatrix& a, double pivot_tol) {
  n_ = a.rows();
  l_ = DenseMatrix(n_, n_);
  d_.assign(n_, 0.0);
  std::vector<double> w(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    auto lj = l_.row(j);
    for (std::size_t k = 0; k < j; ++k) w[k] = lj[k] * d_[k];
    const std::span<const double> wj(w.data(), j);
    const double dj = a(j, j) - kernels::dot(lj.first(j), wj);
    if (!std::isfinite(dj) || std::abs(dj) < pivot_tol) return false;
    d_[j] = dj;
    lj[j] = 1.0;
    for (std::size_t i = j + 1; i < n_; ++i) {
      auto li = l_.row(i);
      li[j] = (a(i, j) - kernels::dot(li.first(j), wj)) / dj;
    }
  }
  return true;
}

void DenseLdlt::solve(std::span<double> rhs) const {
  for (std::size_t i = 0; i < n_; ++i) {
    rhs[i] -= kernels::dot(l_.row(i).first(i), rhs.first(i));
  }
  for (std::size_t i = 0; i < n_; ++i) rhs[i] /= d_[i];
  for (std::size_t i = n_; i-- > 0;) {
    if (i > 0) kernels::axpy(-rhs[i], l_.row(i).first(i), rhs.first(i));
  }
}

}  // namespace hdev
