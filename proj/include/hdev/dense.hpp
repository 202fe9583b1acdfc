#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hdev {

// Row-major dense matrix. Sizes in this project stay small (bus-by-bus
// Jacobians, small KKT systems), so storage is a single contiguous vector.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  // y = A x
  std::vector<double> multiply(std::span<const double> x) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// LDL^T factorization without pivoting. Valid for symmetric quasi-definite
// matrices (the regularized KKT systems of the QP solver), where any symmetric
// ordering admits such a factorization.
class DenseLdlt {
 public:
  // Returns false when a pivot magnitude falls below pivot_tol.
  bool factor(const DenseMatrix& a, double pivot_tol = 1e-300);

  // Solves in place.
  void solve(std::span<double> rhs) const;

  std::size_t size() const { return n_; }
  std::span<const double> pivots() const { return d_; }

 private:
  std::size_t n_ = 0;
  DenseMatrix l_;
  std::vector<double> d_;
};

}  // namespace hdev
