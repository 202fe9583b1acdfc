#pragma once

// Data-parallel inner loops shared by the dense linear algebra and the AC
// injection sums. Each kernel has a scalar reference implementation and SIMD
// variants; the variant is picked once at startup from the host CPU and can be
// overridden for testing.

#include <cstddef>
#include <span>
#include <string_view>

namespace hdev::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x for a row-major rows x cols matrix.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y);
};

// Table for a given ISA. Returns nullptr when the ISA was not compiled in or
// the running CPU does not support it.
const KernelTable* table_for(Isa isa);

const KernelTable& active();

// Forces a specific ISA (tests, benchmarks). Returns false if unavailable.
bool select(Isa isa);

// Restores the best ISA supported by the host.
void select_best();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

inline void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y) {
  active().gemv(a.data(), rows, cols, x.data(), y.data());
}

namespace detail {
extern const KernelTable kScalarTable;
#if defined(HDEV_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(HDEV_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace hdev::kernels
