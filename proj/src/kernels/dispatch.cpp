#include "hdev/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace hdev::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(HDEV_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* best_table() {
  // HDEV_ISA=scalar pins the reference kernels for the whole process.
  if (const char* env = std::getenv("HDEV_ISA"); env != nullptr && std::string(env) == "scalar") {
    return &detail::kScalarTable;
  }
  if (const KernelTable* t = table_for(Isa::Avx2)) return t;
  if (const KernelTable* t = table_for(Isa::Neon)) return t;
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{best_table()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return &detail::kScalarTable;
    case Isa::Avx2:
#if defined(HDEV_HAVE_AVX2)
      if (cpu_has_avx2()) return &detail::kAvx2Table;
#endif
      return nullptr;
    case Isa::Neon:
#if defined(HDEV_HAVE_NEON)
      return &detail::kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (t == nullptr) return false;
  current().store(t, std::memory_order_release);
  return true;
}

void select_best() { current().store(best_table(), std::memory_order_release); }

}  // namespace hdev::kernels
