#pragma once

// Data-parallel inner loops shared by the solvers.
//
// Every kernel has a scalar reference implementation. Vector variants (AVX2+FMA
// on x86-64, NEON on AArch64) are compiled into separate translation units and
// selected once at runtime from the CPU feature bits. The environment variable
// ANYMDP_SIMD=scalar|avx2|neon forces a particular table when it is available.
//
// Vector variants reassociate sums, so results agree with the scalar reference
// to rounding (see tests/unit/simd_kernels_test.cpp for the tolerances).

#include <cstddef>
#include <span>
#include <string_view>

namespace anymdp::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled for this target.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

bool cpu_supports(Isa isa);
std::string_view isa_name(Isa isa);

// Table used by the library: the thread-local override if one is installed,
// otherwise the process-wide selection.
const KernelTable& active();

// Installs a kernel table for the current thread for the guard's lifetime.
// Used by equivalence tests to run whole solvers on a specific variant.
class ScopedKernelOverride {
 public:
  explicit ScopedKernelOverride(const KernelTable& table);
  ~ScopedKernelOverride();
  ScopedKernelOverride(const ScopedKernelOverride&) = delete;
  ScopedKernelOverride& operator=(const ScopedKernelOverride&) = delete;

 private:
  const KernelTable* previous_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  return active().max_abs_diff(a.data(), b.data(), a.size());
}

inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }

}  // namespace anymdp::simd
