// AArch64 only; NEON (Advanced SIMD) is part of the base ISA there.

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

#include "anymdp/simd/kernels.hpp"

namespace anymdp::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_diff_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t m = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) m = vmaxq_f64(m, vabdq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double out = vmaxvq_f64(m);
  for (; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > out) out = d;
  }
  return out;
}

double sum_neon(const double* a, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
  double out = vaddvq_f64(acc);
  for (; i < n; ++i) out += a[i];
  return out;
}

constexpr KernelTable kNeonTable{Isa::neon, dot_neon, axpy_neon, max_abs_diff_neon, sum_neon};

}  // namespace

const KernelTable* neon_kernels() { return &kNeonTable; }

}  // namespace anymdp::simd
