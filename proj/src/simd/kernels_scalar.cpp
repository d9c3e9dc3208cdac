#include <cmath>
#include <cstddef>

#include "anymdp/simd/kernels.hpp"

namespace anymdp::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_diff_scalar(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

constexpr KernelTable kScalarTable{Isa::scalar, dot_scalar, axpy_scalar, max_abs_diff_scalar,
                                   sum_scalar};

}  // namespace

const KernelTable& scalar_kernels() { return kScalarTable; }

}  // namespace anymdp::simd
