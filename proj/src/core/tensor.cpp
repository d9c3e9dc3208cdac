#include "anymdp/core/tensor.hpp"

#include "anymdp/simd/kernels.hpp"

namespace anymdp {

Matrix matmul(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.cols() != rhs.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix out(lhs.rows(), rhs.cols());
  for (std::size_t i = 0; i < lhs.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < lhs.cols(); ++k) {
      const double a = lhs(i, k);
      if (a != 0.0) simd::axpy(a, rhs.row(k), out_row);
    }
  }
  return out;
}

std::vector<double> vecmat(std::span<const double> p, const Matrix& m) {
  if (p.size() != m.rows()) throw std::invalid_argument("vecmat: dimension mismatch");
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (p[i] != 0.0) simd::axpy(p[i], m.row(i), out);
  }
  return out;
}

}  // namespace anymdp
