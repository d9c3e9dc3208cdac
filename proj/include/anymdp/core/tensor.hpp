#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace anymdp {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Dense (state, action, next-state) tensor; the innermost axis is contiguous.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t n_states, std::size_t n_actions, double fill = 0.0)
      : n_states_(n_states), n_actions_(n_actions), data_(n_states * n_actions * n_states, fill) {}

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  double& operator()(std::size_t s, std::size_t a, std::size_t next) {
    return data_[(s * n_actions_ + a) * n_states_ + next];
  }
  double operator()(std::size_t s, std::size_t a, std::size_t next) const {
    return data_[(s * n_actions_ + a) * n_states_ + next];
  }

  std::span<double> row(std::size_t s, std::size_t a) {
    return {data_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {data_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> data_;
};

// Returns m1 * m2 for square matrices of equal size.
Matrix matmul(const Matrix& lhs, const Matrix& rhs);

// Row vector times matrix: out = p * m.
std::vector<double> vecmat(std::span<const double> p, const Matrix& m);

}  // namespace anymdp
