#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "anymdp/core/task.hpp"
#include "anymdp/core/tensor.hpp"

// Reference computations written independently of the library solvers. They
// favour directness over speed and are only meant for small tasks.
namespace oracle {

// Dirichlet(1) transitions, N(0, 1) reward means, reset state 0. With
// `terminal`, the last state is terminal (requires n_states >= 2).
anymdp::TabularTask random_task(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                                bool terminal);

// V^pi of a deterministic policy by a dense LU solve; terminal values are 0.
Eigen::VectorXd evaluate(const anymdp::TabularTask& task, const std::vector<std::size_t>& actions,
                         double gamma);

struct Enumeration {
  Eigen::VectorXd best_values;  // per-state maximum over all policies
  std::size_t policies = 0;
};

// Every one of n_a^n_s deterministic policies, evaluated exactly.
Enumeration enumerate_policies(const anymdp::TabularTask& task, double gamma);

// Q* by policy iteration with exact evaluation.
Eigen::MatrixXd q_star(const anymdp::TabularTask& task, double gamma);

// Left eigenvector of the eigenvalue closest to 1, normalised to sum 1.
Eigen::VectorXd dominant_left_eigenvector(const anymdp::Matrix& kernel);

Eigen::MatrixXd to_eigen(const anymdp::Matrix& m);

}  // namespace oracle
