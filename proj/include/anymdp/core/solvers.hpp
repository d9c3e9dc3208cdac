#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anymdp/core/task.hpp"
#include "anymdp/core/tensor.hpp"

namespace anymdp {

inline constexpr double kDefaultViTolerance = 1e-8;
inline constexpr double kDefaultSdTolerance = 1e-10;
inline constexpr std::size_t kDefaultMaxIterations = 100000;
// Actions whose Q-values are within this of the maximum count as tied; the
// lowest index wins.
inline constexpr double kTieTolerance = 1e-9;

// Policies are (n_states x n_actions) row-stochastic matrices.
Matrix uniform_policy(std::size_t n_states, std::size_t n_actions);
Matrix deterministic_policy(std::span<const std::size_t> actions, std::size_t n_actions);

// M[s][s'] = sum_a policy[s][a] * P[s][a][s'].
Matrix average_kernel(const TabularTask& task, const Matrix& policy);

// Replaces the row of every terminal state by the reset distribution.
void reset_terminal_rows(Matrix& kernel, std::span<const std::size_t> terminal_states,
                         std::span<const std::size_t> reset_states,
                         std::span<const double> reset_probs);

// Average kernel with terminal rows connected back to the reset distribution.
// The single-argument form uses the uniform policy.
Matrix connect_terminals(const TabularTask& task);
Matrix connect_terminals(const TabularTask& task, const Matrix& policy);

// rbar[s][a] = sum_s' P[s][a][s'] * mean[s][a][s'].
Matrix expected_reward(const TabularTask& task);

struct ValueSolution {
  std::vector<double> v_star;
  Matrix q_star;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
  // Sup-norm change per sweep, filled when ViOptions::record_residuals is set.
  std::vector<double> residual_history;
};

struct ViOptions {
  double tol = kDefaultViTolerance;
  std::size_t max_iters = kDefaultMaxIterations;
  // Optional warm start; must be empty or of length n_states.
  std::span<const double> initial_values = {};
  bool record_residuals = false;
};

// Episodic Bellman optimality fixed point. Terminal states have value 0 and
// entering one yields only the transition reward. gamma may be 0 (myopic).
// Non-convergence is reported through `converged`, not thrown.
ValueSolution value_iteration(const TabularTask& task, double gamma, const ViOptions& options = {});

// Greedy actions of a Q table; ties within `tie_tol` go to the lowest index.
std::vector<std::size_t> greedy_actions(const Matrix& q, double tie_tol = kTieTolerance);

// Solves (I - gamma P_pi) V = r_pi directly with terminal states pinned to 0.
// Throws std::runtime_error if the residual of the solve exceeds 1e-10 (scaled
// by max(1, |r_pi|_inf)).
std::vector<double> policy_evaluation_exact(const TabularTask& task, const Matrix& policy,
                                            double gamma);

struct StationaryDistribution {
  std::vector<double> probs;
  std::string policy_id;
  bool converged = false;
  double residual = 0.0;
  std::size_t iterations = 0;
};

struct SdOptions {
  double tol = kDefaultSdTolerance;
  std::size_t max_iters = kDefaultMaxIterations;
};

// Power iteration from the uniform vector. Each step averages the iterate with
// its image (p <- (p + pP) / 2), which leaves the fixed points unchanged and
// removes periodic oscillation. Stops when sup|p - pP| <= tol.
StationaryDistribution stationary_distribution(const Matrix& kernel, const SdOptions& options = {},
                                               std::string policy_id = {});

// Direct stationary solve by Grassmann-Taksar-Heyman state reduction. It
// performs no subtractions, so tiny probabilities keep their relative
// accuracy; used wherever log-probabilities are analysed. Throws
// std::domain_error if the chain is reducible at some reduction step.
std::vector<double> stationary_distribution_direct(const Matrix& kernel);

// Stationary distribution of a possibly reducible chain: GTH on the single
// closed communicating class, zero on transient states. Entries at or below
// 1e-30 are ignored when classifying states. nullopt when more than one closed
// class exists, so the stationary distribution is not unique.
std::optional<std::vector<double>> unique_stationary_distribution(const Matrix& kernel);

// -sum p log p / log n, with 0 log 0 = 0; defined as 0 when n == 1.
double normalized_entropy(std::span<const double> p);

}  // namespace anymdp
