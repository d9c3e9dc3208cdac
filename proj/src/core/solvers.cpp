#include "anymdp/core/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "anymdp/simd/kernels.hpp"

namespace anymdp {

Matrix uniform_policy(std::size_t n_states, std::size_t n_actions) {
  return Matrix(n_states, n_actions, 1.0 / static_cast<double>(n_actions));
}

Matrix deterministic_policy(std::span<const std::size_t> actions, std::size_t n_actions) {
  Matrix pi(actions.size(), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) pi(s, actions[s]) = 1.0;
  return pi;
}

namespace {

void check_policy(const TabularTask& task, const Matrix& policy) {
  if (policy.rows() != task.n_states || policy.cols() != task.n_actions)
    throw std::invalid_argument("policy shape does not match task (n_states x n_actions)");
  for (std::size_t s = 0; s < policy.rows(); ++s) {
    double total = 0.0;
    for (double w : policy.row(s)) {
      if (!(w >= 0.0)) throw std::invalid_argument("policy has a negative entry");
      total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9)
      throw std::invalid_argument("policy row " + std::to_string(s) + " is not a distribution");
  }
}

}  // namespace

Matrix average_kernel(const TabularTask& task, const Matrix& policy) {
  check_policy(task, policy);
  Matrix m(task.n_states, task.n_states);
  for (std::size_t s = 0; s < task.n_states; ++s) {
    auto out = m.row(s);
    for (std::size_t a = 0; a < task.n_actions; ++a) {
      const double w = policy(s, a);
      if (w != 0.0) simd::axpy(w, task.transition.row(s, a), out);
    }
  }
  return m;
}

void reset_terminal_rows(Matrix& kernel, std::span<const std::size_t> terminal_states,
                         std::span<const std::size_t> reset_states,
                         std::span<const double> reset_probs) {
  for (std::size_t t : terminal_states) {
    auto row = kernel.row(t);
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t k = 0; k < reset_states.size(); ++k) row[reset_states[k]] += reset_probs[k];
  }
}

Matrix connect_terminals(const TabularTask& task) {
  return connect_terminals(task, uniform_policy(task.n_states, task.n_actions));
}

Matrix connect_terminals(const TabularTask& task, const Matrix& policy) {
  Matrix m = average_kernel(task, policy);
  reset_terminal_rows(m, task.terminal_states, task.reset_states, task.reset_probs);
  return m;
}

Matrix expected_reward(const TabularTask& task) {
  Matrix r(task.n_states, task.n_actions);
  for (std::size_t s = 0; s < task.n_states; ++s)
    for (std::size_t a = 0; a < task.n_actions; ++a)
      r(s, a) = simd::dot(task.transition.row(s, a), task.reward.mean.row(s, a));
  return r;
}

ValueSolution value_iteration(const TabularTask& task, double gamma, const ViOptions& options) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0,1)");
  if (!(options.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const std::size_t ns = task.n_states;
  const std::size_t na = task.n_actions;
  if (!options.initial_values.empty() && options.initial_values.size() != ns)
    throw std::invalid_argument("initial values have the wrong length");

  const Matrix rbar = expected_reward(task);
  const auto terminal = terminal_mask(task);

  ValueSolution sol;
  sol.q_star = Matrix(ns, na);
  std::vector<double> v(ns, 0.0);
  if (!options.initial_values.empty())
    std::copy(options.initial_values.begin(), options.initial_values.end(), v.begin());
  for (std::size_t s = 0; s < ns; ++s)
    if (terminal[s]) v[s] = 0.0;
  std::vector<double> next(ns, 0.0);

  sol.residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    for (std::size_t s = 0; s < ns; ++s) {
      auto q_row = sol.q_star.row(s);
      if (terminal[s]) {
        std::fill(q_row.begin(), q_row.end(), 0.0);
        next[s] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < na; ++a) {
        const double q = rbar(s, a) + gamma * simd::dot(task.transition.row(s, a), v);
        q_row[a] = q;
        best = std::max(best, q);
      }
      next[s] = best;
    }
    sol.residual = simd::max_abs_diff(next, v);
    if (options.record_residuals) sol.residual_history.push_back(sol.residual);
    v.swap(next);
    sol.iterations = it;
    if (sol.residual <= options.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.v_star = std::move(v);
  return sol;
}

std::vector<std::size_t> greedy_actions(const Matrix& q, double tie_tol) {
  std::vector<std::size_t> out(q.rows(), 0);
  for (std::size_t s = 0; s < q.rows(); ++s) {
    const auto row = q.row(s);
    const double best = *std::max_element(row.begin(), row.end());
    for (std::size_t a = 0; a < row.size(); ++a) {
      if (row[a] >= best - tie_tol) {
        out[s] = a;
        break;
      }
    }
  }
  return out;
}

std::vector<double> policy_evaluation_exact(const TabularTask& task, const Matrix& policy,
                                            double gamma) {
  check_policy(task, policy);
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0,1)");
  const std::size_t ns = task.n_states;
  const Matrix rbar = expected_reward(task);
  const auto terminal = terminal_mask(task);
  const Matrix kernel = average_kernel(task, policy);

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(ns),
                                                static_cast<Eigen::Index>(ns));
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns));
  for (std::size_t s = 0; s < ns; ++s) {
    if (terminal[s]) continue;
    const auto i = static_cast<Eigen::Index>(s);
    for (std::size_t a_idx = 0; a_idx < task.n_actions; ++a_idx)
      r(i) += policy(s, a_idx) * rbar(s, a_idx);
    for (std::size_t t = 0; t < ns; ++t) {
      if (terminal[t]) continue;
      a(i, static_cast<Eigen::Index>(t)) -= gamma * kernel(s, t);
    }
  }
  const Eigen::VectorXd v = a.partialPivLu().solve(r);
  const double residual = (a * v - r).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
  if (!v.allFinite() || residual > 1e-10 * scale)
    throw std::runtime_error("policy evaluation: linear solve failed (residual " +
                             std::to_string(residual) + ")");
  return {v.data(), v.data() + v.size()};
}

StationaryDistribution stationary_distribution(const Matrix& kernel, const SdOptions& options,
                                               std::string policy_id) {
  const std::size_t n = kernel.rows();
  if (n == 0 || kernel.cols() != n) throw std::invalid_argument("kernel must be square");
  StationaryDistribution out;
  out.policy_id = std::move(policy_id);
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  out.residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    std::vector<double> image = vecmat(p, kernel);
    out.residual = simd::max_abs_diff(image, p);
    out.iterations = it;
    if (out.residual <= options.tol) {
      out.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = 0.5 * (p[i] + image[i]);
    const double total = simd::sum(p);
    for (double& x : p) x /= total;
  }
  out.probs = std::move(p);
  return out;
}

std::vector<double> stationary_distribution_direct(const Matrix& kernel) {
  const std::size_t n = kernel.rows();
  if (n == 0 || kernel.cols() != n) throw std::invalid_argument("kernel must be square");
  Matrix a = kernel;
  for (std::size_t k = n; k-- > 1;) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += a(k, j);
    if (!(s > 0.0))
      throw std::domain_error("stationary solve: chain is reducible at state " + std::to_string(k));
    for (std::size_t i = 0; i < k; ++i) a(i, k) /= s;
    for (std::size_t i = 0; i < k; ++i) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) a(i, j) += aik * a(k, j);
    }
  }
  std::vector<double> p(n, 0.0);
  p[0] = 1.0;
  for (std::size_t j = 1; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < j; ++i) acc += p[i] * a(i, j);
    p[j] = acc;
  }
  double total = 0.0;
  for (double x : p) total += x;
  for (double& x : p) x /= total;
  return p;
}

std::optional<std::vector<double>> unique_stationary_distribution(const Matrix& kernel) {
  const std::size_t n = kernel.rows();
  if (n == 0 || kernel.cols() != n) throw std::invalid_argument("kernel must be square");
  // Edges below kEdgeFloor carry mass that underflows during elimination;
  // they are ignored when classifying states.
  constexpr double kEdgeFloor = 1e-30;
  // Kosaraju: forward finishing order, then components on the transpose.
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (seen[root]) continue;
    seen[root] = 1;
    stack.push_back({root, 0});
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      while (next < n && !(kernel(v, next) > kEdgeFloor && !seen[next])) ++next;
      if (next == n) {
        order.push_back(v);
        stack.pop_back();
      } else {
        seen[next] = 1;
        stack.push_back({next, 0});
      }
    }
  }
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(n, kNone);
  std::size_t n_comp = 0;
  std::vector<std::size_t> todo;
  for (std::size_t k = n; k-- > 0;) {
    if (comp[order[k]] != kNone) continue;
    todo.push_back(order[k]);
    comp[order[k]] = n_comp;
    while (!todo.empty()) {
      const std::size_t v = todo.back();
      todo.pop_back();
      for (std::size_t u = 0; u < n; ++u)
        if (comp[u] == kNone && kernel(u, v) > kEdgeFloor) {
          comp[u] = n_comp;
          todo.push_back(u);
        }
    }
    ++n_comp;
  }
  std::vector<std::uint8_t> closed(n_comp, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (kernel(i, j) > kEdgeFloor && comp[i] != comp[j]) closed[comp[i]] = 0;
  std::size_t closed_class = kNone;
  for (std::size_t c = 0; c < n_comp; ++c) {
    if (!closed[c]) continue;
    if (closed_class != kNone) return std::nullopt;
    closed_class = c;
  }
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < n; ++i)
    if (comp[i] == closed_class) members.push_back(i);
  Matrix sub(members.size(), members.size());
  for (std::size_t a = 0; a < members.size(); ++a)
    for (std::size_t b = 0; b < members.size(); ++b) sub(a, b) = kernel(members[a], members[b]);
  const std::vector<double> q = stationary_distribution_direct(sub);
  std::vector<double> p(n, 0.0);
  for (std::size_t a = 0; a < members.size(); ++a) p[members[a]] = q[a];
  return p;
}

double normalized_entropy(std::span<const double> p) {
  if (p.size() <= 1) return 0.0;
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h / std::log(static_cast<double>(p.size()));
}

}  // namespace anymdp
