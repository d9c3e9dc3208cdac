#include "oracles.hpp"

#include <cmath>
#include <random>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

anymdp::TabularTask random_task(std::size_t n, std::size_t na, std::uint64_t seed, bool terminal) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::gamma_distribution<double> g(1.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  anymdp::TabularTask t;
  t.n_states = n;
  t.n_actions = na;
  t.transition = anymdp::Tensor3(n, na);
  t.reward.mean = anymdp::Tensor3(n, na);
  t.reward.noise_std = anymdp::Tensor3(n, na);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < na; ++a) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += t.transition(s, a, j) = g(rng);
      for (std::size_t j = 0; j < n; ++j) {
        t.transition(s, a, j) /= total;
        t.reward.mean(s, a, j) = z(rng);
      }
    }
  t.reset_states = {0};
  t.reset_probs = {1.0};
  if (terminal) t.terminal_states = {n - 1};
  t.ranking.resize(n);
  for (std::size_t k = 0; k < n; ++k) t.ranking[k] = k;
  t.episode_cap = 8 * n;
  t.seed = seed;
  return t;
}

namespace {

bool is_terminal(const anymdp::TabularTask& t, std::size_t s) {
  for (std::size_t x : t.terminal_states)
    if (x == s) return true;
  return false;
}

double rbar(const anymdp::TabularTask& t, std::size_t s, std::size_t a) {
  double r = 0.0;
  for (std::size_t j = 0; j < t.n_states; ++j) r += t.transition(s, a, j) * t.reward.mean(s, a, j);
  return r;
}

}  // namespace

VectorXd evaluate(const anymdp::TabularTask& t, const std::vector<std::size_t>& pi, double gamma) {
  const auto n = static_cast<Index>(t.n_states);
  MatrixXd m = MatrixXd::Identity(n, n);
  VectorXd r = VectorXd::Zero(n);
  for (std::size_t s = 0; s < t.n_states; ++s) {
    if (is_terminal(t, s)) continue;
    const auto i = static_cast<Index>(s);
    r(i) = rbar(t, s, pi[s]);
    for (std::size_t j = 0; j < t.n_states; ++j)
      if (!is_terminal(t, j)) m(i, static_cast<Index>(j)) -= gamma * t.transition(s, pi[s], j);
  }
  return m.fullPivLu().solve(r);
}

Enumeration enumerate_policies(const anymdp::TabularTask& t, double gamma) {
  Enumeration out;
  out.best_values = VectorXd::Constant(static_cast<Index>(t.n_states), -1e300);
  std::vector<std::size_t> pi(t.n_states, 0);
  while (true) {
    const VectorXd v = evaluate(t, pi, gamma);
    out.best_values = out.best_values.cwiseMax(v);
    ++out.policies;
    std::size_t k = 0;
    while (k < t.n_states && ++pi[k] == t.n_actions) pi[k++] = 0;
    if (k == t.n_states) break;
  }
  return out;
}

MatrixXd q_star(const anymdp::TabularTask& t, double gamma) {
  const std::size_t n = t.n_states, na = t.n_actions;
  std::vector<std::size_t> pi(n, 0);
  MatrixXd q(static_cast<Index>(n), static_cast<Index>(na));
  for (int iter = 0; iter < 500; ++iter) {
    const VectorXd v = evaluate(t, pi, gamma);
    bool stable = true;
    for (std::size_t s = 0; s < n; ++s) {
      const auto i = static_cast<Index>(s);
      for (std::size_t a = 0; a < na; ++a) {
        double next = 0.0;
        for (std::size_t j = 0; j < n; ++j) next += t.transition(s, a, j) * v(static_cast<Index>(j));
        q(i, static_cast<Index>(a)) = is_terminal(t, s) ? 0.0 : rbar(t, s, a) + gamma * next;
      }
      Index arg = 0;
      const double best = q.row(i).maxCoeff(&arg);
      if (q(i, static_cast<Index>(pi[s])) < best - 1e-12) {
        pi[s] = static_cast<std::size_t>(arg);
        stable = false;
      }
    }
    if (stable) break;
  }
  return q;
}

MatrixXd to_eigen(const anymdp::Matrix& m) {
  MatrixXd e(static_cast<Index>(m.rows()), static_cast<Index>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(static_cast<Index>(i), static_cast<Index>(j)) = m(i, j);
  return e;
}

VectorXd dominant_left_eigenvector(const anymdp::Matrix& kernel) {
  Eigen::EigenSolver<MatrixXd> es(to_eigen(kernel).transpose());
  const Eigen::VectorXcd ev = es.eigenvalues();
  Index best = 0;
  for (Index k = 1; k < ev.size(); ++k)
    if (std::abs(ev(k) - 1.0) < std::abs(ev(best) - 1.0)) best = k;
  VectorXd v = es.eigenvectors().col(best).real();
  return v / v.sum();
}

}  // namespace oracle
