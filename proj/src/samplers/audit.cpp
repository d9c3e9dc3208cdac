#include "anymdp/samplers/audit.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "anymdp/samplers/anymdp.hpp"

namespace anymdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd policy_kernel(const TabularTask& t, const std::vector<std::size_t>* actions) {
  const auto n = static_cast<Eigen::Index>(t.n_states);
  MatrixXd p = MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < t.n_states; ++s)
    for (std::size_t a = 0; a < t.n_actions; ++a) {
      if (actions && (*actions)[s] != a) continue;
      const double w = actions ? 1.0 : 1.0 / static_cast<double>(t.n_actions);
      for (std::size_t j = 0; j < t.n_states; ++j)
        p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) += w * t.transition(s, a, j);
    }
  return p;
}

void connect(MatrixXd& p, const TabularTask& t) {
  for (std::size_t s : t.terminal_states) {
    p.row(static_cast<Eigen::Index>(s)).setZero();
    for (std::size_t k = 0; k < t.reset_states.size(); ++k)
      p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t.reset_states[k])) += t.reset_probs[k];
  }
}

// Stationary vector supported on the unique closed class, found by boolean
// transitive closure over entries above 1e-30; empty if the class is not unique.
VectorXd stationary(const MatrixXd& p) {
  const Eigen::Index n = p.rows();
  std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = i == j || p(i, j) > 1e-30;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t k = 0; k < un; ++k)
    for (std::size_t i = 0; i < un; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < un; ++j)
          if (reach[k][j]) reach[i][j] = true;
  // i is recurrent iff everything it reaches reaches it back.
  std::vector<std::size_t> recurrent;
  for (std::size_t i = 0; i < un; ++i) {
    bool rec = true;
    for (std::size_t j = 0; j < un && rec; ++j) rec = !reach[i][j] || reach[j][i];
    if (rec) recurrent.push_back(i);
  }
  if (recurrent.empty()) return {};
  for (std::size_t j : recurrent)
    if (!reach[recurrent.front()][j]) return {};
  const auto m = static_cast<Eigen::Index>(recurrent.size());
  MatrixXd a(m, m);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c)
      a(r, c) = p(static_cast<Eigen::Index>(recurrent[static_cast<std::size_t>(c)]),
                  static_cast<Eigen::Index>(recurrent[static_cast<std::size_t>(r)])) -
                (r == c ? 1.0 : 0.0);
  a.row(m - 1).setOnes();
  VectorXd rhs = VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  const VectorXd q = a.fullPivLu().solve(rhs);
  VectorXd out = VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < m; ++r)
    out(static_cast<Eigen::Index>(recurrent[static_cast<std::size_t>(r)])) = std::max(0.0, q(r));
  return out / out.sum();
}

struct Solved {
  MatrixXd q;
  VectorXd v;
  std::vector<std::size_t> greedy;
};

// Policy iteration with exact evaluation; terminal states have value 0.
Solved solve_optimal(const TabularTask& t, double gamma) {
  const std::size_t n = t.n_states, na = t.n_actions;
  std::vector<bool> terminal(n, false);
  for (std::size_t s : t.terminal_states) terminal[s] = true;
  MatrixXd rbar = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(na));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t j = 0; j < n; ++j)
        rbar(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) +=
            t.transition(s, a, j) * t.reward.mean(s, a, j);

  Solved out;
  std::vector<std::size_t> pi(n, 0);
  for (int iter = 0; iter < 1000; ++iter) {
    MatrixXd m = MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    VectorXd r = VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
      if (terminal[s]) continue;
      const auto si = static_cast<Eigen::Index>(s);
      r(si) = rbar(si, static_cast<Eigen::Index>(pi[s]));
      for (std::size_t j = 0; j < n; ++j)
        if (!terminal[j]) m(si, static_cast<Eigen::Index>(j)) -= gamma * t.transition(s, pi[s], j);
    }
    out.v = m.fullPivLu().solve(r);
    out.q = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(na));
    bool stable = true;
    for (std::size_t s = 0; s < n; ++s) {
      if (terminal[s]) continue;
      const auto si = static_cast<Eigen::Index>(s);
      for (std::size_t a = 0; a < na; ++a) {
        double cont = 0.0;
        for (std::size_t j = 0; j < n; ++j) cont += t.transition(s, a, j) * out.v(static_cast<Eigen::Index>(j));
        out.q(si, static_cast<Eigen::Index>(a)) = rbar(si, static_cast<Eigen::Index>(a)) + gamma * cont;
      }
      const double best = out.q.row(si).maxCoeff();
      if (out.q(si, static_cast<Eigen::Index>(pi[s])) < best - 1e-12) {
        Eigen::Index arg = 0;
        out.q.row(si).maxCoeff(&arg);
        pi[s] = static_cast<std::size_t>(arg);
        stable = false;
      }
    }
    if (stable) break;
  }
  out.greedy.assign(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const double best = out.q.row(si).maxCoeff();
    for (std::size_t a = 0; a < na; ++a)
      if (out.q(si, static_cast<Eigen::Index>(a)) >= best - 1e-9) {
        out.greedy[s] = a;
        break;
      }
  }
  return out;
}

}  // namespace

nlohmann::json AuditReport::to_json() const {
  return {{"structure_ok", structure_ok}, {"band_ok", band_ok},         {"ergodic", ergodic},
          {"ascending", ascending},       {"entropy_ok", entropy_ok},   {"max_row_error", max_row_error},
          {"second_modulus", second_modulus}, {"margin", margin},       {"entropy", entropy},
          {"pass", pass()},               {"first_failure", first_failure}};
}

AuditReport audit_anymdp_task(const TabularTask& t) {
  if (t.generator != GeneratorId::anymdp && t.generator != GeneratorId::anymdp_no_cr)
    throw std::invalid_argument("audit: not an AnyMDP task");
  const AnyMdpConfig cfg = AnyMdpConfig::from_json(t.config).resolve();
  const double eta = t.config.at("eta").get<double>();
  const std::size_t n = t.n_states, na = t.n_actions;
  AuditReport rep;
  auto fail = [&](const char* what) {
    if (rep.first_failure.empty()) rep.first_failure = what;
  };

  // Structure.
  bool ok = n > 0 && na > 0 && t.transition.n_states() == n && t.transition.n_actions() == na &&
            t.ranking.size() == n && !t.reset_states.empty() &&
            t.reset_probs.size() == t.reset_states.size();
  if (ok) {
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t a = 0; a < na; ++a) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          ok = ok && t.transition(s, a, j) >= 0.0;
          sum += t.transition(s, a, j);
        }
        rep.max_row_error = std::max(rep.max_row_error, std::fabs(sum - 1.0));
      }
    ok = ok && rep.max_row_error <= 1e-9;
    std::vector<std::size_t> sorted = t.ranking;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < n; ++k) ok = ok && sorted[k] == k;
    for (std::size_t r : t.reset_states)
      ok = ok && r < n &&
           std::find(t.terminal_states.begin(), t.terminal_states.end(), r) == t.terminal_states.end();
  }
  rep.structure_ok = ok;
  if (!ok) {
    fail("structure");
    return rep;
  }
  const bool bandit = n == 1;

  // Band structure of the uniform-policy kernel, rows and columns by rank.
  const MatrixXd avg = policy_kernel(t, nullptr);
  rep.band_ok = true;
  if (!bandit) {
    const std::size_t bd = *cfg.band_down, bu = *cfg.band_up;
    for (std::size_t i = 0; i < n; ++i) {
      double below = 0.0, above = 0.0, total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = avg(static_cast<Eigen::Index>(t.ranking[i]), static_cast<Eigen::Index>(t.ranking[j]));
        total += p;
        if (j + bd < i || j > i + bu) rep.band_ok = rep.band_ok && p == 0.0;
        if (j < i) below += p;
        if (j > i) above += p;
      }
      rep.band_ok = rep.band_ok && std::fabs(total - 1.0) <= 1e-9;
      if (i >= bd) rep.band_ok = rep.band_ok && below > eta;
      if (i + 1 < n) rep.band_ok = rep.band_ok && above > cfg.eps_forward;
    }
  }
  if (!rep.band_ok) fail("band");

  // Ergodicity by spectrum of the terminal-connected chain.
  rep.ergodic = true;
  if (!bandit) {
    MatrixXd c = avg;
    connect(c, t);
    const Eigen::VectorXcd ev = Eigen::EigenSolver<MatrixXd>(c, false).eigenvalues();
    std::vector<double> mod;
    std::size_t unit = 0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
      if (std::abs(ev(k) - std::complex<double>(1.0, 0.0)) < 1e-8) {
        ++unit;
      } else {
        mod.push_back(std::abs(ev(k)));
      }
    }
    rep.second_modulus = mod.empty() ? 0.0 : *std::max_element(mod.begin(), mod.end());
    rep.ergodic = unit == 1 && rep.second_modulus < 1.0 - 1e-9;
  }
  if (!rep.ergodic) fail("ergodicity");

  // Ascending values.
  const Solved sol = solve_optimal(t, t.discount_default);
  const std::size_t top = t.ranking.back();
  const bool top_terminal =
      std::find(t.terminal_states.begin(), t.terminal_states.end(), top) != t.terminal_states.end();
  double arrival = sol.v(static_cast<Eigen::Index>(top));
  if (top_terminal) {
    if (t.reward.composite) {
      arrival = t.reward.state_reward[top];
    } else {
      double acc = 0.0;
      std::size_t cnt = 0;
      for (std::size_t s = 0; s < n; ++s) {
        if (std::find(t.terminal_states.begin(), t.terminal_states.end(), s) != t.terminal_states.end()) continue;
        for (std::size_t a = 0; a < na; ++a)
          if (t.transition(s, a, top) > 0.0) {
            acc += t.reward.mean(s, a, top);
            ++cnt;
          }
      }
      arrival = cnt ? acc / static_cast<double>(cnt) : 0.0;
    }
  }
  double best_reset = -std::numeric_limits<double>::infinity();
  for (std::size_t r : t.reset_states) best_reset = std::max(best_reset, sol.v(static_cast<Eigen::Index>(r)));
  rep.margin = arrival - best_reset - cfg.kappa;
  rep.ascending = bandit || rep.margin > 0.0;
  if (!rep.ascending) fail("ascending");

  // Oracle-policy stationary entropy.
  rep.entropy_ok = true;
  if (!bandit) {
    MatrixXd c = policy_kernel(t, &sol.greedy);
    connect(c, t);
    const VectorXd p = stationary(c);
    const bool unique = p.size() == c.rows() && p.allFinite();
    double h = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k)
      if (p(k) > 0.0) h -= p(k) * std::log(p(k));
    rep.entropy = unique ? h / std::log(static_cast<double>(n)) : 0.0;
    rep.entropy_ok = rep.entropy > cfg.h0;
  }
  if (!rep.entropy_ok) fail("entropy");
  return rep;
}

}  // namespace anymdp
