#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "anymdp/core/rng.hpp"
#include "anymdp/core/simulator.hpp"
#include "anymdp/core/solvers.hpp"
#include "anymdp/samplers/anymdp.hpp"
#include "oracles.hpp"

namespace {

using namespace anymdp;

TabularTask single_state(double r) {
  TabularTask t;
  t.n_states = 1;
  t.n_actions = 1;
  t.transition = Tensor3(1, 1, 1.0);
  t.reward.mean = Tensor3(1, 1, r);
  t.reward.noise_std = Tensor3(1, 1, 0.0);
  t.reset_states = {0};
  t.reset_probs = {1.0};
  t.ranking = {0};
  return t;
}

// s0 -> s1 (terminal) with entry reward 1.
TabularTask two_state_chain(std::size_t n_actions = 1) {
  TabularTask t;
  t.n_states = 2;
  t.n_actions = n_actions;
  t.transition = Tensor3(2, n_actions);
  t.reward.mean = Tensor3(2, n_actions);
  t.reward.noise_std = Tensor3(2, n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) {
    t.transition(0, a, 1) = 1.0;
    t.transition(1, a, 1) = 1.0;
    t.reward.mean(0, a, 1) = a == 0 ? 1.0 : 0.0;
  }
  t.reset_states = {0};
  t.reset_probs = {1.0};
  t.terminal_states = {1};
  t.ranking = {0, 1};
  return t;
}

TEST(AverageKernel, SingleActionEqualsTransition) {
  const TabularTask t = oracle::random_task(5, 1, 3, false);
  const Matrix m = average_kernel(t, uniform_policy(5, 1));
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(m(s, j), t.transition(s, 0, j));
}

TEST(AverageKernel, SymmetricTwoActions) {
  TabularTask t = two_state_chain(2);
  t.terminal_states.clear();
  t.transition = Tensor3(2, 2);
  for (std::size_t s = 0; s < 2; ++s) {
    t.transition(s, 0, 0) = 1.0;
    t.transition(s, 1, 1) = 1.0;
  }
  const Matrix m = average_kernel(t, uniform_policy(2, 2));
  EXPECT_EQ(m(0, 0), 0.5);
  EXPECT_EQ(m(0, 1), 0.5);
}

TEST(AverageKernel, RejectsMismatchedPolicy) {
  const TabularTask t = oracle::random_task(4, 3, 1, false);
  EXPECT_THROW(average_kernel(t, uniform_policy(4, 2)), std::invalid_argument);
}

TEST(AverageKernel, MatchesMonteCarloFrequencies) {
  const TabularTask t = oracle::random_task(4, 3, 77, false);
  const Matrix m = average_kernel(t, uniform_policy(4, 3));
  const Simulator sim(t);
  Rng rng(5);
  constexpr std::size_t kSteps = 1'000'000;
  std::vector<double> count(16, 0.0), visits(4, 0.0);
  for (std::size_t k = 0; k < kSteps; ++k) {
    const std::size_t s = k % 4;
    const std::size_t a = uniform_index(rng, 0, 2);
    ++count[s * 4 + sim.step(s, a, rng).next_state];
    ++visits[s];
  }
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t j = 0; j < 4; ++j) {
      const double p = m(s, j);
      const double se = std::sqrt(p * (1 - p) / visits[s]);
      EXPECT_NEAR(count[s * 4 + j] / visits[s], p, 3 * se + 1e-12);
    }
}

TEST(ConnectTerminals, NoTerminalsEqualsAverageKernel) {
  const TabularTask t = oracle::random_task(5, 2, 8, false);
  EXPECT_EQ(connect_terminals(t), average_kernel(t, uniform_policy(5, 2)));
}

TEST(ConnectTerminals, TerminalRowBecomesResetDistribution) {
  TabularTask t = oracle::random_task(3, 2, 9, true);
  const Matrix m = connect_terminals(t);
  EXPECT_EQ(m(2, 0), 1.0);
  EXPECT_EQ(m(2, 1), 0.0);
  EXPECT_EQ(m(2, 2), 0.0);
}

TEST(ConnectTerminals, SampledTaskHasPositiveStationaryDistribution) {
  const TabularTask t = sample_anymdp(AnyMdpConfig{}, 21).task;
  const auto sd = stationary_distribution(connect_terminals(t));
  EXPECT_TRUE(sd.converged);
  for (double p : sd.probs) EXPECT_GT(p, 0.0);
}

TEST(ValueIteration, GeometricSeries) {
  const TabularTask t = single_state(2.0);
  ViOptions o;
  o.tol = 1e-12;
  const auto v = value_iteration(t, 0.9, o);
  EXPECT_TRUE(v.converged);
  EXPECT_NEAR(v.v_star[0], 20.0, 1e-9);
}

TEST(ValueIteration, OneStepEpisodic) {
  const auto v = value_iteration(two_state_chain(), 0.9);
  EXPECT_NEAR(v.v_star[0], 1.0, 1e-12);
  EXPECT_EQ(v.v_star[1], 0.0);
}

TEST(ValueIteration, MyopicAtGammaZero) {
  const TabularTask t = oracle::random_task(4, 3, 4, false);
  const auto v = value_iteration(t, 0.0);
  const Matrix r = expected_reward(t);
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(v.q_star(s, a), r(s, a), 1e-15);
}

TEST(ValueIteration, RejectsBadArguments) {
  const TabularTask t = single_state(1.0);
  EXPECT_THROW(value_iteration(t, 1.0), std::invalid_argument);
  ViOptions o;
  o.tol = 0.0;
  EXPECT_THROW(value_iteration(t, 0.5, o), std::invalid_argument);
}

TEST(ValueIteration, ReportsNonConvergence) {
  ViOptions o;
  o.max_iters = 3;
  const auto v = value_iteration(single_state(1.0), 0.99, o);
  EXPECT_FALSE(v.converged);
  EXPECT_EQ(v.iterations, 3u);
  EXPECT_GT(v.residual, o.tol);
}

TEST(ValueIteration, MatchesPolicyEnumerationOnSmallTasks) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    const std::size_t ns = 1 + seed % 4, na = 1 + (seed / 4) % 3;
    const double gamma = (seed % 3 == 0) ? 0.5 : (seed % 3 == 1 ? 0.9 : 0.99);
    const TabularTask t = oracle::random_task(ns, na, seed, ns > 1 && seed % 2 == 0);
    ViOptions o;
    o.tol = 1e-13;
    const auto v = value_iteration(t, gamma, o);
    const auto e = oracle::enumerate_policies(t, gamma);
    ASSERT_TRUE(v.converged);
    for (std::size_t s = 0; s < ns; ++s) EXPECT_NEAR(v.v_star[s], e.best_values(static_cast<long>(s)), 1e-8);
    ++checked;
  }
  EXPECT_GE(checked, 100u);
}

TEST(ValueIteration, ContractionOfSuccessiveChanges) {
  const TabularTask t = oracle::random_task(6, 3, 12, true);
  ViOptions o;
  o.record_residuals = true;
  const double gamma = 0.9;
  const auto v = value_iteration(t, gamma, o);
  for (std::size_t k = 1; k < v.residual_history.size(); ++k)
    EXPECT_LE(v.residual_history[k], gamma * v.residual_history[k - 1] + 1e-14);
}

TEST(ValueIteration, ValueIsRowMaximumOfQ) {
  const TabularTask t = sample_anymdp(AnyMdpConfig{}, 3).task;
  const auto v = value_iteration(t, 0.994);
  for (std::size_t s = 0; s < t.n_states; ++s) {
    double best = v.q_star(s, 0);
    for (std::size_t a = 1; a < t.n_actions; ++a) best = std::max(best, v.q_star(s, a));
    EXPECT_NEAR(v.v_star[s], best, 1e-10);
  }
}

TEST(ValueIteration, AgreesWithPolicyIterationOnSampledTasks) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const TabularTask t = sample_anymdp(AnyMdpConfig{}, seed).task;
    ViOptions o;
    o.tol = 1e-11;
    const auto v = value_iteration(t, 0.994, o);
    const Eigen::MatrixXd q = oracle::q_star(t, 0.994);
    for (std::size_t s = 0; s < t.n_states; ++s)
      for (std::size_t a = 0; a < t.n_actions; ++a)
        EXPECT_NEAR(v.q_star(s, a), q(static_cast<long>(s), static_cast<long>(a)), 1e-7 * (1 + std::fabs(q(static_cast<long>(s), static_cast<long>(a)))));
  }
}

TEST(GreedyActions, LowestIndexWinsTies) {
  Matrix q(3, 3);
  q(0, 0) = 1.0, q(0, 1) = 1.0 + 5e-10, q(0, 2) = 0.0;
  q(1, 0) = 0.0, q(1, 1) = 2.0, q(1, 2) = 2.0;
  q(2, 0) = 0.0, q(2, 1) = 0.0, q(2, 2) = 1.0;
  EXPECT_EQ(greedy_actions(q), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(PolicyEvaluation, GreedyPolicyReproducesOptimalValues) {
  const TabularTask t = sample_anymdp(AnyMdpConfig{}, 5).task;
  ViOptions o;
  o.tol = 1e-12;
  const auto v = value_iteration(t, 0.994, o);
  const auto pi = greedy_actions(v.q_star);
  const auto vp = policy_evaluation_exact(t, deterministic_policy(pi, t.n_actions), 0.994);
  for (std::size_t s = 0; s < t.n_states; ++s) EXPECT_NEAR(vp[s], v.v_star[s], 1e-8);
}

TEST(PolicyEvaluation, UniformPolicyClosedForm) {
  // Two actions into the terminal state, entry rewards 1 and 0.
  const TabularTask t = two_state_chain(2);
  const auto v = policy_evaluation_exact(t, uniform_policy(2, 2), 0.9);
  EXPECT_NEAR(v[0], 0.5, 1e-14);
  EXPECT_EQ(v[1], 0.0);
}

TEST(PolicyEvaluation, MatchesDiscountedMonteCarlo) {
  const TabularTask t = oracle::random_task(5, 2, 31, true);
  const double gamma = 0.9;
  const Matrix pol = uniform_policy(5, 2);
  const auto v = policy_evaluation_exact(t, pol, gamma);
  const Simulator sim(t);
  Rng rng(8);
  constexpr std::size_t kEpisodes = 100'000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t e = 0; e < kEpisodes; ++e) {
    std::size_t s = 0;
    double g = 0.0, disc = 1.0;
    for (int step = 0; step < 400; ++step) {
      const auto r = sim.step(s, uniform_index(rng, 0, 1), rng);
      g += disc * r.reward;
      disc *= gamma;
      s = r.next_state;
      if (r.terminal) break;
    }
    sum += g;
    sq += g * g;
  }
  const double mean = sum / kEpisodes;
  const double se = std::sqrt((sq / kEpisodes - mean * mean) / kEpisodes);
  EXPECT_NEAR(mean, v[0], 3 * se);
}

TEST(StationaryDistribution, PeriodicSwapAveragesToHalf) {
  Matrix k(2, 2);
  k(0, 1) = 1.0;
  k(1, 0) = 1.0;
  const auto sd = stationary_distribution(k);
  EXPECT_TRUE(sd.converged);
  EXPECT_NEAR(sd.probs[0], 0.5, 1e-12);
  EXPECT_NEAR(sd.probs[1], 0.5, 1e-12);
}

TEST(StationaryDistribution, IdentityKeepsUniformStart) {
  const auto sd = stationary_distribution(Matrix::identity(4));
  EXPECT_EQ(sd.residual, 0.0);
  for (double p : sd.probs) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(StationaryDistribution, PowerGthAndEigenvectorAgree) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const TabularTask t = sample_anymdp(AnyMdpConfig{}, seed).task;
    const Matrix k = connect_terminals(t);
    const auto power = stationary_distribution(k);
    const auto direct = stationary_distribution_direct(k);
    const Eigen::VectorXd eig = oracle::dominant_left_eigenvector(k);
    ASSERT_TRUE(power.converged);
    EXPECT_LE(power.residual, kDefaultSdTolerance);
    double total = 0.0;
    for (std::size_t s = 0; s < t.n_states; ++s) {
      EXPECT_NEAR(power.probs[s], eig(static_cast<long>(s)), 1e-8);
      EXPECT_NEAR(direct[s], eig(static_cast<long>(s)), 1e-10);
      EXPECT_GE(power.probs[s], 0.0);
      total += power.probs[s];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(StationaryDistribution, DirectSolveKeepsRelativeAccuracyInTheTail) {
  // Birth-death chain with ratio 1e-3 per step: p_j proportional to 1e-3^j.
  const std::size_t n = 40;
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n) k(i, i + 1) = 1e-3;
    if (i > 0) k(i, i - 1) = 1.0 - 1e-3;
    k(i, i) = 1.0 - (i + 1 < n ? 1e-3 : 0.0) - (i > 0 ? 1.0 - 1e-3 : 0.0);
  }
  const auto p = stationary_distribution_direct(k);
  for (std::size_t j = 1; j < n; ++j) EXPECT_NEAR(p[j] / p[j - 1], 1e-3 / (1 - 1e-3), 1e-12);
}

TEST(StationaryDistribution, UniqueClassHandlesTransientStates) {
  Matrix k(3, 3);
  k(0, 1) = 1.0;  // 0 is transient
  k(1, 2) = 1.0;
  k(2, 1) = 0.5;
  k(2, 2) = 0.5;
  const auto p = unique_stationary_distribution(k);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ((*p)[0], 0.0);
  EXPECT_NEAR((*p)[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR((*p)[2], 2.0 / 3.0, 1e-15);
  EXPECT_THROW(stationary_distribution_direct(k), std::domain_error);
}

TEST(StationaryDistribution, SeveralClosedClassesHaveNoUniqueAnswer) {
  EXPECT_FALSE(unique_stationary_distribution(Matrix::identity(3)).has_value());
}

TEST(NormalizedEntropy, ClosedForms) {
  EXPECT_NEAR(normalized_entropy(std::vector<double>(16, 1.0 / 16)), 1.0, 1e-15);
  EXPECT_EQ(normalized_entropy(std::vector<double>{0, 1, 0, 0}), 0.0);
  EXPECT_NEAR(normalized_entropy(std::vector<double>{0.5, 0.5, 0, 0}), 0.5, 1e-15);
  EXPECT_EQ(normalized_entropy(std::vector<double>{1.0}), 0.0);
}

}  // namespace
