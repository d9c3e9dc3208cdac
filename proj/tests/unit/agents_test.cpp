#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "anymdp/agents/agents.hpp"
#include "anymdp/core/simulator.hpp"
#include "anymdp/core/solvers.hpp"
#include "anymdp/eval/evaluation.hpp"
#include "anymdp/samplers/anymdp.hpp"
#include "oracles.hpp"

namespace {

using namespace anymdp;

TabularTask bandit(std::vector<double> means, std::size_t cap) {
  const std::size_t na = means.size();
  TabularTask t;
  t.n_states = 1;
  t.n_actions = na;
  t.transition = Tensor3(1, na, 1.0);
  t.reward.mean = Tensor3(1, na);
  t.reward.noise_std = Tensor3(1, na, 0.1);
  for (std::size_t a = 0; a < na; ++a) t.reward.mean(0, a, 0) = means[a];
  t.reset_states = {0};
  t.reset_probs = {1.0};
  t.ranking = {0};
  t.episode_cap = cap;
  return t;
}

// States 0..n-1 in a line, n-1 terminal. Action 0 advances at a cost of 0.1,
// entering the end pays `prize`; action 1 stays put for free.
TabularTask delayed_reward_chain(std::size_t n, double prize) {
  TabularTask t;
  t.n_states = n;
  t.n_actions = 2;
  t.transition = Tensor3(n, 2);
  t.reward.mean = Tensor3(n, 2);
  t.reward.noise_std = Tensor3(n, 2);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t next = std::min(s + 1, n - 1);
    t.transition(s, 0, next) = 1.0;
    t.transition(s, 1, s) = 1.0;
    t.reward.mean(s, 0, next) = next == n - 1 ? prize : -0.1;
  }
  t.reset_states = {0};
  t.reset_probs = {1.0};
  t.terminal_states = {n - 1};
  for (std::size_t s = 0; s < n; ++s) t.ranking.push_back(s);
  t.episode_cap = 8 * n;
  return t;
}

TEST(RandomAgent, ActionFrequenciesAreUniform) {
  RandomAgent agent(5);
  Rng rng(1);
  constexpr std::size_t kDraws = 100'000;
  std::vector<double> count(5, 0.0);
  for (std::size_t k = 0; k < kDraws; ++k) {
    const Decision d = agent.act(0, rng);
    ASSERT_LT(d.action, 5u);
    EXPECT_EQ(d.tag, PolicyTag::random);
    ++count[d.action];
  }
  const double p = 0.2, sigma = std::sqrt(kDraws * p * (1 - p));
  for (double c : count) EXPECT_NEAR(c, kDraws * p, 3 * sigma);
}

TEST(OracleAgent, TagsFollowDiscount) {
  EXPECT_EQ(oracle_tag(0.0), PolicyTag::greedy);
  EXPECT_EQ(oracle_tag(0.5), PolicyTag::myopic);
  EXPECT_EQ(oracle_tag(0.93), PolicyTag::short_term);
  EXPECT_EQ(oracle_tag(0.994), PolicyTag::oracle);
  EXPECT_THROW(oracle_tag(0.7), std::invalid_argument);
}

TEST(OracleAgent, GammaZeroIsImmediateArgmax) {
  const TabularTask t = oracle::random_task(6, 4, 10, false);
  const auto pi = oracle_actions(t, 0.0);
  const Matrix r = expected_reward(t);
  for (std::size_t s = 0; s < t.n_states; ++s)
    for (std::size_t a = 0; a < t.n_actions; ++a) EXPECT_LE(r(s, a), r(s, pi[s]));
}

TEST(OracleAgent, AllDiscountsAgreeWhenImmediateAndLongRunCoincide) {
  // Both actions end the episode; action 0 pays more.
  TabularTask t = delayed_reward_chain(2, 1.0);
  t.transition(0, 1, 0) = 0.0;
  t.transition(0, 1, 1) = 1.0;
  const OracleSet o = compute_oracles(t);
  for (const auto& actions : o.actions) EXPECT_EQ(actions[0], 0u);
}

TEST(OracleAgent, DelayedRewardSplitsMyopicAndFarsighted) {
  const TabularTask t = delayed_reward_chain(5, 10.0);
  const OracleSet o = compute_oracles(t);
  EXPECT_EQ(o.actions[0][0], 1u);
  EXPECT_EQ(o.actions[3][0], 0u);
  EXPECT_EQ(o.reference.q_star(0, 0) > o.reference.q_star(0, 1), true);
}

TEST(OracleAgent, ActsOnItsTable) {
  OracleAgent agent({2, 0, 1}, PolicyTag::short_term);
  Rng rng(0);
  for (std::size_t s = 0; s < 3; ++s) {
    const Decision d = agent.act(s, rng);
    EXPECT_EQ(d.action, (std::vector<std::size_t>{2, 0, 1})[s]);
    EXPECT_EQ(d.tag, PolicyTag::short_term);
    EXPECT_EQ(agent.evaluate(s, rng), d.action);
  }
}

TEST(PerturbedOracle, ScheduleExtremes) {
  const std::vector<std::size_t> table = {1, 1, 1};
  Rng rng(3);
  PerturbedOracleAgent always(table, 4, {1.0, 1.0});
  PerturbedOracleAgent never(table, 4, {0.0, 0.99});
  for (int episode = 0; episode < 5; ++episode) {
    always.begin_episode(rng);
    never.begin_episode(rng);
    for (std::size_t k = 0; k < 100; ++k) {
      EXPECT_EQ(always.act(k % 3, rng).tag, PolicyTag::random);
      const Decision d = never.act(k % 3, rng);
      EXPECT_EQ(d.tag, PolicyTag::oracle);
      EXPECT_EQ(d.action, 1u);
    }
  }
}

TEST(PerturbedOracle, EpsilonDecaysPerEpisode) {
  PerturbedOracleAgent agent({0}, 3, {0.8, 0.5});
  Rng rng(0);
  agent.begin_episode(rng);
  EXPECT_DOUBLE_EQ(agent.epsilon(), 0.8);
  agent.begin_episode(rng);
  EXPECT_DOUBLE_EQ(agent.epsilon(), 0.4);
  agent.begin_episode(rng);
  EXPECT_DOUBLE_EQ(agent.epsilon(), 0.2);
  agent.reset();
  agent.begin_episode(rng);
  EXPECT_DOUBLE_EQ(agent.epsilon(), 0.8);
}

TEST(PerturbedOracle, RandomBranchTagMatchesAction) {
  // With a table that always says 0, any other action must come from the
  // random branch; the random branch may also pick 0.
  PerturbedOracleAgent agent({0}, 4, {0.5, 1.0});
  Rng rng(11);
  agent.begin_episode(rng);
  std::size_t random_steps = 0;
  for (int k = 0; k < 10000; ++k) {
    const Decision d = agent.act(0, rng);
    if (d.action != 0) EXPECT_EQ(d.tag, PolicyTag::random);
    random_steps += d.tag == PolicyTag::random;
  }
  EXPECT_NEAR(random_steps / 10000.0, 0.5, 0.03);
}

TEST(TqlUcb, BonusIsNonnegativeAndNonincreasing) {
  TqlUcbConfig cfg;
  cfg.c = 0.5;
  const TqlUcbAgent agent(4, 2, 20, cfg);
  double prev = agent.bonus(1);
  EXPECT_NEAR(prev, 0.5 * std::sqrt(20.0), 1e-12);
  for (std::size_t t = 2; t < 500; ++t) {
    const double b = agent.bonus(t);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, prev);
    prev = b;
  }
}

TEST(TqlUcb, FindsTheBetterBanditArm) {
  const TabularTask t = bandit({1.0, 0.0}, 10);
  const Simulator sim(t);
  TqlUcbConfig cfg;
  cfg.c = 0.1;
  TqlUcbAgent agent(1, 2, t.episode_cap, cfg);
  Rng rng(4);
  std::size_t steps = 0, best = 0;
  while (steps < 10'000) {
    agent.begin_episode(rng);
    for (std::size_t k = 0; k < t.episode_cap; ++k, ++steps) {
      const Decision d = agent.act(0, rng);
      EXPECT_EQ(d.tag, PolicyTag::q_learner);
      best += d.action == 0;
      const StepResult r = sim.step(0, d.action, rng);
      agent.observe({0, d.action, r.reward, r.next_state, r.terminal});
    }
  }
  EXPECT_GT(static_cast<double>(best) / steps, 0.95);
  for (double q : agent.q().data()) EXPECT_TRUE(std::isfinite(q));
}

TEST(TqlUcb, ResetRestoresInitialTable) {
  TqlUcbAgent agent(2, 2, 5);
  agent.observe({0, 1, 1.0, 1, false});
  EXPECT_EQ(agent.visits(0, 1), 1u);
  agent.reset();
  EXPECT_EQ(agent.visits(0, 1), 0u);
  EXPECT_EQ(agent.q()(0, 1), 5.0);
}

TEST(ModelBased, TransitionEstimateConvergesUnderUniformPolicy) {
  const TabularTask t = oracle::random_task(4, 3, 21, false);
  const Simulator sim(t);
  ModelBasedAgent agent(4, 3);
  Rng rng(2);
  std::size_t s = 0;
  for (std::size_t k = 0; k < 100'000; ++k) {
    const std::size_t a = uniform_index(rng, 0, 2);
    const StepResult r = sim.step(s, a, rng);
    agent.observe({s, a, r.reward, r.next_state, r.terminal});
    s = r.next_state;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t j = 0; j < 4; ++j)
        worst = std::max(worst, std::fabs(agent.transition_estimate(i, a, j) - t.transition(i, a, j)));
  EXPECT_LE(worst, 0.02);
}

TEST(ModelBased, PlanConvergesToOraclePolicy) {
  const TabularTask t = oracle::random_task(4, 3, 23, true);
  ModelBasedConfig cfg;
  cfg.vi_tol = 1e-10;
  const auto truth = oracle_actions(t, cfg.gamma);
  const auto q = value_iteration(t, cfg.gamma).q_star;
  double gap = 1e9;
  for (std::size_t s = 0; s + 1 < t.n_states; ++s)
    for (std::size_t a = 0; a < t.n_actions; ++a)
      if (a != truth[s]) gap = std::min(gap, q(s, truth[s]) - q(s, a));
  ASSERT_GT(gap, 0.05) << "test task must have a clear optimum";

  const Simulator sim(t);
  ModelBasedAgent agent(4, 3, cfg);
  Rng rng(6);
  std::size_t s = 0;
  for (std::size_t k = 0; k < 1'000'000; ++k) {
    const std::size_t a = uniform_index(rng, 0, 2);
    const StepResult r = sim.step(s, a, rng);
    agent.observe({s, a, r.reward, r.next_state, r.terminal});
    s = r.terminal ? sim.reset(rng) : r.next_state;
  }
  agent.replan();
  for (std::size_t st = 0; st + 1 < t.n_states; ++st) EXPECT_EQ(agent.evaluate(st, rng), truth[st]);
}

TEST(ModelBased, EpsilonDecaysToFloor) {
  ModelBasedConfig cfg;
  cfg.eps_decay = 0.5;
  ModelBasedAgent agent(2, 2, cfg);
  Rng rng(0);
  for (int k = 0; k < 20; ++k) agent.begin_episode(rng);
  EXPECT_DOUBLE_EQ(agent.epsilon(), cfg.eps_end);
}

TEST(AgentFactory, EveryKindActsWithinRange) {
  const TabularTask t = sample_anymdp(AnyMdpConfig{}, 8).task;
  const OracleSet oracles = compute_oracles(t);
  const Simulator sim(t);
  for (const AgentSpec& spec : default_behavior_pool()) {
    auto agent = make_agent(spec, t, &oracles);
    Rng rng(1);
    for (int e = 0; e < 3; ++e) run_episode(sim, *agent, rng, EpisodeMode::train);
    for (std::size_t s = 0; s < t.n_states; ++s) {
      EXPECT_LT(agent->act(s, rng).action, t.n_actions);
      EXPECT_LT(agent->evaluate(s, rng), t.n_actions);
    }
  }
}

TEST(AgentFactory, SpecJsonRoundTrip) {
  for (const AgentSpec& spec : default_behavior_pool())
    EXPECT_EQ(AgentSpec::from_json(spec.to_json()).to_json(), spec.to_json());
  EXPECT_THROW(agent_kind_from_string("ppo"), std::invalid_argument);
}

}  // namespace
