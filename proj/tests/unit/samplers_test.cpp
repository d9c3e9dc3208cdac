#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>

#include "anymdp/core/rng.hpp"
#include "anymdp/core/simulator.hpp"
#include "anymdp/core/solvers.hpp"
#include "anymdp/samplers/anymdp.hpp"
#include "anymdp/samplers/audit.hpp"
#include "anymdp/samplers/baselines.hpp"

namespace {

using namespace anymdp;

// Largest |mean(s,a,s') - mean(s,0,s') - (mean(s,a,0) - mean(s,0,0))|. Zero
// exactly when the action effect does not depend on the next state, as in any
// composite reward.
double action_next_state_interaction(const TabularTask& t) {
  double worst = 0.0;
  for (std::size_t s = 0; s < t.n_states; ++s)
    for (std::size_t a = 1; a < t.n_actions; ++a)
      for (std::size_t j = 1; j < t.n_states; ++j) {
        const double d = t.reward.mean(s, a, j) - t.reward.mean(s, 0, j) -
                         (t.reward.mean(s, a, 0) - t.reward.mean(s, 0, 0));
        worst = std::max(worst, std::fabs(d));
      }
  return worst;
}

Matrix ranked_average_kernel(const TabularTask& t) {
  const Matrix m = average_kernel(t, uniform_policy(t.n_states, t.n_actions));
  Matrix out(t.n_states, t.n_states);
  for (std::size_t i = 0; i < t.n_states; ++i)
    for (std::size_t j = 0; j < t.n_states; ++j) out(i, j) = m(t.ranking[i], t.ranking[j]);
  return out;
}

TEST(BandedKernel, SatisfiesConstraintsAcrossSeedsAndSizes) {
  for (std::size_t n : {2, 3, 8, 16, 33}) {
    const BandConstraints band{std::max<std::size_t>(1, (n + 1) / 2), std::max<std::size_t>(1, n / 4), 0.7, 1e-3};
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Rng rng(derive_seed(seed, n));
      const Matrix k = sample_banded_kernel(n, band, rng);
      ASSERT_TRUE(satisfies_band(k, band)) << "n=" << n << " seed=" << seed;
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          EXPECT_GE(k(i, j), 0.0);
          if (j + band.band_down < i || j > i + band.band_up) EXPECT_EQ(k(i, j), 0.0);
          sum += k(i, j);
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
    }
  }
}

TEST(BandedKernel, BandCheckRejectsViolations) {
  const BandConstraints band{1, 1, 0.6, 1e-3};
  std::vector<double> row = {0.7, 0.2, 0.1};
  EXPECT_TRUE(row_satisfies_band(row, 1, band));
  row = {0.5, 0.4, 0.1};  // too little mass below
  EXPECT_FALSE(row_satisfies_band(row, 1, band));
  row = {0.7, 0.3, 0.0};  // nothing above
  EXPECT_FALSE(row_satisfies_band(row, 1, band));
  std::vector<double> wide = {0.6, 0.0, 0.3, 0.1};  // support outside the band
  EXPECT_FALSE(row_satisfies_band(wide, 2, band));
}

TEST(Ergodicity, StatisticSeparatesMixingFromReducible) {
  Matrix mix(2, 2, 0.5);
  EXPECT_TRUE(check_ergodicity(mix, 16, 1e-6));
  EXPECT_FALSE(check_ergodicity(Matrix::identity(3), 16, 1e-6));
}

TEST(CompositeReward, AssemblyFormula) {
  Matrix cost(2, 1);
  cost(0, 0) = -0.1;
  cost(1, 0) = -0.2;
  const RewardModel r = assemble_composite_reward({0.0, 1.0}, cost, {0.3, -0.3}, 0.1);
  EXPECT_TRUE(r.composite);
  EXPECT_NEAR(r.mean(0, 0, 1), 1.0 - 0.1 + 0.3 + 0.3, 1e-15);
  EXPECT_NEAR(r.mean(1, 0, 0), 0.0 - 0.2 - 0.3 - 0.3, 1e-15);
}

TEST(AnyMdpSampler, DeterministicGivenSeed) {
  const auto a = sample_anymdp(AnyMdpConfig{}, 17);
  const auto b = sample_anymdp(AnyMdpConfig{}, 17);
  const auto c = sample_anymdp(AnyMdpConfig{}, 18);
  EXPECT_EQ(a.task, b.task);
  EXPECT_FALSE(a.task == c.task);
}

TEST(AnyMdpSampler, AcceptedTasksPassIndependentAudit) {
  std::size_t audited = 0;
  for (std::size_t n : {4, 16, 32}) {
    AnyMdpConfig cfg;
    cfg.n_states = n;
    cfg.n_actions = n == 4 ? 2 : 5;
    for (std::uint64_t seed = 0; seed < (n == 32 ? 8u : 28u); ++seed) {
      const SampledTask st = sample_anymdp(cfg, derive_seed(99, seed));
      EXPECT_TRUE(st.report.accepted);
      const AuditReport audit = audit_anymdp_task(st.task);
      EXPECT_TRUE(audit.pass()) << "n=" << n << " seed=" << seed << ": " << audit.first_failure;
      EXPECT_GT(audit.margin, 0.0);
      EXPECT_GT(audit.entropy, cfg.h0);
      EXPECT_NEAR(audit.entropy, st.report.oracle_entropy, 1e-6);
      ++audited;
    }
  }
  EXPECT_EQ(audited, 64u);
}

TEST(AnyMdpSampler, StructuralInvariants) {
  const AnyMdpConfig cfg = AnyMdpConfig{}.resolve();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SampledTask st = sample_anymdp(cfg, seed);
    const TabularTask& t = st.task;
    EXPECT_NO_THROW(validate_task(t));
    EXPECT_EQ(t.generator, GeneratorId::anymdp);
    EXPECT_TRUE(t.reward.composite);
    EXPECT_EQ(t.episode_cap, static_cast<std::size_t>(cfg.episode_cap_factor * cfg.n_states));
    const auto rank = rank_of(t);
    for (std::size_t s : t.reset_states) EXPECT_LT(rank[s], *cfg.reset_band);
    const double eta = t.config.at("eta").get<double>();
    EXPECT_GE(eta, cfg.eta_min);
    EXPECT_LE(eta, cfg.eta_max);
    const BandConstraints band{*cfg.band_down, *cfg.band_up, eta, cfg.eps_forward};
    EXPECT_TRUE(satisfies_band(ranked_average_kernel(t), band));
    for (std::size_t k = 1; k < t.n_states; ++k)
      EXPECT_LE(t.reward.state_reward[t.ranking[k - 1]], t.reward.state_reward[t.ranking[k]]);
    EXPECT_LT(action_next_state_interaction(t), 1e-12);
  }
}

TEST(AnyMdpSampler, FixedEtaIsRecorded) {
  AnyMdpConfig cfg;
  cfg.eta = 0.8;
  const SampledTask st = sample_anymdp(cfg, 4);
  EXPECT_EQ(st.task.config.at("eta").get<double>(), 0.8);
  EXPECT_EQ(st.report.eta, 0.8);
}

TEST(AnyMdpSampler, BanditIsAccepted) {
  AnyMdpConfig cfg;
  cfg.n_states = 1;
  cfg.n_actions = 4;
  const SampledTask st = sample_anymdp(cfg, 2);
  EXPECT_EQ(st.task.n_states, 1u);
  EXPECT_TRUE(st.report.accepted);
  EXPECT_TRUE(audit_anymdp_task(st.task).pass());
}

TEST(AnyMdpSampler, RejectsInvalidConfig) {
  AnyMdpConfig cfg;
  cfg.n_actions = 0;
  EXPECT_THROW(sample_anymdp(cfg, 0), std::invalid_argument);
  cfg = AnyMdpConfig{};
  cfg.eta_min = 0.9;
  cfg.eta_max = 0.5;
  EXPECT_THROW(sample_anymdp(cfg, 0), std::invalid_argument);
}

TEST(AnyMdpSampler, ExhaustedBudgetNamesStage) {
  AnyMdpConfig cfg;
  cfg.h0 = 0.999;  // practically unattainable entropy
  cfg.max_resamples = 3;
  try {
    sample_anymdp(cfg, 1);
    FAIL() << "expected GenerationError";
  } catch (const GenerationError& e) {
    EXPECT_FALSE(e.stage().empty());
  }
}

TEST(AnyMdpSampler, ConfigJsonRoundTrip) {
  AnyMdpConfig cfg;
  cfg.n_states = 24;
  cfg.eta = 0.75;
  cfg.rewards.goal_bonus_max = 5.0;
  const AnyMdpConfig back = AnyMdpConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
}

TEST(NoCompositeSampler, RewardsAreNotDecomposable) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SampledTask st = sample_anymdp_no_cr(AnyMdpConfig{}, seed);
    EXPECT_EQ(st.task.generator, GeneratorId::anymdp_no_cr);
    EXPECT_FALSE(st.task.reward.composite);
    EXPECT_GT(action_next_state_interaction(st.task), 1e-3);
    EXPECT_TRUE(audit_anymdp_task(st.task).pass());
  }
}

TEST(Garnet, BranchingSupportAndIdentityRanking) {
  GarnetConfig cfg;
  cfg.n_states = 12;
  cfg.n_actions = 3;
  cfg.branching = 2;
  const TabularTask t = sample_garnet(cfg, 5);
  EXPECT_NO_THROW(validate_task(t));
  EXPECT_TRUE(t.terminal_states.empty());
  for (std::size_t s = 0; s < t.n_states; ++s) {
    EXPECT_EQ(t.ranking[s], s);
    for (std::size_t a = 0; a < t.n_actions; ++a) {
      const auto row = t.transition.row(s, a);
      EXPECT_EQ(std::count_if(row.begin(), row.end(), [](double p) { return p > 0.0; }), 2);
    }
  }
  EXPECT_EQ(t.reset_states, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(sample_garnet(cfg, 5), t);
}

TEST(Garnet, RejectsBranchingAboveStateCount) {
  GarnetConfig cfg;
  cfg.n_states = 4;
  cfg.branching = 5;
  EXPECT_THROW(sample_garnet(cfg, 0), std::invalid_argument);
}

// Undiscounted return of the greedy optimal policy over one capped episode.
double optimal_episode_return(const TabularTask& t) {
  const auto pi = greedy_actions(value_iteration(t, t.discount_default).q_star);
  const Simulator sim(t);
  Rng rng(0);
  std::size_t s = sim.reset(rng);
  double g = 0.0;
  for (std::size_t k = 0; k < t.episode_cap; ++k) {
    const auto r = sim.step(s, pi[s], rng);
    g += r.reward;
    s = r.next_state;
  }
  return g;
}

TEST(DarkRoom, GeometryAndOptimalReturn) {
  DarkRoomConfig cfg;
  cfg.width = 6;
  cfg.height = 6;
  cfg.start = {1, 4};
  cfg.goal = {5, 0};
  cfg.episode_len = 20;
  const TabularTask t = build_darkroom(cfg);
  EXPECT_EQ(t.n_states, 36u);
  EXPECT_EQ(t.n_actions, kDarkRoomActions);
  EXPECT_EQ(t.ranking.back(), 5u);
  EXPECT_EQ(t.transition(0, 0, 0), 1.0);  // wall
  EXPECT_EQ(t.transition(0, 3, 1), 1.0);
  EXPECT_EQ(t.transition(0, 1, 6), 1.0);
  EXPECT_EQ(t.transition(7, 4, 7), 1.0);
  const double manhattan = 4 + 4;
  EXPECT_EQ(optimal_episode_return(t), 20 - manhattan);
}

TEST(DarkRoom, GoalAtStartCollectsEveryStep) {
  DarkRoomConfig cfg;
  cfg.width = 3;
  cfg.height = 3;
  cfg.start = {1, 1};
  cfg.goal = {1, 1};
  cfg.episode_len = 7;
  EXPECT_EQ(optimal_episode_return(build_darkroom(cfg)), 7.0);
}

}  // namespace
