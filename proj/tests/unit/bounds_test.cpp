#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "anymdp/core/solvers.hpp"
#include "anymdp/eval/bounds.hpp"
#include "anymdp/samplers/anymdp.hpp"
#include "anymdp/samplers/baselines.hpp"
#include "oracles.hpp"

namespace {

using namespace anymdp;

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

TEST(WorstCaseKernels, InteriorRowsHaveTwoEntries) {
  const auto k = build_worst_case_kernels(16, 0.9, 1e-3, 2, 3);
  for (std::size_t i = 0; i < 16; ++i) {
    double sp = 0.0, sm = 0.0;
    for (std::size_t j = 0; j < 16; ++j) {
      sp += k.plus(i, j);
      sm += k.minus(i, j);
    }
    EXPECT_NEAR(sp, 1.0, 1e-15);
    EXPECT_NEAR(sm, 1.0, 1e-15);
  }
  for (std::size_t i = 1; i + 2 < 16; ++i) {
    int nonzero = 0;
    for (std::size_t j = 0; j < 16; ++j) nonzero += k.plus(i, j) != 0.0;
    EXPECT_EQ(nonzero, 2);
    EXPECT_EQ(k.plus(i, i - 1), 0.9);
    EXPECT_NEAR(k.plus(i, i + 2), 0.1, 1e-15);
  }
  for (std::size_t i = 3; i + 1 < 16; ++i) {
    EXPECT_NEAR(k.minus(i, i - 3), 1.0 - 1e-3, 1e-15);
    EXPECT_EQ(k.minus(i, i + 1), 1e-3);
  }
  // Boundary mass stays at the nearest in-range state.
  EXPECT_EQ(k.plus(0, 0), 0.9);
  EXPECT_NEAR(k.plus(15, 15), 0.1, 1e-15);
  EXPECT_NEAR(k.minus(0, 0), 1.0 - 1e-3, 1e-15);
  EXPECT_EQ(k.minus(15, 15), 1e-3);
}

TEST(WorstCaseKernels, InadmissibleEtaIsRejectedWithReason) {
  EXPECT_FALSE(decay_admissible(0.6, 2));
  EXPECT_TRUE(decay_admissible(0.7, 2));
  try {
    build_worst_case_kernels(16, 0.6, 1e-3, 2, 2);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("eta > b_+/(b_+ + 1)"), std::string::npos);
  }
  EXPECT_NO_THROW(build_worst_case_kernels_unchecked(16, 0.6, 1e-3, 2, 2));
  EXPECT_THROW(build_worst_case_kernels(1, 0.9, 1e-3, 1, 1), std::invalid_argument);
  EXPECT_THROW(build_worst_case_kernels(8, 0.9, 0.0, 1, 1), std::invalid_argument);
}

TEST(WorstCaseKernels, PlusRecurrenceHoldsOnAdmissibleGrid) {
  for (std::size_t n : {16, 64})
    for (double eta : {0.7, 0.8, 0.9, 0.95})
      for (std::size_t bu : {1, 2, 4}) {
        if (!decay_admissible(eta, bu)) continue;
        const auto k = build_worst_case_kernels(n, eta, 1e-3, bu, 2);
        const auto p = stationary_distribution_direct(k.plus);
        const auto rec = check_plus_recurrence(p, eta, bu);
        EXPECT_LE(rec.max_abs_residual, 1e-10) << n << " " << eta << " " << bu;
        EXPECT_EQ(rec.first, bu);
        EXPECT_EQ(rec.last, n - 2);
        // The eigenvector oracle satisfies the same balance.
        const auto q = to_vector(oracle::dominant_left_eigenvector(k.plus));
        EXPECT_LE(check_plus_recurrence(q, eta, bu).max_abs_residual, 1e-10);
      }
}

TEST(WorstCaseKernels, PlusRecurrenceDetectsAWrongVector) {
  const auto k = build_worst_case_kernels(16, 0.9, 1e-3, 2, 2);
  auto p = stationary_distribution_direct(k.plus);
  p[7] *= 1.01;
  EXPECT_GT(check_plus_recurrence(p, 0.9, 2).max_abs_residual, 1e-6);
}

TEST(WorstCaseKernels, MinusRatiosNeverFallBelowEps) {
  for (std::size_t n : {16, 64})
    for (double eps : {1e-3, 1e-2})
      for (std::size_t bd : {1, 2, 4}) {
        const auto k = build_worst_case_kernels(n, 0.9, eps, 2, bd);
        const auto r = check_minus_ratios(stationary_distribution_direct(k.minus), eps);
        EXPECT_TRUE(r.pass) << n << " " << eps << " " << bd << " min=" << r.min_ratio;
        EXPECT_EQ(r.bound, eps);
      }
}

TEST(WorstCaseKernels, RatioCheckFlagsSteepDecay) {
  const std::vector<double> p = {1.0, 1e-2, 1e-5};
  const auto r = check_minus_ratios(p, 1e-2);
  EXPECT_FALSE(r.pass);
  EXPECT_NEAR(r.min_ratio, 1e-3, 1e-15);
}

TEST(SlopeFit, ExactGeometricProfile) {
  std::vector<double> p(20);
  for (std::size_t j = 0; j < 20; ++j) p[j] = 3.0 * std::pow(0.5, static_cast<double>(j));
  const SlopeFit f = fit_log_slope(p, 2, 19);
  EXPECT_NEAR(f.slope, std::log(0.5), 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-10);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_NEAR(f.stderr_slope, 0.0, 1e-10);
  EXPECT_EQ(f.n_points, 18u);
  EXPECT_THROW(fit_log_slope(p, 3, 3), std::invalid_argument);
}

TEST(SlopeFit, SkipsEntriesBelowFloor) {
  const std::vector<double> p = {1.0, 0.1, 1e-20, 0.001};
  EXPECT_EQ(fit_log_slope(p, 0, 3).n_points, 3u);
}

TEST(SdLogRange, ClosedForm) {
  const std::vector<double> p = {0.5, 0.25, 0.125, 0.125};
  EXPECT_NEAR(sd_log_range(p), std::log(4.0), 1e-15);
}

TEST(SdRankOrder, FollowsRanking) {
  const TabularTask t = sample_anymdp(AnyMdpConfig{}, 2).task;
  const auto ranked = sd_in_rank_order(t);
  const auto p = stationary_distribution_direct(connect_terminals(t));
  for (std::size_t k = 0; k < t.n_states; ++k) EXPECT_NEAR(ranked[k], p[t.ranking[k]], 1e-15);
}

TEST(DecayBounds, PassMeansSlopeInsideIntervalWithinOneStandardError) {
  AnyMdpConfig cfg;
  cfg.n_states = 32;
  cfg.eta = 0.9;
  const AnyMdpConfig r = cfg.resolve();
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const TabularTask t = sample_anymdp(cfg, seed).task;
    const auto res = check_decay_bounds(sd_in_rank_order(t), 0.9, cfg.eps_forward, *r.band_up, *r.band_down,
                                        *r.reset_band);
    EXPECT_EQ(res.b, std::max(*r.band_down, *r.reset_band) + *r.band_up);
    EXPECT_EQ(res.admissible, decay_admissible(0.9, *r.band_up));
    EXPECT_NEAR(res.lower, std::log(cfg.eps_forward), 1e-15);
    EXPECT_GT(res.delta, 0.0);
    EXPECT_LT(res.delta, 1.0 / static_cast<double>(*r.band_up + 1));
    const bool inside =
        res.slope >= res.lower - res.stderr_slope && res.slope <= res.upper + res.stderr_slope;
    if (res.pass) EXPECT_TRUE(inside);
    EXPECT_FALSE(res.to_json().empty());
  }
}

TEST(SdComparison, AnyMdpSpreadsWiderThanGarnet) {
  std::size_t wins = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    AnyMdpConfig a;
    a.n_states = 64;
    GarnetConfig g;
    g.n_states = 64;
    const double ra = sd_log_range(sd_in_rank_order(sample_anymdp(a, seed).task));
    const double rg = sd_log_range(sd_in_rank_order(sample_garnet(g, seed)));
    wins += ra > rg;
  }
  EXPECT_GE(wins, 7u);
}

}  // namespace
