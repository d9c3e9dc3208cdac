#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anymdp/core/rng.hpp"
#include "anymdp/core/task.hpp"
#include "anymdp/core/tensor.hpp"

namespace anymdp {

// Thrown when a sampler exhausts its resample budget. `stage` names the check
// that failed last: "kernel", "ergodicity", "decomposition", "ascending" or
// "entropy".
class GenerationError : public std::runtime_error {
 public:
  GenerationError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Magnitudes of the reward components. Their distributions are a free choice;
// all draws are uniform over the ranges below.
struct RewardScales {
  // Sorted state_span * U(0, 1)^state_exponent draws along the ranking,
  // shifted by -U(0, state_offset_max). Larger exponents concentrate reward
  // on the highest ranks.
  double state_span = 1.0;
  double state_exponent = 3.0;
  double state_offset_max = 0.0;
  // Pitfall terminals: the highest-ranked pitfall sits at or below
  // -U(pitfall_min, pitfall_max); the ranks below it move down with it.
  double pitfall_min = 0.5;
  double pitfall_max = 1.5;
  // Goal reward: max(top non-goal reward, 0) + U(goal_bonus_min, goal_bonus_max).
  double goal_bonus_min = 1.0;
  double goal_bonus_max = 3.0;
  // State-action costs are -U(0, sa_cost_max).
  double sa_cost_max = 0.2;
  // Potentials are U(-potential_max, potential_max).
  double potential_max = 0.3;
  // Raw reward means without composite structure: U(-raw_max, raw_max).
  double raw_max = 1.0;

  nlohmann::json to_json() const;
  static RewardScales from_json(const nlohmann::json& j);
};

struct AnyMdpConfig {
  std::size_t n_states = 16;
  std::size_t n_actions = 5;
  // Unset fields take their documented defaults in resolve().
  std::optional<std::size_t> band_up;    // max(1, floor(n/4)) for n >= 2
  std::optional<std::size_t> band_down;  // ceil(n/2)
  std::optional<double> eta;             // sampled U[eta_min, eta_max] per task
  double eta_min = 0.5;
  double eta_max = 0.95;
  double eps_forward = 1e-3;
  std::optional<std::size_t> reset_band;         // max(1, ceil(n/8))
  std::optional<std::size_t> ergodicity_power;   // 8 n
  double ergodicity_var_tol = 1e-6;
  double kappa = 0.5;
  double h0 = 0.2;
  std::size_t max_resamples = 256;
  // Inner retry budgets: weight draws per row, r^s draws per task attempt.
  std::size_t row_resamples = 64;
  std::size_t reward_resamples = 64;
  double reward_noise_scale = 0.1;
  double episode_cap_factor = 8.0;
  double discount = 0.994;
  RewardScales rewards;

  // Copy with every optional filled in (eta stays unset if it is to be sampled).
  AnyMdpConfig resolve() const;
  // Throws std::invalid_argument on violated invariants.
  void validate() const;
  nlohmann::json to_json() const;
  static AnyMdpConfig from_json(const nlohmann::json& j);
};

struct BandConstraints {
  std::size_t band_down = 0;
  std::size_t band_up = 0;
  double eta = 0.5;
  double eps = 1e-3;
};

struct ResampleCounts {
  std::size_t task_attempts = 0;
  std::size_t kernel_resamples = 0;
  std::size_t ergodicity_rejections = 0;
  std::size_t decomposition_rejections = 0;
  std::size_t reward_resamples = 0;
  std::size_t ascending_rejections = 0;
  std::size_t entropy_rejections = 0;

  nlohmann::json to_json() const;
};

struct ValidationReport {
  bool ergodic = false;
  bool band_ok = false;
  double ascending_margin = 0.0;
  double oracle_entropy = 0.0;
  bool accepted = false;
  double eta = 0.0;
  ResampleCounts resample_counts;

  nlohmann::json to_json() const;
};

struct SampledTask {
  TabularTask task;
  ValidationReport report;
};

// Banded average kernel in ranking order (row/column k = rank k). Support of
// row i is confined to [i - band_down, i + band_up]; mass below i exceeds eta
// when i >= band_down; mass above i exceeds eps when i < n - 1.
Matrix sample_banded_kernel(std::size_t n_states, const BandConstraints& band, Rng& rng);

// True iff the row-stochastic `kernel` (already rank-ordered) satisfies the
// band and row-sum constraints above.
bool satisfies_band(const Matrix& kernel, const BandConstraints& band);
bool row_satisfies_band(std::span<const double> row, std::size_t i, const BandConstraints& band);

// Mean over columns of the across-row variance of kernel^power.
double ergodicity_statistic(const Matrix& kernel, std::size_t power);
bool check_ergodicity(const Matrix& kernel, std::size_t power, double var_tol);

// Splits each row of `avg_kernel` over actions with Gaussian position weights
// centred at centers(i, k) with widths widths(i, k). Rows are rescaled by
// n_actions and renormalized per (state, action). No constraint checking.
Tensor3 decompose_with_weights(const Matrix& avg_kernel, const Matrix& centers,
                               const Matrix& widths);

// Samples centers in [i - band_down, i + band_up] and widths ~ Exp(1) clamped to
// [0.05, 10], re-drawing a row until its realized action-average satisfies
// `band`. Returns nullopt when some row exhausts `row_attempts`.
std::optional<Tensor3> decompose_actions(const Matrix& avg_kernel, std::size_t n_actions,
                                         const BandConstraints& band, Rng& rng,
                                         std::size_t row_attempts = 64);

// r^s along the ranking: nondecreasing, negative at pitfall terminals, the goal
// (if any) strictly largest.
std::vector<double> sample_state_reward(std::span<const std::size_t> ranking,
                                        std::span<const std::size_t> terminal_states,
                                        std::optional<std::size_t> goal_state,
                                        const RewardScales& scales, Rng& rng);

// mean[s][a][s'] = state_reward[s'] + sa_cost[s][a] + potential[s] - potential[s'].
RewardModel assemble_composite_reward(std::vector<double> state_reward, Matrix sa_cost,
                                      std::vector<double> potential, double noise_scale);

RewardModel sample_composite_reward(std::span<const std::size_t> ranking, std::size_t n_actions,
                                    std::span<const std::size_t> terminal_states,
                                    std::optional<std::size_t> goal_state, double noise_scale,
                                    const RewardScales& scales, Rng& rng);

// Arrival value of a state: V*(s) if non-terminal; for terminals the state
// reward r^s(s) (composite) or the mean entry reward over reachable (s, a)
// pairs (non-composite).
double arrival_value(const TabularTask& task, std::span<const double> v_star, std::size_t state);

// W(top) - max_{s in S_0} V*(s) - kappa.
double ascending_margin(const TabularTask& task, std::span<const double> v_star, double kappa);

// Full AnyMDP pipeline; deterministic given (config, seed). Throws
// GenerationError when max_resamples is exhausted.
SampledTask sample_anymdp(const AnyMdpConfig& config, std::uint64_t seed);

// Same pipeline with reward means drawn independently per (s, a, s').
SampledTask sample_anymdp_no_cr(const AnyMdpConfig& config, std::uint64_t seed);

}  // namespace anymdp
