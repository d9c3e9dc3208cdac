#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anymdp/agents/agents.hpp"
#include "anymdp/core/rng.hpp"
#include "anymdp/core/simulator.hpp"
#include "anymdp/core/task.hpp"

namespace anymdp {

struct EpisodeResult {
  double total_reward = 0.0;
  std::size_t steps = 0;
  bool terminated = false;
};

enum class EpisodeMode { train, test };

// One episode from a reset state until a terminal state or the episode cap.
// Train mode calls begin_episode/act/observe; test mode uses evaluate() only.
EpisodeResult run_episode(const Simulator& sim, Agent& agent, Rng& rng, EpisodeMode mode);

struct Baselines {
  double r_min = 0.0;
  double r_max = 0.0;
  double se_min = 0.0;
  double se_max = 0.0;
  std::size_t n_episodes = 0;
  bool degenerate = false;

  nlohmann::json to_json() const;
};

// Monte Carlo undiscounted capped returns of the reference oracle (r_max) and
// the uniform random policy (r_min). Degenerate when r_max - r_min does not
// exceed twice the combined standard error.
Baselines estimate_baselines(const TabularTask& task, std::size_t n_episodes, Rng& rng,
                             const OracleSet* oracles = nullptr);

// Expected undiscounted return over the first `cap` steps from the reset
// distribution, by backward induction.
double expected_capped_return(const TabularTask& task, const Matrix& policy, std::size_t cap);

// Baselines from expected_capped_return; standard errors are zero.
Baselines exact_baselines(const TabularTask& task, const OracleSet* oracles = nullptr);

// (r - r_min) / (r_max - r_min). Throws std::domain_error on degenerate baselines.
double normalized_score(double r, double r_min, double r_max);
double normalized_score(double r, const Baselines& b);

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 s / sqrt(n)
  std::size_t n = 0;
  bool ci_defined = false;  // false when n < 2
};

MeanCi aggregate_ci(std::span<const double> values);

// d_t = 1 - L_t / L_0. Throws std::domain_error when L_0 is not positive.
std::vector<double> icl_gain(std::span<const double> losses);

struct EvalProtocol {
  std::size_t train_episodes = 10000;
  std::size_t eval_every = 100;
  std::size_t test_episodes = 5;

  nlohmann::json to_json() const;
};

struct LearningCurve {
  std::uint64_t task_seed = 0;
  std::string agent_id;
  nlohmann::json hyperparameters;
  // Per training episode.
  std::vector<double> train_returns;
  std::vector<std::size_t> cumulative_steps;
  // Per evaluation point; the first is taken before any training.
  std::vector<std::size_t> eval_episodes;
  std::vector<std::size_t> eval_steps;
  std::vector<double> test_returns;  // mean over the test episodes
  std::vector<double> normalized;    // normalized test_returns
  std::size_t budget = 0;

  // Best normalized score over evaluation points.
  double best_normalized() const;
  // Training episodes (resp. steps) before the first evaluation point with a
  // normalized score >= level; nullopt if never reached.
  std::optional<std::size_t> episodes_to(double level) const;
  std::optional<std::size_t> steps_to(double level) const;
  // episodes_to(level), censored at the budget.
  std::size_t episodes_to_censored(double level) const;
  // episodes_to(fraction * best_normalized()).
  std::optional<std::size_t> episodes_to_fraction_of_best(double fraction) const;
};

// Interleaves training episodes with frozen-policy test episodes. Throws
// std::runtime_error if the agent's values become non-finite.
LearningCurve run_learner(const TabularTask& task, Agent& agent, const Baselines& baselines,
                          const EvalProtocol& protocol, Rng& rng);

}  // namespace anymdp
