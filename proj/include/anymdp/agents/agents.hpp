#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "anymdp/core/rng.hpp"
#include "anymdp/core/solvers.hpp"
#include "anymdp/core/task.hpp"

namespace anymdp {

enum class PolicyTag : std::uint8_t {
  greedy = 0,       // oracle at gamma = 0
  myopic = 1,       // oracle at gamma = 0.5
  short_term = 2,   // oracle at gamma = 0.93
  oracle = 3,       // oracle at the reference discount
  model_based = 4,
  q_learner = 5,
  random = 6,       // includes the random branch of the perturbed oracle
  unknown = 7,
};

inline constexpr std::array<double, 4> kOracleDiscounts = {0.0, 0.5, 0.93, 0.994};
inline constexpr double kReferenceDiscount = 0.994;

struct Decision {
  std::size_t action = 0;
  PolicyTag tag = PolicyTag::unknown;
};

struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool terminal = false;
};

// A behavior policy. act() never returns the terminal marker n_actions.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string_view name() const = 0;
  // Called before the first step of every episode.
  virtual void begin_episode(Rng& /*rng*/) {}
  virtual Decision act(std::size_t state, Rng& rng) = 0;
  // Action of the frozen policy, without exploration.
  virtual std::size_t evaluate(std::size_t state, Rng& rng) const = 0;
  virtual void observe(const Transition& /*t*/) {}
  // Drops all learned state.
  virtual void reset() {}
};

// Greedy actions of the four tabulated oracles plus the reference solution.
struct OracleSet {
  std::array<std::vector<std::size_t>, 4> actions;
  ValueSolution reference;  // at kReferenceDiscount
};

// Solves the task at every discount in kOracleDiscounts. Throws
// std::runtime_error if value iteration does not converge.
OracleSet compute_oracles(const TabularTask& task, const ViOptions& options = {});

// Greedy deterministic policy of value_iteration(task, gamma).
std::vector<std::size_t> oracle_actions(const TabularTask& task, double gamma,
                                        const ViOptions& options = {});

class RandomAgent final : public Agent {
 public:
  explicit RandomAgent(std::size_t n_actions);
  std::string_view name() const override { return "random"; }
  Decision act(std::size_t state, Rng& rng) override;
  std::size_t evaluate(std::size_t state, Rng& rng) const override;

 private:
  std::size_t n_actions_;
};

class OracleAgent final : public Agent {
 public:
  OracleAgent(std::vector<std::size_t> actions, PolicyTag tag);
  std::string_view name() const override { return "oracle"; }
  Decision act(std::size_t state, Rng& rng) override;
  std::size_t evaluate(std::size_t state, Rng& rng) const override;

 private:
  std::vector<std::size_t> actions_;
  PolicyTag tag_;
};

// Tag for the oracle solved at gamma; throws std::invalid_argument if gamma is
// not one of kOracleDiscounts.
PolicyTag oracle_tag(double gamma);

struct PerturbedOracleConfig {
  double eps0 = 1.0;
  double decay = 0.99;
};

// Reference oracle whose action is replaced by a uniform one with probability
// eps0 * decay^k in its k-th episode (k counts from 0).
class PerturbedOracleAgent final : public Agent {
 public:
  PerturbedOracleAgent(std::vector<std::size_t> actions, std::size_t n_actions,
                       PerturbedOracleConfig config = {});
  std::string_view name() const override { return "perturbed_oracle"; }
  void begin_episode(Rng& rng) override;
  Decision act(std::size_t state, Rng& rng) override;
  std::size_t evaluate(std::size_t state, Rng& rng) const override;
  void reset() override;
  double epsilon() const { return eps_; }

 private:
  std::vector<std::size_t> actions_;
  std::size_t n_actions_;
  PerturbedOracleConfig config_;
  std::size_t episodes_ = 0;
  double eps_;
};

enum class AlphaScheme { hoeffding, constant };

struct TqlUcbConfig {
  // Horizon H; 0 means the task's episode cap.
  std::size_t horizon = 0;
  double c = 1.0;
  AlphaScheme alpha_scheme = AlphaScheme::hoeffding;
  double alpha = 0.1;  // used by AlphaScheme::constant
  double gamma = 0.99;
  // Initial Q-value; unset means the horizon H (optimistic for rewards <= 1).
  std::optional<double> q_init;

  nlohmann::json to_json() const;
  static TqlUcbConfig from_json(const nlohmann::json& j);
};

// Tabular Q-learning with an upper-confidence bonus c * sqrt(H / t) added to
// the target, where t counts visits of (s, a). Acts greedily on Q.
class TqlUcbAgent final : public Agent {
 public:
  TqlUcbAgent(std::size_t n_states, std::size_t n_actions, std::size_t episode_cap,
              TqlUcbConfig config = {});
  std::string_view name() const override { return "tql_ucb"; }
  Decision act(std::size_t state, Rng& rng) override;
  std::size_t evaluate(std::size_t state, Rng& rng) const override;
  void observe(const Transition& t) override;
  void reset() override;

  double bonus(std::size_t visits) const;
  const Matrix& q() const { return q_; }
  std::size_t visits(std::size_t s, std::size_t a) const { return counts_[s * n_actions_ + a]; }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::size_t horizon_;
  TqlUcbConfig config_;
  double q_init_;
  Matrix q_;
  std::vector<std::size_t> counts_;
};

struct ModelBasedConfig {
  double gamma = 0.99;
  double prior_count = 1.0;  // Laplace pseudo-count per successor
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay = 0.95;   // per episode
  double vi_tol = 1e-6;
  std::size_t vi_max_iters = 5000;

  nlohmann::json to_json() const;
  static ModelBasedConfig from_json(const nlohmann::json& j);
};

// Learns smoothed transition counts, mean rewards and the terminal set;
// replans with warm-started value iteration at the start of each episode and
// acts epsilon-greedily on the plan.
class ModelBasedAgent final : public Agent {
 public:
  ModelBasedAgent(std::size_t n_states, std::size_t n_actions, ModelBasedConfig config = {});
  std::string_view name() const override { return "model_based"; }
  void begin_episode(Rng& rng) override;
  Decision act(std::size_t state, Rng& rng) override;
  std::size_t evaluate(std::size_t state, Rng& rng) const override;
  void observe(const Transition& t) override;
  void reset() override;

  // Smoothed estimate of P[s][a][s'].
  double transition_estimate(std::size_t s, std::size_t a, std::size_t next) const;
  double epsilon() const { return eps_; }
  void replan();

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  ModelBasedConfig config_;
  std::vector<double> counts_;      // (s, a, s')
  std::vector<double> totals_;      // (s, a)
  std::vector<double> reward_sum_;  // (s, a)
  std::vector<std::uint8_t> terminal_;
  std::vector<double> values_;
  std::vector<std::size_t> plan_;
  std::size_t episodes_ = 0;
  double eps_;
};

enum class AgentKind { random, oracle, perturbed_oracle, tql_ucb, model_based };

std::string_view to_string(AgentKind kind);
AgentKind agent_kind_from_string(std::string_view name);

struct AgentSpec {
  AgentKind kind = AgentKind::random;
  double gamma = kReferenceDiscount;  // oracle discount
  PerturbedOracleConfig perturbed;
  TqlUcbConfig tql;
  ModelBasedConfig model;

  nlohmann::json to_json() const;
  static AgentSpec from_json(const nlohmann::json& j);
};

// Oracle kinds read their tables from `oracles` when given and solve the task
// otherwise.
std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const TabularTask& task,
                                  const OracleSet* oracles = nullptr);

// The default behavior pool: four oracles, perturbed oracle, TQL-UCB,
// model-based learner and random.
std::vector<AgentSpec> default_behavior_pool();

}  // namespace anymdp
