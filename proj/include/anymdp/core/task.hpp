#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "anymdp/core/tensor.hpp"

namespace anymdp {

enum class GeneratorId { anymdp, anymdp_no_cr, garnet, darkroom, custom };

std::string_view to_string(GeneratorId id);
GeneratorId generator_from_string(std::string_view name);

// Reward means and noise per (s, a, s'). When `composite` is set the mean is
// assembled as state_reward[s'] + sa_cost[s][a] + potential[s] - potential[s'].
struct RewardModel {
  Tensor3 mean;
  Tensor3 noise_std;
  std::vector<double> state_reward;
  Matrix sa_cost;
  std::vector<double> potential;
  bool composite = false;

  bool operator==(const RewardModel&) const = default;
};

struct TabularTask {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  Tensor3 transition;
  RewardModel reward;
  std::vector<std::size_t> reset_states;
  // Same length as reset_states; uniform unless set otherwise.
  std::vector<double> reset_probs;
  std::vector<std::size_t> terminal_states;
  std::optional<std::size_t> goal_state;
  // ranking[k] is the state at rank k (0 = lowest value, n_states-1 = highest).
  std::vector<std::size_t> ranking;
  std::size_t episode_cap = 1;
  double discount_default = 0.994;
  std::uint64_t seed = 0;
  GeneratorId generator = GeneratorId::custom;
  // Generator configuration, kept for provenance and serialization.
  nlohmann::json config = nlohmann::json::object();

  bool operator==(const TabularTask&) const = default;
};

// 1 at terminal states, 0 elsewhere.
std::vector<std::uint8_t> terminal_mask(const TabularTask& task);

// Inverse of ranking: rank_of[state] = position of state in the ranking.
std::vector<std::size_t> rank_of(const TabularTask& task);

// Throws std::invalid_argument naming the first violated invariant:
// row-stochastic transitions (1e-12), non-empty reset set disjoint from the
// terminal set, ranking a permutation, consistent shapes.
void validate_task(const TabularTask& task);

// Uniform reset distribution over reset_states.
void set_uniform_reset(TabularTask& task);

}  // namespace anymdp
