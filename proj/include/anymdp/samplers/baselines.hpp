#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include <nlohmann/json.hpp>

#include "anymdp/core/task.hpp"

namespace anymdp {

struct GarnetConfig {
  std::size_t n_states = 16;
  std::size_t n_actions = 5;
  // Distinct successors per (s, a).
  std::size_t branching = 2;
  double reward_noise = 0.1;
  // Probability that a (s, a) pair carries zero reward.
  double reward_sparsity = 0.0;
  double episode_cap_factor = 8.0;
  double discount = 0.994;

  void validate() const;
  nlohmann::json to_json() const;
  static GarnetConfig from_json(const nlohmann::json& j);
};

// Random MDP with `branching` uniformly chosen successors per (s, a), cut
// probabilities from sorted uniforms, and reward mean U(0, 1) per (s, a). No
// terminal states; resets are uniform over the lowest max(1, ceil(n/8))
// indices; the ranking is the identity.
TabularTask sample_garnet(const GarnetConfig& config, std::uint64_t seed);

struct DarkRoomConfig {
  std::size_t width = 9;
  std::size_t height = 9;
  std::pair<std::size_t, std::size_t> goal{0, 0};
  std::pair<std::size_t, std::size_t> start{4, 4};
  std::size_t episode_len = 20;
  double discount = 0.994;

  void validate() const;
  nlohmann::json to_json() const;
  static DarkRoomConfig from_json(const nlohmann::json& j);
};

// Deterministic grid world. State index is y * width + x. Actions:
// 0 up (y - 1), 1 down (y + 1), 2 left (x - 1), 3 right (x + 1), 4 stay;
// moves into a wall leave the position unchanged. Reward 1 for every step
// taken from the goal cell, 0 otherwise. No terminal states; the episode cap is
// episode_len. The ranking orders states by decreasing Manhattan distance to the
// goal (ties by index), so the goal is top-ranked.
TabularTask build_darkroom(const DarkRoomConfig& config);

inline constexpr std::size_t kDarkRoomActions = 5;

}  // namespace anymdp
