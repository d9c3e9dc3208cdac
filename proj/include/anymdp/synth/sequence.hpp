#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "anymdp/core/task.hpp"

namespace anymdp {

inline constexpr std::uint8_t kUnkTag = 7;

// Length-T record of (state, tag, action, reward) with reference labels. The
// terminal marker is action == n_actions with reward 0, tag 7 and label 0.
struct TrajectorySequence {
  std::vector<std::uint16_t> states;
  std::vector<std::uint8_t> tags;
  std::vector<std::uint8_t> actions;
  std::vector<float> rewards;
  std::vector<std::uint8_t> labels;
  std::uint64_t task_seed = 0;
  GeneratorId generator = GeneratorId::custom;

  std::size_t length() const { return states.size(); }
  void resize(std::size_t t);
  // Throws std::invalid_argument unless all five arrays have the same length.
  void check_aligned() const;

  bool operator==(const TrajectorySequence&) const = default;
};

// Loss weight of a step: 0 at terminal markers, 1 elsewhere.
inline float loss_weight(const TrajectorySequence& seq, std::size_t t, std::size_t n_actions) {
  return seq.actions[t] == n_actions ? 0.0f : 1.0f;
}

}  // namespace anymdp
