#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "anymdp/core/rng.hpp"
#include "anymdp/core/task.hpp"

namespace anymdp {

struct StepResult {
  std::size_t next_state = 0;
  double reward = 0.0;
  bool terminal = false;
};

// Samples episodes from a TabularTask. Holds a reference to the task, which
// must outlive it. Transitions are drawn by inverse CDF over each row's
// support; rewards are Gaussian with the task's mean and noise tensors.
class Simulator {
 public:
  explicit Simulator(const TabularTask& task);

  const TabularTask& task() const { return *task_; }
  std::size_t n_states() const { return task_->n_states; }
  std::size_t n_actions() const { return task_->n_actions; }
  std::size_t episode_cap() const { return task_->episode_cap; }
  bool is_terminal(std::size_t s) const { return terminal_[s] != 0; }

  std::size_t reset(Rng& rng) const;
  StepResult step(std::size_t state, std::size_t action, Rng& rng) const;

 private:
  struct Row {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  const TabularTask* task_;
  std::vector<std::uint8_t> terminal_;
  std::vector<Row> rows_;
  std::vector<std::uint32_t> support_;
  std::vector<double> cdf_;
  std::vector<double> reset_cdf_;
};

}  // namespace anymdp
