#include "anymdp/core/simulator.hpp"

#include <algorithm>
#include <random>

namespace anymdp {

Simulator::Simulator(const TabularTask& task) : task_(&task), terminal_(terminal_mask(task)) {
  const std::size_t ns = task.n_states;
  const std::size_t na = task.n_actions;
  rows_.resize(ns * na);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      Row& r = rows_[s * na + a];
      r.begin = static_cast<std::uint32_t>(support_.size());
      double acc = 0.0;
      for (std::size_t t = 0; t < ns; ++t) {
        const double p = task.transition(s, a, t);
        if (p > 0.0) {
          acc += p;
          support_.push_back(static_cast<std::uint32_t>(t));
          cdf_.push_back(acc);
        }
      }
      r.end = static_cast<std::uint32_t>(support_.size());
    }
  }
  double acc = 0.0;
  for (double p : task.reset_probs) {
    acc += p;
    reset_cdf_.push_back(acc);
  }
}

std::size_t Simulator::reset(Rng& rng) const {
  const double u = uniform01(rng) * reset_cdf_.back();
  const auto it = std::upper_bound(reset_cdf_.begin(), reset_cdf_.end(), u);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - reset_cdf_.begin()),
                                       reset_cdf_.size() - 1);
  return task_->reset_states[k];
}

StepResult Simulator::step(std::size_t state, std::size_t action, Rng& rng) const {
  const Row& r = rows_[state * task_->n_actions + action];
  const double u = uniform01(rng) * cdf_[r.end - 1];
  std::uint32_t k = r.begin;
  while (k + 1 < r.end && cdf_[k] <= u) ++k;
  StepResult out;
  out.next_state = support_[k];
  const double mean = task_->reward.mean(state, action, out.next_state);
  const double sd = task_->reward.noise_std(state, action, out.next_state);
  out.reward = sd > 0.0 ? std::normal_distribution<double>(mean, sd)(rng) : mean;
  out.terminal = terminal_[out.next_state] != 0;
  return out;
}

}  // namespace anymdp
