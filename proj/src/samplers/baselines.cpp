#include "anymdp/samplers/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "anymdp/core/rng.hpp"

namespace anymdp {

void GarnetConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid Garnet config: " + what);
  };
  if (n_states == 0 || n_states > 65535) fail("n_states must lie in [1, 65535]");
  if (n_actions == 0 || n_actions > 255) fail("n_actions must lie in [1, 255]");
  if (branching == 0 || branching > n_states) fail("branching must lie in [1, n_states]");
  if (reward_noise < 0.0) fail("reward_noise must be non-negative");
  if (!(reward_sparsity >= 0.0 && reward_sparsity <= 1.0)) fail("reward_sparsity must lie in [0, 1]");
  if (!(episode_cap_factor > 0.0)) fail("episode_cap_factor must be positive");
  if (!(discount > 0.0 && discount < 1.0)) fail("discount must lie in (0, 1)");
}

nlohmann::json GarnetConfig::to_json() const {
  return {{"n_states", n_states},
          {"n_actions", n_actions},
          {"branching", branching},
          {"reward_noise", reward_noise},
          {"reward_sparsity", reward_sparsity},
          {"episode_cap_factor", episode_cap_factor},
          {"discount", discount}};
}

GarnetConfig GarnetConfig::from_json(const nlohmann::json& j) {
  GarnetConfig c;
  c.n_states = j.value("n_states", c.n_states);
  c.n_actions = j.value("n_actions", c.n_actions);
  c.branching = j.value("branching", c.branching);
  c.reward_noise = j.value("reward_noise", c.reward_noise);
  c.reward_sparsity = j.value("reward_sparsity", c.reward_sparsity);
  c.episode_cap_factor = j.value("episode_cap_factor", c.episode_cap_factor);
  c.discount = j.value("discount", c.discount);
  return c;
}

TabularTask sample_garnet(const GarnetConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = config.n_states;
  const std::size_t na = config.n_actions;
  Rng rng(seed);
  TabularTask task;
  task.n_states = n;
  task.n_actions = na;
  task.transition = Tensor3(n, na);
  task.reward.mean = Tensor3(n, na);
  task.reward.noise_std = Tensor3(n, na, config.reward_noise);

  std::vector<std::size_t> states(n);
  std::vector<double> cuts(config.branching + 1);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      std::iota(states.begin(), states.end(), 0);
      std::shuffle(states.begin(), states.end(), rng);
      cuts.front() = 0.0;
      cuts.back() = 1.0;
      for (std::size_t k = 1; k < config.branching; ++k) cuts[k] = uniform01(rng);
      std::sort(cuts.begin() + 1, cuts.end() - 1);
      for (std::size_t k = 0; k < config.branching; ++k)
        task.transition(s, a, states[k]) += cuts[k + 1] - cuts[k];
      const double mean = uniform01(rng) < config.reward_sparsity ? 0.0 : uniform01(rng);
      for (double& x : task.reward.mean.row(s, a)) x = mean;
    }
  }
  const std::size_t b0 = std::max<std::size_t>(1, (n + 7) / 8);
  for (std::size_t s = 0; s < b0; ++s) task.reset_states.push_back(s);
  set_uniform_reset(task);
  task.ranking.resize(n);
  std::iota(task.ranking.begin(), task.ranking.end(), 0);
  task.episode_cap = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.episode_cap_factor * static_cast<double>(n))));
  task.discount_default = config.discount;
  task.seed = seed;
  task.generator = GeneratorId::garnet;
  task.config = config.to_json();
  validate_task(task);
  return task;
}

void DarkRoomConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid DarkRoom config: " + what);
  };
  if (width == 0 || height == 0 || width * height > 65535) fail("grid must have 1..65535 cells");
  if (goal.first >= width || goal.second >= height) fail("goal lies outside the grid");
  if (start.first >= width || start.second >= height) fail("start lies outside the grid");
  if (episode_len == 0) fail("episode_len must be positive");
  if (!(discount > 0.0 && discount < 1.0)) fail("discount must lie in (0, 1)");
}

nlohmann::json DarkRoomConfig::to_json() const {
  return {{"width", width},
          {"height", height},
          {"goal", {goal.first, goal.second}},
          {"start", {start.first, start.second}},
          {"episode_len", episode_len},
          {"discount", discount}};
}

DarkRoomConfig DarkRoomConfig::from_json(const nlohmann::json& j) {
  DarkRoomConfig c;
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  if (j.contains("goal")) c.goal = {j.at("goal").at(0), j.at("goal").at(1)};
  if (j.contains("start")) c.start = {j.at("start").at(0), j.at("start").at(1)};
  c.episode_len = j.value("episode_len", c.episode_len);
  c.discount = j.value("discount", c.discount);
  return c;
}

TabularTask build_darkroom(const DarkRoomConfig& config) {
  config.validate();
  const std::size_t w = config.width;
  const std::size_t h = config.height;
  const std::size_t n = w * h;
  const std::size_t goal = config.goal.second * w + config.goal.first;
  TabularTask task;
  task.n_states = n;
  task.n_actions = kDarkRoomActions;
  task.transition = Tensor3(n, kDarkRoomActions);
  task.reward.mean = Tensor3(n, kDarkRoomActions);
  task.reward.noise_std = Tensor3(n, kDarkRoomActions);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t s = y * w + x;
      const std::size_t targets[kDarkRoomActions] = {
          y > 0 ? s - w : s, y + 1 < h ? s + w : s, x > 0 ? s - 1 : s, x + 1 < w ? s + 1 : s, s};
      for (std::size_t a = 0; a < kDarkRoomActions; ++a) {
        task.transition(s, a, targets[a]) = 1.0;
        if (s == goal)
          for (double& r : task.reward.mean.row(s, a)) r = 1.0;
      }
    }
  }
  task.reset_states = {config.start.second * w + config.start.first};
  set_uniform_reset(task);
  task.goal_state = goal;
  auto distance = [&](std::size_t s) {
    const auto dx = static_cast<long>(s % w) - static_cast<long>(config.goal.first);
    const auto dy = static_cast<long>(s / w) - static_cast<long>(config.goal.second);
    return std::labs(dx) + std::labs(dy);
  };
  task.ranking.resize(n);
  std::iota(task.ranking.begin(), task.ranking.end(), 0);
  std::stable_sort(task.ranking.begin(), task.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return distance(a) > distance(b); });
  task.episode_cap = config.episode_len;
  task.discount_default = config.discount;
  task.generator = GeneratorId::darkroom;
  task.config = config.to_json();
  validate_task(task);
  return task;
}

}  // namespace anymdp
