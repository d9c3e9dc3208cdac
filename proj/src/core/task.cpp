#include "anymdp/core/task.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace anymdp {

std::string_view to_string(GeneratorId id) {
  switch (id) {
    case GeneratorId::anymdp:
      return "anymdp";
    case GeneratorId::anymdp_no_cr:
      return "anymdp_no_cr";
    case GeneratorId::garnet:
      return "garnet";
    case GeneratorId::darkroom:
      return "darkroom";
    case GeneratorId::custom:
      return "custom";
  }
  return "custom";
}

GeneratorId generator_from_string(std::string_view name) {
  for (GeneratorId id : {GeneratorId::anymdp, GeneratorId::anymdp_no_cr, GeneratorId::garnet,
                         GeneratorId::darkroom, GeneratorId::custom}) {
    if (name == to_string(id)) return id;
  }
  throw std::invalid_argument("unknown generator id: " + std::string(name));
}

std::vector<std::uint8_t> terminal_mask(const TabularTask& task) {
  std::vector<std::uint8_t> mask(task.n_states, 0);
  for (std::size_t s : task.terminal_states) mask.at(s) = 1;
  return mask;
}

std::vector<std::size_t> rank_of(const TabularTask& task) {
  std::vector<std::size_t> out(task.n_states, 0);
  for (std::size_t k = 0; k < task.ranking.size(); ++k) out.at(task.ranking[k]) = k;
  return out;
}

void set_uniform_reset(TabularTask& task) {
  task.reset_probs.assign(task.reset_states.size(),
                          task.reset_states.empty() ? 0.0 : 1.0 / task.reset_states.size());
}

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("invalid task: " + what);
}

}  // namespace

void validate_task(const TabularTask& task) {
  const std::size_t ns = task.n_states;
  const std::size_t na = task.n_actions;
  if (ns == 0 || na == 0) fail("n_states and n_actions must be positive");
  if (task.transition.n_states() != ns || task.transition.n_actions() != na)
    fail("transition tensor shape does not match (n_states, n_actions)");
  if (task.reward.mean.n_states() != ns || task.reward.mean.n_actions() != na)
    fail("reward mean tensor shape does not match");
  if (task.reward.noise_std.n_states() != ns || task.reward.noise_std.n_actions() != na)
    fail("reward noise tensor shape does not match");

  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      double total = 0.0;
      for (double p : task.transition.row(s, a)) {
        if (!(p >= 0.0)) fail("negative or NaN transition probability at s=" + std::to_string(s));
        total += p;
      }
      if (std::fabs(total - 1.0) > 1e-12)
        fail("transition row (" + std::to_string(s) + "," + std::to_string(a) +
             ") sums to " + std::to_string(total));
      for (double sd : task.reward.noise_std.row(s, a)) {
        if (!(sd >= 0.0)) fail("negative reward noise");
      }
    }
  }

  if (task.reset_states.empty()) fail("reset_states is empty");
  if (task.reset_probs.size() != task.reset_states.size())
    fail("reset_probs length differs from reset_states");
  double reset_total = 0.0;
  for (double p : task.reset_probs) {
    if (!(p >= 0.0)) fail("negative reset probability");
    reset_total += p;
  }
  if (std::fabs(reset_total - 1.0) > 1e-12) fail("reset distribution does not sum to 1");

  std::vector<std::uint8_t> seen(ns, 0);
  for (std::size_t s : task.reset_states) {
    if (s >= ns) fail("reset state out of range");
    seen[s] = 1;
  }
  for (std::size_t s : task.terminal_states) {
    if (s >= ns) fail("terminal state out of range");
    if (seen[s]) fail("state " + std::to_string(s) + " is both reset and terminal");
  }

  if (task.ranking.size() != ns) fail("ranking length differs from n_states");
  std::vector<std::uint8_t> used(ns, 0);
  for (std::size_t s : task.ranking) {
    if (s >= ns || used[s]) fail("ranking is not a permutation");
    used[s] = 1;
  }
  if (task.goal_state && *task.goal_state != task.ranking.back())
    fail("goal state is not the top-ranked state");
  if (task.episode_cap == 0) fail("episode_cap must be positive");
  if (!(task.discount_default > 0.0 && task.discount_default < 1.0))
    fail("discount_default must lie in (0,1)");
}

}  // namespace anymdp
