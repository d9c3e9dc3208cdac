#include "anymdp/eval/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "anymdp/core/solvers.hpp"
#include "anymdp/simd/kernels.hpp"

namespace anymdp {

EpisodeResult run_episode(const Simulator& sim, Agent& agent, Rng& rng, EpisodeMode mode) {
  EpisodeResult out;
  std::size_t s = sim.reset(rng);
  if (mode == EpisodeMode::train) agent.begin_episode(rng);
  for (std::size_t t = 0; t < sim.episode_cap(); ++t) {
    const std::size_t a =
        mode == EpisodeMode::train ? agent.act(s, rng).action : agent.evaluate(s, rng);
    const StepResult step = sim.step(s, a, rng);
    if (mode == EpisodeMode::train) agent.observe({s, a, step.reward, step.next_state, step.terminal});
    out.total_reward += step.reward;
    ++out.steps;
    s = step.next_state;
    if (step.terminal) {
      out.terminated = true;
      break;
    }
  }
  return out;
}

nlohmann::json Baselines::to_json() const {
  return {{"r_min", r_min},         {"r_max", r_max},           {"se_min", se_min},
          {"se_max", se_max},       {"n_episodes", n_episodes}, {"degenerate", degenerate}};
}

namespace {

void mean_se(const std::vector<double>& x, double& mean, double& se) {
  const double n = static_cast<double>(x.size());
  mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  if (x.size() < 2) {
    se = 0.0;
    return;
  }
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  se = std::sqrt(ss / (n - 1.0) / n);
}

std::vector<std::size_t> reference_actions(const TabularTask& task, const OracleSet* oracles) {
  if (oracles) return oracles->actions[kOracleDiscounts.size() - 1];
  return oracle_actions(task, kReferenceDiscount);
}

}  // namespace

Baselines estimate_baselines(const TabularTask& task, std::size_t n_episodes, Rng& rng,
                             const OracleSet* oracles) {
  if (n_episodes == 0) throw std::invalid_argument("baselines: n_episodes must be at least 1");
  const Simulator sim(task);
  OracleAgent oracle(reference_actions(task, oracles), PolicyTag::oracle);
  RandomAgent random(task.n_actions);
  std::vector<double> hi(n_episodes), lo(n_episodes);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    hi[e] = run_episode(sim, oracle, rng, EpisodeMode::test).total_reward;
    lo[e] = run_episode(sim, random, rng, EpisodeMode::test).total_reward;
  }
  Baselines b;
  b.n_episodes = n_episodes;
  mean_se(hi, b.r_max, b.se_max);
  mean_se(lo, b.r_min, b.se_min);
  b.degenerate =
      !(b.r_max - b.r_min > 2.0 * std::sqrt(b.se_max * b.se_max + b.se_min * b.se_min));
  return b;
}

double expected_capped_return(const TabularTask& task, const Matrix& policy, std::size_t cap) {
  const std::size_t ns = task.n_states;
  const Matrix rbar = expected_reward(task);
  const auto terminal = terminal_mask(task);
  std::vector<double> v(ns, 0.0), next(ns, 0.0);
  for (std::size_t h = 0; h < cap; ++h) {
    for (std::size_t s = 0; s < ns; ++s) {
      if (terminal[s]) {
        next[s] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (std::size_t a = 0; a < task.n_actions; ++a) {
        const double w = policy(s, a);
        if (w != 0.0) acc += w * (rbar(s, a) + simd::dot(task.transition.row(s, a), v));
      }
      next[s] = acc;
    }
    v.swap(next);
  }
  double out = 0.0;
  for (std::size_t k = 0; k < task.reset_states.size(); ++k)
    out += task.reset_probs[k] * v[task.reset_states[k]];
  return out;
}

Baselines exact_baselines(const TabularTask& task, const OracleSet* oracles) {
  Baselines b;
  const auto actions = reference_actions(task, oracles);
  b.r_max = expected_capped_return(task, deterministic_policy(actions, task.n_actions),
                                   task.episode_cap);
  b.r_min = expected_capped_return(task, uniform_policy(task.n_states, task.n_actions),
                                   task.episode_cap);
  b.degenerate = !(b.r_max - b.r_min > 1e-9 * std::max(1.0, std::fabs(b.r_max)));
  return b;
}

double normalized_score(double r, double r_min, double r_max) {
  if (!(r_max > r_min)) throw std::domain_error("normalized score: degenerate baselines (r_max <= r_min)");
  return (r - r_min) / (r_max - r_min);
}

double normalized_score(double r, const Baselines& b) {
  if (b.degenerate) throw std::domain_error("normalized score: baselines flagged degenerate");
  return normalized_score(r, b.r_min, b.r_max);
}

MeanCi aggregate_ci(std::span<const double> values) {
  MeanCi out;
  out.n = values.size();
  if (values.empty()) throw std::invalid_argument("aggregate_ci: no values");
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(out.n - 1));
  out.half_width = 1.96 * sd / std::sqrt(static_cast<double>(out.n));
  out.ci_defined = true;
  return out;
}

std::vector<double> icl_gain(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("icl_gain: empty loss curve");
  const double l0 = losses.front();
  if (!(l0 > 0.0)) throw std::domain_error("icl_gain: L_0 must be positive");
  std::vector<double> d(losses.size());
  for (std::size_t t = 0; t < losses.size(); ++t) d[t] = 1.0 - losses[t] / l0;
  d[0] = 0.0;
  return d;
}

nlohmann::json EvalProtocol::to_json() const {
  return {{"train_episodes", train_episodes},
          {"eval_every", eval_every},
          {"test_episodes", test_episodes}};
}

double LearningCurve::best_normalized() const {
  if (normalized.empty()) return 0.0;
  return *std::max_element(normalized.begin(), normalized.end());
}

std::optional<std::size_t> LearningCurve::episodes_to(double level) const {
  for (std::size_t k = 0; k < normalized.size(); ++k)
    if (normalized[k] >= level) return eval_episodes[k];
  return std::nullopt;
}

std::optional<std::size_t> LearningCurve::steps_to(double level) const {
  for (std::size_t k = 0; k < normalized.size(); ++k)
    if (normalized[k] >= level) return eval_steps[k];
  return std::nullopt;
}

std::size_t LearningCurve::episodes_to_censored(double level) const {
  return episodes_to(level).value_or(budget);
}

std::optional<std::size_t> LearningCurve::episodes_to_fraction_of_best(double fraction) const {
  return episodes_to(fraction * best_normalized());
}

LearningCurve run_learner(const TabularTask& task, Agent& agent, const Baselines& baselines,
                          const EvalProtocol& protocol, Rng& rng) {
  if (protocol.train_episodes == 0) throw std::invalid_argument("run_learner: budget must be >= 1 episode");
  if (protocol.eval_every == 0 || protocol.test_episodes == 0)
    throw std::invalid_argument("run_learner: eval cadence and test episodes must be positive");
  const Simulator sim(task);
  LearningCurve curve;
  curve.task_seed = task.seed;
  curve.agent_id = std::string(agent.name());
  curve.budget = protocol.train_episodes;
  curve.train_returns.reserve(protocol.train_episodes);
  curve.cumulative_steps.reserve(protocol.train_episodes);

  std::size_t steps = 0;
  auto evaluate = [&](std::size_t episodes_done) {
    double acc = 0.0;
    for (std::size_t k = 0; k < protocol.test_episodes; ++k)
      acc += run_episode(sim, agent, rng, EpisodeMode::test).total_reward;
    const double mean = acc / static_cast<double>(protocol.test_episodes);
    const double score = normalized_score(mean, baselines);
    if (!std::isfinite(score)) throw std::runtime_error("run_learner: non-finite test score");
    curve.eval_episodes.push_back(episodes_done);
    curve.eval_steps.push_back(steps);
    curve.test_returns.push_back(mean);
    curve.normalized.push_back(score);
  };

  evaluate(0);
  for (std::size_t e = 1; e <= protocol.train_episodes; ++e) {
    const EpisodeResult r = run_episode(sim, agent, rng, EpisodeMode::train);
    if (!std::isfinite(r.total_reward))
      throw std::runtime_error("run_learner: non-finite training return at episode " + std::to_string(e));
    steps += r.steps;
    curve.train_returns.push_back(r.total_reward);
    curve.cumulative_steps.push_back(steps);
    if (e % protocol.eval_every == 0 || e == protocol.train_episodes) {
      if (curve.eval_episodes.back() != e) evaluate(e);
    }
  }
  return curve;
}

}  // namespace anymdp
