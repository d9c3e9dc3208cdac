#include "anymdp/agents/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace anymdp {

namespace {

std::size_t argmax_lowest(std::span<const double> row) {
  const double best = *std::max_element(row.begin(), row.end());
  for (std::size_t a = 0; a < row.size(); ++a)
    if (row[a] >= best - kTieTolerance) return a;
  return 0;
}

}  // namespace

std::vector<std::size_t> oracle_actions(const TabularTask& task, double gamma,
                                        const ViOptions& options) {
  const ValueSolution sol = value_iteration(task, gamma, options);
  if (!sol.converged)
    throw std::runtime_error("oracle: value iteration did not converge at gamma=" +
                             std::to_string(gamma));
  return greedy_actions(sol.q_star);
}

OracleSet compute_oracles(const TabularTask& task, const ViOptions& options) {
  OracleSet out;
  for (std::size_t k = 0; k < kOracleDiscounts.size(); ++k) {
    ValueSolution sol = value_iteration(task, kOracleDiscounts[k], options);
    if (!sol.converged)
      throw std::runtime_error("oracle: value iteration did not converge at gamma=" +
                               std::to_string(kOracleDiscounts[k]));
    out.actions[k] = greedy_actions(sol.q_star);
    if (kOracleDiscounts[k] == kReferenceDiscount) out.reference = std::move(sol);
  }
  return out;
}

PolicyTag oracle_tag(double gamma) {
  for (std::size_t k = 0; k < kOracleDiscounts.size(); ++k)
    if (gamma == kOracleDiscounts[k]) return static_cast<PolicyTag>(k);
  throw std::invalid_argument("no oracle tag for gamma=" + std::to_string(gamma));
}

RandomAgent::RandomAgent(std::size_t n_actions) : n_actions_(n_actions) {
  if (n_actions == 0) throw std::invalid_argument("random agent: n_actions must be positive");
}

Decision RandomAgent::act(std::size_t, Rng& rng) {
  return {uniform_index(rng, 0, n_actions_ - 1), PolicyTag::random};
}

std::size_t RandomAgent::evaluate(std::size_t, Rng& rng) const {
  return uniform_index(rng, 0, n_actions_ - 1);
}

OracleAgent::OracleAgent(std::vector<std::size_t> actions, PolicyTag tag)
    : actions_(std::move(actions)), tag_(tag) {
  if (actions_.empty()) throw std::invalid_argument("oracle agent: empty action table");
}

Decision OracleAgent::act(std::size_t state, Rng&) { return {actions_.at(state), tag_}; }

std::size_t OracleAgent::evaluate(std::size_t state, Rng&) const { return actions_.at(state); }

PerturbedOracleAgent::PerturbedOracleAgent(std::vector<std::size_t> actions,
                                           std::size_t n_actions, PerturbedOracleConfig config)
    : actions_(std::move(actions)), n_actions_(n_actions), config_(config), eps_(config.eps0) {
  if (actions_.empty()) throw std::invalid_argument("perturbed oracle: empty action table");
  if (!(config.eps0 >= 0.0 && config.eps0 <= 1.0 && config.decay >= 0.0 && config.decay <= 1.0))
    throw std::invalid_argument("perturbed oracle: eps0 and decay must lie in [0, 1]");
}

void PerturbedOracleAgent::begin_episode(Rng&) {
  eps_ = config_.eps0 * std::pow(config_.decay, static_cast<double>(episodes_));
  ++episodes_;
}

Decision PerturbedOracleAgent::act(std::size_t state, Rng& rng) {
  if (uniform01(rng) < eps_) return {uniform_index(rng, 0, n_actions_ - 1), PolicyTag::random};
  return {actions_.at(state), PolicyTag::oracle};
}

std::size_t PerturbedOracleAgent::evaluate(std::size_t state, Rng&) const {
  return actions_.at(state);
}

void PerturbedOracleAgent::reset() {
  episodes_ = 0;
  eps_ = config_.eps0;
}

nlohmann::json TqlUcbConfig::to_json() const {
  return {{"horizon", horizon},
          {"c", c},
          {"alpha_scheme", alpha_scheme == AlphaScheme::hoeffding ? "hoeffding" : "constant"},
          {"alpha", alpha},
          {"gamma", gamma},
          {"q_init", q_init ? nlohmann::json(*q_init) : nlohmann::json()}};
}

TqlUcbConfig TqlUcbConfig::from_json(const nlohmann::json& j) {
  TqlUcbConfig c;
  c.horizon = j.value("horizon", c.horizon);
  c.c = j.value("c", c.c);
  const std::string scheme = j.value("alpha_scheme", std::string("hoeffding"));
  if (scheme == "hoeffding") c.alpha_scheme = AlphaScheme::hoeffding;
  else if (scheme == "constant") c.alpha_scheme = AlphaScheme::constant;
  else throw std::invalid_argument("unknown alpha_scheme: " + scheme);
  c.alpha = j.value("alpha", c.alpha);
  c.gamma = j.value("gamma", c.gamma);
  if (j.contains("q_init") && !j.at("q_init").is_null()) c.q_init = j.at("q_init").get<double>();
  return c;
}

TqlUcbAgent::TqlUcbAgent(std::size_t n_states, std::size_t n_actions, std::size_t episode_cap,
                         TqlUcbConfig config)
    : n_states_(n_states),
      n_actions_(n_actions),
      horizon_(config.horizon > 0 ? config.horizon : episode_cap),
      config_(config),
      q_init_(config.q_init.value_or(static_cast<double>(horizon_))),
      q_(n_states, n_actions, q_init_),
      counts_(n_states * n_actions, 0) {
  if (n_states == 0 || n_actions == 0) throw std::invalid_argument("tql-ucb: empty task");
  if (horizon_ == 0) throw std::invalid_argument("tql-ucb: horizon must be positive");
  if (!(config.c >= 0.0)) throw std::invalid_argument("tql-ucb: c must be non-negative");
  if (!(config.gamma >= 0.0 && config.gamma < 1.0))
    throw std::invalid_argument("tql-ucb: gamma must lie in [0, 1)");
  if (config.alpha_scheme == AlphaScheme::constant && !(config.alpha > 0.0 && config.alpha <= 1.0))
    throw std::invalid_argument("tql-ucb: alpha must lie in (0, 1]");
}

double TqlUcbAgent::bonus(std::size_t visits) const {
  if (visits == 0) return 0.0;
  return config_.c * std::sqrt(static_cast<double>(horizon_) / static_cast<double>(visits));
}

Decision TqlUcbAgent::act(std::size_t state, Rng&) {
  return {argmax_lowest(q_.row(state)), PolicyTag::q_learner};
}

std::size_t TqlUcbAgent::evaluate(std::size_t state, Rng&) const {
  return argmax_lowest(q_.row(state));
}

void TqlUcbAgent::observe(const Transition& t) {
  std::size_t& n = counts_[t.state * n_actions_ + t.action];
  ++n;
  const double h = static_cast<double>(horizon_);
  const double alpha = config_.alpha_scheme == AlphaScheme::hoeffding
                           ? (h + 1.0) / (h + static_cast<double>(n))
                           : config_.alpha;
  double target = t.reward + bonus(n);
  if (!t.terminal) {
    const auto next = q_.row(t.next_state);
    target += config_.gamma * *std::max_element(next.begin(), next.end());
  }
  double& q = q_(t.state, t.action);
  q += alpha * (target - q);
  if (!std::isfinite(q))
    throw std::runtime_error("tql-ucb: Q-value diverged at (" + std::to_string(t.state) + "," +
                             std::to_string(t.action) + ")");
}

void TqlUcbAgent::reset() {
  std::fill(q_.data().begin(), q_.data().end(), q_init_);
  std::fill(counts_.begin(), counts_.end(), 0);
}

nlohmann::json ModelBasedConfig::to_json() const {
  return {{"gamma", gamma},         {"prior_count", prior_count}, {"eps_start", eps_start},
          {"eps_end", eps_end},     {"eps_decay", eps_decay},     {"vi_tol", vi_tol},
          {"vi_max_iters", vi_max_iters}};
}

ModelBasedConfig ModelBasedConfig::from_json(const nlohmann::json& j) {
  ModelBasedConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.prior_count = j.value("prior_count", c.prior_count);
  c.eps_start = j.value("eps_start", c.eps_start);
  c.eps_end = j.value("eps_end", c.eps_end);
  c.eps_decay = j.value("eps_decay", c.eps_decay);
  c.vi_tol = j.value("vi_tol", c.vi_tol);
  c.vi_max_iters = j.value("vi_max_iters", c.vi_max_iters);
  return c;
}

ModelBasedAgent::ModelBasedAgent(std::size_t n_states, std::size_t n_actions,
                                 ModelBasedConfig config)
    : n_states_(n_states), n_actions_(n_actions), config_(config), eps_(config.eps_start) {
  if (n_states == 0 || n_actions == 0) throw std::invalid_argument("model-based: empty task");
  if (!(config.gamma >= 0.0 && config.gamma < 1.0))
    throw std::invalid_argument("model-based: gamma must lie in [0, 1)");
  if (!(config.prior_count > 0.0)) throw std::invalid_argument("model-based: prior must be positive");
  reset();
}

void ModelBasedAgent::reset() {
  counts_.assign(n_states_ * n_actions_ * n_states_, 0.0);
  totals_.assign(n_states_ * n_actions_, 0.0);
  reward_sum_.assign(n_states_ * n_actions_, 0.0);
  terminal_.assign(n_states_, 0);
  values_.assign(n_states_, 0.0);
  plan_.assign(n_states_, 0);
  episodes_ = 0;
  eps_ = config_.eps_start;
}

double ModelBasedAgent::transition_estimate(std::size_t s, std::size_t a, std::size_t next) const {
  const std::size_t sa = s * n_actions_ + a;
  return (counts_[sa * n_states_ + next] + config_.prior_count) /
         (totals_[sa] + config_.prior_count * static_cast<double>(n_states_));
}

void ModelBasedAgent::replan() {
  const double alpha = config_.prior_count;
  const double n = static_cast<double>(n_states_);
  std::vector<double> next(n_states_);
  for (std::size_t it = 0; it < config_.vi_max_iters; ++it) {
    double total_v = 0.0;
    for (double v : values_) total_v += v;
    double delta = 0.0;
    for (std::size_t s = 0; s < n_states_; ++s) {
      if (terminal_[s]) {
        next[s] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_a = 0;
      for (std::size_t a = 0; a < n_actions_; ++a) {
        const std::size_t sa = s * n_actions_ + a;
        const double* c = counts_.data() + sa * n_states_;
        double ev = alpha * total_v;
        for (std::size_t t = 0; t < n_states_; ++t) ev += c[t] * values_[t];
        ev /= totals_[sa] + alpha * n;
        const double r = totals_[sa] > 0.0 ? reward_sum_[sa] / totals_[sa] : 0.0;
        const double q = r + config_.gamma * ev;
        if (q > best + kTieTolerance) {
          best = q;
          best_a = a;
        }
      }
      next[s] = best;
      plan_[s] = best_a;
      delta = std::max(delta, std::fabs(best - values_[s]));
    }
    values_.swap(next);
    if (delta <= config_.vi_tol) break;
  }
}

void ModelBasedAgent::begin_episode(Rng&) {
  if (episodes_ > 0) replan();
  eps_ = std::max(config_.eps_end,
                  config_.eps_start * std::pow(config_.eps_decay, static_cast<double>(episodes_)));
  ++episodes_;
}

Decision ModelBasedAgent::act(std::size_t state, Rng& rng) {
  if (uniform01(rng) < eps_) return {uniform_index(rng, 0, n_actions_ - 1), PolicyTag::model_based};
  return {plan_.at(state), PolicyTag::model_based};
}

std::size_t ModelBasedAgent::evaluate(std::size_t state, Rng&) const { return plan_.at(state); }

void ModelBasedAgent::observe(const Transition& t) {
  const std::size_t sa = t.state * n_actions_ + t.action;
  counts_[sa * n_states_ + t.next_state] += 1.0;
  totals_[sa] += 1.0;
  reward_sum_[sa] += t.reward;
  if (t.terminal) terminal_[t.next_state] = 1;
}

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::random:
      return "random";
    case AgentKind::oracle:
      return "oracle";
    case AgentKind::perturbed_oracle:
      return "perturbed_oracle";
    case AgentKind::tql_ucb:
      return "tql_ucb";
    case AgentKind::model_based:
      return "model_based";
  }
  return "random";
}

AgentKind agent_kind_from_string(std::string_view name) {
  for (AgentKind k : {AgentKind::random, AgentKind::oracle, AgentKind::perturbed_oracle,
                      AgentKind::tql_ucb, AgentKind::model_based})
    if (name == to_string(k)) return k;
  if (name == "tql-ucb") return AgentKind::tql_ucb;
  if (name == "model-based") return AgentKind::model_based;
  throw std::invalid_argument("unknown agent kind: " + std::string(name));
}

nlohmann::json AgentSpec::to_json() const {
  nlohmann::json j = {{"kind", std::string(to_string(kind))}};
  switch (kind) {
    case AgentKind::oracle:
      j["gamma"] = gamma;
      break;
    case AgentKind::perturbed_oracle:
      j["eps0"] = perturbed.eps0;
      j["decay"] = perturbed.decay;
      break;
    case AgentKind::tql_ucb:
      j["tql"] = tql.to_json();
      break;
    case AgentKind::model_based:
      j["model"] = model.to_json();
      break;
    case AgentKind::random:
      break;
  }
  return j;
}

AgentSpec AgentSpec::from_json(const nlohmann::json& j) {
  AgentSpec s;
  s.kind = agent_kind_from_string(j.at("kind").get<std::string>());
  s.gamma = j.value("gamma", s.gamma);
  s.perturbed.eps0 = j.value("eps0", s.perturbed.eps0);
  s.perturbed.decay = j.value("decay", s.perturbed.decay);
  if (j.contains("tql")) s.tql = TqlUcbConfig::from_json(j.at("tql"));
  if (j.contains("model")) s.model = ModelBasedConfig::from_json(j.at("model"));
  return s;
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const TabularTask& task,
                                  const OracleSet* oracles) {
  auto table = [&](double gamma) {
    if (oracles) {
      for (std::size_t k = 0; k < kOracleDiscounts.size(); ++k)
        if (kOracleDiscounts[k] == gamma) return oracles->actions[k];
    }
    return oracle_actions(task, gamma);
  };
  switch (spec.kind) {
    case AgentKind::random:
      return std::make_unique<RandomAgent>(task.n_actions);
    case AgentKind::oracle:
      return std::make_unique<OracleAgent>(table(spec.gamma), oracle_tag(spec.gamma));
    case AgentKind::perturbed_oracle:
      return std::make_unique<PerturbedOracleAgent>(table(kReferenceDiscount), task.n_actions,
                                                    spec.perturbed);
    case AgentKind::tql_ucb:
      return std::make_unique<TqlUcbAgent>(task.n_states, task.n_actions, task.episode_cap,
                                           spec.tql);
    case AgentKind::model_based:
      return std::make_unique<ModelBasedAgent>(task.n_states, task.n_actions, spec.model);
  }
  throw std::invalid_argument("unknown agent kind");
}

std::vector<AgentSpec> default_behavior_pool() {
  std::vector<AgentSpec> pool;
  for (double g : kOracleDiscounts) {
    AgentSpec s;
    s.kind = AgentKind::oracle;
    s.gamma = g;
    pool.push_back(s);
  }
  for (AgentKind k : {AgentKind::perturbed_oracle, AgentKind::tql_ucb, AgentKind::model_based,
                      AgentKind::random}) {
    AgentSpec s;
    s.kind = k;
    pool.push_back(s);
  }
  return pool;
}

}  // namespace anymdp
