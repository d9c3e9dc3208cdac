#include "anymdp/synth/synthesis.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

#include "anymdp/util/parallel.hpp"

namespace anymdp {

void TrajectorySequence::resize(std::size_t t) {
  states.resize(t);
  tags.resize(t);
  actions.resize(t);
  rewards.resize(t);
  labels.resize(t);
}

void TrajectorySequence::check_aligned() const {
  const std::size_t t = states.size();
  if (tags.size() != t || actions.size() != t || rewards.size() != t || labels.size() != t)
    throw std::invalid_argument("trajectory arrays differ in length");
}

TaskContext::TaskContext(TabularTask task)
    : task_(std::move(task)), oracles_(compute_oracles(task_)), sim_(task_) {
  if (task_.n_states > 65536) throw std::invalid_argument("synthesis: n_states must be at most 65536");
  if (task_.n_actions > 254) throw std::invalid_argument("synthesis: n_actions must be at most 254");
}

const std::vector<std::size_t>& TaskContext::labels() const {
  return oracles_.actions[kOracleDiscounts.size() - 1];
}

void SynthesisConfig::validate() const {
  if (seq_len == 0) throw std::invalid_argument("synthesis: seq_len must be at least 1");
  if (!(unk_fraction >= 0.0 && unk_fraction <= 1.0))
    throw std::invalid_argument("synthesis: unk_fraction must lie in [0, 1]");
  if (pool.empty()) throw std::invalid_argument("synthesis: behavior pool is empty");
}

nlohmann::json SynthesisConfig::to_json() const {
  nlohmann::json p = nlohmann::json::array();
  for (const auto& spec : pool) p.push_back(spec.to_json());
  return {{"seq_len", seq_len}, {"unk_fraction", unk_fraction}, {"pool", p}};
}

SynthesisConfig SynthesisConfig::from_json(const nlohmann::json& j) {
  SynthesisConfig c;
  c.seq_len = j.value("seq_len", c.seq_len);
  c.unk_fraction = j.value("unk_fraction", c.unk_fraction);
  if (j.contains("pool")) {
    c.pool.clear();
    for (const auto& e : j.at("pool")) c.pool.push_back(AgentSpec::from_json(e));
  }
  return c;
}

TrajectorySequence synthesize_sequence(const TaskContext& ctx, const SynthesisConfig& config,
                                       Rng& rng) {
  config.validate();
  const TabularTask& task = ctx.task();
  const Simulator& sim = ctx.simulator();
  const auto& labels = ctx.labels();
  const std::size_t t_len = config.seq_len;
  const auto marker = static_cast<std::uint8_t>(task.n_actions);

  std::vector<std::unique_ptr<Agent>> agents;
  agents.reserve(config.pool.size());
  for (const auto& spec : config.pool) agents.push_back(make_agent(spec, task, &ctx.oracles()));

  TrajectorySequence seq;
  seq.task_seed = task.seed;
  seq.generator = task.generator;
  auto push = [&](std::size_t s, std::uint8_t tag, std::uint8_t a, float r, std::uint8_t label) {
    seq.states.push_back(static_cast<std::uint16_t>(s));
    seq.tags.push_back(tag);
    seq.actions.push_back(a);
    seq.rewards.push_back(r);
    seq.labels.push_back(label);
  };

  while (seq.length() < t_len) {
    Agent& agent = *agents[uniform_index(rng, 0, agents.size() - 1)];
    agent.begin_episode(rng);
    std::size_t s = sim.reset(rng);
    for (std::size_t step = 0; step < sim.episode_cap(); ++step) {
      const Decision d = agent.act(s, rng);
      if (d.action >= task.n_actions) throw std::logic_error("agent returned an invalid action");
      const StepResult r = sim.step(s, d.action, rng);
      push(s, static_cast<std::uint8_t>(d.tag), static_cast<std::uint8_t>(d.action),
           static_cast<float>(r.reward), static_cast<std::uint8_t>(labels[s]));
      agent.observe({s, d.action, r.reward, r.next_state, r.terminal});
      s = r.next_state;
      if (r.terminal) break;
    }
    // Terminal or truncated: one marker record carrying the final state.
    push(s, kUnkTag, marker, 0.0f, 0);
  }
  seq.resize(t_len);

  if (config.unk_fraction > 0.0) {
    std::bernoulli_distribution mask(config.unk_fraction);
    for (std::size_t t = 0; t < t_len; ++t)
      if (seq.actions[t] != marker && mask(rng)) seq.tags[t] = kUnkTag;
  }
  return seq;
}

DatasetManifest build_dataset(std::span<const TaskContext* const> tasks,
                              std::size_t sequences_per_task, const SynthesisConfig& config,
                              const BuildOptions& options, const std::filesystem::path& path,
                              const nlohmann::json& extra) {
  config.validate();
  if (tasks.empty()) throw std::invalid_argument("build_dataset: empty task set");
  if (sequences_per_task == 0) throw std::invalid_argument("build_dataset: sequences_per_task must be positive");
  const std::size_t n_actions = tasks.front()->task().n_actions;
  std::size_t n_states_max = 0;
  nlohmann::json table = nlohmann::json::array();
  for (const TaskContext* ctx : tasks) {
    if (ctx->task().n_actions != n_actions)
      throw std::invalid_argument("build_dataset: tasks disagree on n_actions");
    n_states_max = std::max(n_states_max, ctx->task().n_states);
    table.push_back({{"seed", ctx->task().seed},
                     {"generator_id", std::string(to_string(ctx->task().generator))},
                     {"n_states", ctx->task().n_states}});
  }

  DatasetHeader header;
  header.n_states_max = static_cast<std::uint32_t>(n_states_max);
  header.n_actions = static_cast<std::uint32_t>(n_actions);
  header.seq_len = config.seq_len;
  header.master_seed = options.master_seed;
  header.generator_versions = {{"anymdp", 1}, {"synthesis", 1}};
  header.unk_fraction = config.unk_fraction;
  header.extra = extra;
  header.extra["tasks"] = table;
  header.extra["sequences_per_task"] = sequences_per_task;
  header.extra["synthesis"] = config.to_json();

  DatasetWriter writer(path, header);
  const std::size_t total = tasks.size() * sequences_per_task;
  const std::size_t batch = std::max<std::size_t>(1, options.batch);
  std::vector<TrajectorySequence> buffer;
  std::vector<std::uint64_t> tag_counts(kUnkTag + 1, 0);
  std::uint64_t markers = 0;
  for (std::size_t begin = 0; begin < total; begin += batch) {
    const std::size_t n = std::min(batch, total - begin);
    buffer.assign(n, {});
    parallel_for(n, options.workers, [&](std::size_t k) {
      const std::size_t i = begin + k;
      Rng rng(derive_seed(options.master_seed, i));
      buffer[k] = synthesize_sequence(*tasks[i / sequences_per_task], config, rng);
    });
    for (const auto& seq : buffer) {
      writer.append(seq);
      for (std::size_t t = 0; t < seq.length(); ++t) {
        ++tag_counts[seq.tags[t]];
        if (seq.actions[t] == n_actions) ++markers;
      }
    }
    if (options.progress) options.progress(begin + n, total);
  }
  return writer.finish({{"n_tasks", tasks.size()},
                        {"sequences_per_task", sequences_per_task},
                        {"tag_histogram", tag_counts},
                        {"marker_steps", markers}});
}

}  // namespace anymdp
