#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anymdp/agents/agents.hpp"
#include "anymdp/core/rng.hpp"
#include "anymdp/core/simulator.hpp"
#include "anymdp/core/task.hpp"
#include "anymdp/io/dataset.hpp"
#include "anymdp/synth/sequence.hpp"

namespace anymdp {

// A task with its solved oracles and a simulator; shared read-only by every
// sequence drawn from it.
class TaskContext {
 public:
  explicit TaskContext(TabularTask task);
  TaskContext(const TaskContext&) = delete;
  TaskContext& operator=(const TaskContext&) = delete;

  const TabularTask& task() const { return task_; }
  const OracleSet& oracles() const { return oracles_; }
  const Simulator& simulator() const { return sim_; }
  // Reference labels: greedy actions of the oracle at kReferenceDiscount.
  const std::vector<std::size_t>& labels() const;

 private:
  TabularTask task_;
  OracleSet oracles_;
  Simulator sim_;
};

struct SynthesisConfig {
  std::size_t seq_len = 8192;
  double unk_fraction = 0.15;
  std::vector<AgentSpec> pool = default_behavior_pool();

  void validate() const;
  nlohmann::json to_json() const;
  static SynthesisConfig from_json(const nlohmann::json& j);
};

// Runs episodes under a behavior policy drawn uniformly from the pool per
// episode, labelling each step with the reference action and closing each
// episode (terminal or truncated at the cap) with a marker record. Stops at
// the first episode end with at least T records and truncates to exactly T.
// Then each non-marker tag is replaced by 7 with probability unk_fraction.
// Learners keep their state across the episodes of this sequence only.
TrajectorySequence synthesize_sequence(const TaskContext& ctx, const SynthesisConfig& config,
                                       Rng& rng);

struct BuildOptions {
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  // Sequences generated per parallel batch before being written in order.
  std::size_t batch = 64;
  // Called after each batch is written with (sequences done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

// Writes tasks.size() * sequences_per_task sequences; sequence i uses task
// i / sequences_per_task and rng seed derive_seed(master_seed, i). Output is
// independent of the worker count.
DatasetManifest build_dataset(std::span<const TaskContext* const> tasks,
                              std::size_t sequences_per_task, const SynthesisConfig& config,
                              const BuildOptions& options, const std::filesystem::path& path,
                              const nlohmann::json& extra = nlohmann::json::object());

}  // namespace anymdp
