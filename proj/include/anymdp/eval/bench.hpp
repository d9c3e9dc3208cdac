#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anymdp/agents/agents.hpp"
#include "anymdp/core/task.hpp"
#include "anymdp/eval/evaluation.hpp"

namespace anymdp {

// Family names: "anymdp", "anymdp_no_cr", "garnet<b>" (e.g. "garnet2"),
// "darkroom". Throws std::invalid_argument for anything else.
TabularTask make_family_task(const std::string& family, std::size_t n_states,
                             std::size_t n_actions, std::uint64_t seed);

// TQL-UCB grid: alpha scheme x c in {0, 0.01, 0.1} x gamma in {0.9, 0.99}.
std::vector<AgentSpec> default_tql_sweep();

struct BenchConfig {
  std::vector<std::string> families = {"anymdp", "anymdp_no_cr", "garnet2"};
  // Candidate hyperparameters; each family keeps the one with the lowest mean
  // censored episodes-to-level.
  std::vector<AgentSpec> sweep = default_tql_sweep();
  std::size_t n_states = 16;
  std::size_t n_actions = 5;
  std::size_t n_tasks = 16;
  EvalProtocol protocol{2000, 100, 5};
  double level = 0.9;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  // When set, the verdict passes iff mean episodes-to-level increases strictly
  // along this order.
  std::vector<std::string> expected_order;

  nlohmann::json to_json() const;
  static BenchConfig from_json(const nlohmann::json& j);
};

struct SweepResult {
  AgentSpec agent;
  MeanCi episodes_to;      // censored at the budget
  MeanCi best_normalized;  // per-task best over evaluation points
  double reached_fraction = 0.0;
};

struct FamilyResult {
  std::string family;
  std::vector<std::uint64_t> task_seeds;
  std::vector<SweepResult> sweep;
  std::size_t chosen = 0;  // index into sweep
  // Learning curve of the chosen setting, averaged over tasks.
  std::vector<std::size_t> eval_episodes;
  std::vector<double> mean_steps;
  std::vector<MeanCi> score;

  const SweepResult& best() const { return sweep.at(chosen); }
};

struct BenchReport {
  std::vector<FamilyResult> families;
  // Family names from fastest to slowest by mean episodes-to-level.
  std::vector<std::string> ordering;
  std::string verdict;
  std::optional<bool> pass;  // set when expected_order was given

  nlohmann::json to_json() const;
  // Writes curves.csv and summary.csv into `dir` (created if missing).
  void write_csv(const std::filesystem::path& dir) const;
};

BenchReport bench_compare(const BenchConfig& config);

}  // namespace anymdp
