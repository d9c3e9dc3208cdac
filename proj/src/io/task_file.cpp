#include "anymdp/io/task_file.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "anymdp/io/le.hpp"

namespace anymdp {

namespace {

nlohmann::json tensor_to_json(const Tensor3& t) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t s = 0; s < t.n_states(); ++s) {
    nlohmann::json per_action = nlohmann::json::array();
    for (std::size_t a = 0; a < t.n_actions(); ++a) {
      const auto row = t.row(s, a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
    }
    out.push_back(std::move(per_action));
  }
  return out;
}

Tensor3 tensor_from_json(const nlohmann::json& j, std::size_t ns, std::size_t na) {
  Tensor3 t(ns, na);
  if (j.size() != ns) throw std::runtime_error("task json: tensor has the wrong state dimension");
  for (std::size_t s = 0; s < ns; ++s) {
    if (j[s].size() != na) throw std::runtime_error("task json: tensor has the wrong action dimension");
    for (std::size_t a = 0; a < na; ++a) {
      const auto row = j[s][a].get<std::vector<double>>();
      if (row.size() != ns) throw std::runtime_error("task json: tensor row has the wrong length");
      std::copy(row.begin(), row.end(), t.row(s, a).begin());
    }
  }
  return t;
}

TabularTask task_from_header(const nlohmann::json& h) {
  TabularTask task;
  task.n_states = h.at("n_states").get<std::size_t>();
  task.n_actions = h.at("n_actions").get<std::size_t>();
  task.generator = generator_from_string(h.at("generator_id").get<std::string>());
  task.config = h.value("config", nlohmann::json::object());
  task.seed = h.at("seed").get<std::uint64_t>();
  task.reset_states = h.at("reset_states").get<std::vector<std::size_t>>();
  task.reset_probs = h.at("reset_probs").get<std::vector<double>>();
  task.terminal_states = h.at("terminal_states").get<std::vector<std::size_t>>();
  if (h.contains("goal_state") && !h.at("goal_state").is_null())
    task.goal_state = h.at("goal_state").get<std::size_t>();
  task.ranking = h.at("ranking").get<std::vector<std::size_t>>();
  task.episode_cap = h.at("episode_cap").get<std::size_t>();
  task.discount_default = h.at("discount_default").get<double>();
  const auto& r = h.at("reward");
  task.reward.composite = r.at("composite").get<bool>();
  if (task.reward.composite) {
    task.reward.state_reward = r.at("state_reward").get<std::vector<double>>();
    task.reward.potential = r.at("potential").get<std::vector<double>>();
    const auto rows = r.at("sa_cost").get<std::vector<std::vector<double>>>();
    task.reward.sa_cost = Matrix(rows.size(), task.n_actions);
    for (std::size_t s = 0; s < rows.size(); ++s) {
      if (rows[s].size() != task.n_actions) throw std::runtime_error("task header: bad sa_cost row");
      std::copy(rows[s].begin(), rows[s].end(), task.reward.sa_cost.row(s).begin());
    }
  }
  return task;
}

}  // namespace

nlohmann::json task_header_json(const TabularTask& task) {
  nlohmann::json reward = {{"composite", task.reward.composite}};
  if (task.reward.composite) {
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < task.reward.sa_cost.rows(); ++s) {
      const auto row = task.reward.sa_cost.row(s);
      rows.emplace_back(row.begin(), row.end());
    }
    reward["state_reward"] = task.reward.state_reward;
    reward["sa_cost"] = rows;
    reward["potential"] = task.reward.potential;
  }
  return {{"generator_id", std::string(to_string(task.generator))},
          {"config", task.config},
          {"seed", task.seed},
          {"n_states", task.n_states},
          {"n_actions", task.n_actions},
          {"reset_states", task.reset_states},
          {"reset_probs", task.reset_probs},
          {"terminal_states", task.terminal_states},
          {"goal_state", task.goal_state ? nlohmann::json(*task.goal_state) : nlohmann::json()},
          {"ranking", task.ranking},
          {"episode_cap", task.episode_cap},
          {"discount_default", task.discount_default},
          {"reward", reward}};
}

nlohmann::json task_to_json(const TabularTask& task) {
  nlohmann::json j = task_header_json(task);
  j["format"] = "anymdp-task";
  j["version"] = kTaskFormatVersion;
  j["transition"] = tensor_to_json(task.transition);
  j["reward_mean"] = tensor_to_json(task.reward.mean);
  j["reward_noise_std"] = tensor_to_json(task.reward.noise_std);
  return j;
}

TabularTask task_from_json(const nlohmann::json& j) {
  TabularTask task = task_from_header(j);
  task.transition = tensor_from_json(j.at("transition"), task.n_states, task.n_actions);
  task.reward.mean = tensor_from_json(j.at("reward_mean"), task.n_states, task.n_actions);
  task.reward.noise_std = tensor_from_json(j.at("reward_noise_std"), task.n_states, task.n_actions);
  validate_task(task);
  return task;
}

void write_task_binary(const TabularTask& task, const std::filesystem::path& path) {
  const std::string header = task_header_json(task).dump();
  std::vector<std::uint8_t> buf(kTaskMagic, kTaskMagic + 4);
  le::append<std::uint32_t>(buf, kTaskFormatVersion);
  le::append<std::uint32_t>(buf, static_cast<std::uint32_t>(header.size()));
  buf.insert(buf.end(), header.begin(), header.end());
  for (const Tensor3* t : {&task.transition, &task.reward.mean, &task.reward.noise_std})
    for (double x : t->data()) le::append<double>(buf, x);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open task file for writing: " + path.string());
  le::write_bytes(os, buf);
  if (!os) throw std::runtime_error("failed writing task file: " + path.string());
}

TabularTask read_task_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open task file: " + path.string());
  std::uint8_t fixed[12];
  if (!le::read_bytes(is, fixed, sizeof fixed)) throw std::runtime_error("task file truncated");
  if (!std::equal(fixed, fixed + 4, kTaskMagic)) throw std::runtime_error("task file: bad magic");
  const auto version = le::load<std::uint32_t>(fixed + 4);
  if (version != kTaskFormatVersion)
    throw std::runtime_error("task file: unsupported version " + std::to_string(version));
  const auto len = le::load<std::uint32_t>(fixed + 8);
  std::string header(len, '\0');
  if (!le::read_bytes(is, reinterpret_cast<std::uint8_t*>(header.data()), len))
    throw std::runtime_error("task file truncated in header");
  TabularTask task = task_from_header(nlohmann::json::parse(header));
  const std::size_t ns = task.n_states;
  const std::size_t na = task.n_actions;
  std::vector<std::uint8_t> raw(ns * na * ns * sizeof(double));
  for (Tensor3* t : {&task.transition, &task.reward.mean, &task.reward.noise_std}) {
    if (!le::read_bytes(is, raw.data(), raw.size())) throw std::runtime_error("task file truncated");
    *t = Tensor3(ns, na);
    auto data = t->data();
    for (std::size_t i = 0; i < data.size(); ++i)
      data[i] = le::load<double>(raw.data() + i * sizeof(double));
  }
  validate_task(task);
  return task;
}

void save_task(const TabularTask& task, const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open task file for writing: " + path.string());
    os << task_to_json(task).dump() << '\n';
    if (!os) throw std::runtime_error("failed writing task file: " + path.string());
    return;
  }
  write_task_binary(task, path);
}

TabularTask load_task(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open task file: " + path.string());
  char head[4] = {};
  is.read(head, 4);
  if (is.gcount() == 4 && std::equal(head, head + 4, kTaskMagic)) {
    is.close();
    return read_task_binary(path);
  }
  is.clear();
  is.seekg(0);
  return task_from_json(nlohmann::json::parse(is));
}

}  // namespace anymdp
