#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "anymdp/core/task.hpp"

namespace anymdp {

inline constexpr char kTaskMagic[4] = {'A', 'M', 'D', 'T'};
inline constexpr std::uint32_t kTaskFormatVersion = 1;

// Everything except the three dense tensors.
nlohmann::json task_header_json(const TabularTask& task);

// Full task as JSON; tensors are nested arrays [s][a][s'].
nlohmann::json task_to_json(const TabularTask& task);
TabularTask task_from_json(const nlohmann::json& j);

// Binary layout: magic "AMDT", u32 version, u32 header length, header JSON,
// then transition, reward mean and reward noise as little-endian f64 in
// (s, a, s') order.
void write_task_binary(const TabularTask& task, const std::filesystem::path& path);
TabularTask read_task_binary(const std::filesystem::path& path);

// Chooses JSON for a ".json" extension, binary otherwise.
void save_task(const TabularTask& task, const std::filesystem::path& path);
// Detects the format from the leading bytes. Loaded tasks are validated.
TabularTask load_task(const std::filesystem::path& path);

}  // namespace anymdp
