#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anymdp/synth/sequence.hpp"

namespace anymdp {

inline constexpr char kDatasetMagic[4] = {'A', 'M', 'D', 'P'};
inline constexpr std::uint32_t kDatasetFormatVersion = 1;
// Spaces appended to the header JSON so the final sequence count can be
// written in place once the stream is closed.
inline constexpr std::size_t kHeaderSlack = 20;

struct DatasetHeader {
  std::uint32_t n_states_max = 0;
  std::uint32_t n_actions = 0;
  std::uint64_t seq_len = 0;
  std::uint64_t seq_count = 0;
  std::uint64_t master_seed = 0;
  nlohmann::json generator_versions = nlohmann::json::object();
  double unk_fraction = 0.0;
  std::string loss_weight_scheme = "markers_zero";
  // Free-form provenance, e.g. the task table of a synthesized dataset.
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static DatasetHeader from_json(const nlohmann::json& j);
  bool operator==(const DatasetHeader&) const = default;
};

// Record layout, little-endian: u16 states[T], u8 tags[T], u8 actions[T],
// f32 rewards[T], u8 labels[T], then u32 crc32 of the preceding 9T bytes.
constexpr std::size_t record_payload_bytes(std::size_t seq_len) { return 9 * seq_len; }
constexpr std::size_t record_bytes(std::size_t seq_len) { return 9 * seq_len + 4; }

std::vector<std::uint8_t> encode_record(const TrajectorySequence& seq);
std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

enum class DatasetErrorKind {
  io,
  bad_magic,
  bad_version,
  bad_header,
  truncated,
  crc_mismatch,
  invalid_value,
  trailing_data,
  shape_mismatch,
};

std::string_view to_string(DatasetErrorKind kind);

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrorKind kind, const std::string& what,
               std::optional<std::size_t> index = std::nullopt);
  DatasetErrorKind kind() const { return kind_; }
  // Offending record index, when the error concerns a record.
  std::optional<std::size_t> index() const { return index_; }

 private:
  DatasetErrorKind kind_;
  std::optional<std::size_t> index_;
};

struct DatasetManifest {
  std::string file;  // file name, without directories
  std::string sha256;
  std::uint64_t file_bytes = 0;
  std::uint64_t seq_count = 0;
  std::uint64_t seq_len = 0;
  std::uint64_t total_steps = 0;
  DatasetHeader header;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

std::filesystem::path manifest_path(const std::filesystem::path& dataset);
std::string sha256_file(const std::filesystem::path& path);

// Single-writer stream. The file is removed if the writer is destroyed before
// finish() or if any write fails.
class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, DatasetHeader header);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  // Throws DatasetError(shape_mismatch / invalid_value) for a sequence whose
  // length differs from seq_len or whose values break the record invariants.
  void append(const TrajectorySequence& seq);
  std::uint64_t count() const { return count_; }
  // Rewrites the header with the final count, closes the file and writes the
  // manifest sidecar next to it.
  DatasetManifest finish(const nlohmann::json& manifest_extra = nlohmann::json::object());

 private:
  void fail_cleanup();

  std::filesystem::path path_;
  DatasetHeader header_;
  std::ofstream out_;
  std::size_t header_bytes_ = 0;
  std::uint64_t count_ = 0;
  bool finished_ = false;
};

DatasetManifest write_dataset(std::span<const TrajectorySequence> sequences, DatasetHeader header,
                              const std::filesystem::path& path);

// Streaming reader. Memory use is one record regardless of seq_count.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  const DatasetHeader& header() const { return header_; }
  // Next record in write order, or nullopt after seq_count records. Throws
  // DatasetError naming the record index on a short read, crc mismatch or
  // out-of-range value; records before it have already been returned.
  std::optional<TrajectorySequence> next();
  std::size_t position() const { return index_; }

 private:
  std::ifstream in_;
  DatasetHeader header_;
  std::size_t index_ = 0;
  std::vector<std::uint8_t> buffer_;
};

// Reads every record; convenience for tests and small files.
std::vector<TrajectorySequence> read_dataset(const std::filesystem::path& path,
                                             DatasetHeader* header = nullptr);

}  // namespace anymdp
