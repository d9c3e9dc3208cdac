#include "anymdp/io/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <memory>

#include <openssl/evp.h>
#include <zlib.h>

#include "anymdp/io/le.hpp"

namespace anymdp {

namespace {

std::string header_text(const DatasetHeader& header, std::size_t padded_size) {
  std::string text = header.to_json().dump();
  if (padded_size != 0) {
    if (text.size() > padded_size)
      throw DatasetError(DatasetErrorKind::bad_header, "dataset header outgrew its reserved space");
    text.append(padded_size - text.size(), ' ');
  }
  return text;
}

void check_values(const TrajectorySequence& seq, std::uint32_t n_actions, std::uint32_t n_states,
                  std::size_t index) {
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const bool ok = seq.tags[t] <= kUnkTag && seq.actions[t] <= n_actions &&
                    (n_actions == 0 || seq.labels[t] < n_actions) &&
                    (n_states == 0 || seq.states[t] < n_states);
    if (!ok)
      throw DatasetError(DatasetErrorKind::invalid_value,
                         "record " + std::to_string(index) + ": value out of range at step " +
                             std::to_string(t),
                         index);
  }
}

// Fills task_seed/generator from a task table in the header, when present.
void attach_task_ref(TrajectorySequence& seq, const DatasetHeader& header, std::size_t index) {
  const auto& extra = header.extra;
  if (!extra.is_object() || !extra.contains("tasks") || !extra.contains("sequences_per_task")) return;
  const auto per_task = extra.at("sequences_per_task").get<std::size_t>();
  const auto& tasks = extra.at("tasks");
  if (per_task == 0 || index / per_task >= tasks.size()) return;
  const auto& ref = tasks.at(index / per_task);
  seq.task_seed = ref.at("seed").get<std::uint64_t>();
  seq.generator = generator_from_string(ref.at("generator_id").get<std::string>());
}

}  // namespace

nlohmann::json DatasetHeader::to_json() const {
  return {{"n_states_max", n_states_max},
          {"n_actions", n_actions},
          {"seq_len", seq_len},
          {"seq_count", seq_count},
          {"master_seed", master_seed},
          {"generator_versions", generator_versions},
          {"unk_fraction", unk_fraction},
          {"loss_weight_scheme", loss_weight_scheme},
          {"extra", extra}};
}

DatasetHeader DatasetHeader::from_json(const nlohmann::json& j) {
  DatasetHeader h;
  h.n_states_max = j.at("n_states_max").get<std::uint32_t>();
  h.n_actions = j.at("n_actions").get<std::uint32_t>();
  h.seq_len = j.at("seq_len").get<std::uint64_t>();
  h.seq_count = j.at("seq_count").get<std::uint64_t>();
  h.master_seed = j.at("master_seed").get<std::uint64_t>();
  h.generator_versions = j.value("generator_versions", nlohmann::json::object());
  h.unk_fraction = j.at("unk_fraction").get<double>();
  h.loss_weight_scheme = j.value("loss_weight_scheme", std::string("markers_zero"));
  h.extra = j.value("extra", nlohmann::json::object());
  return h;
}

std::vector<std::uint8_t> encode_record(const TrajectorySequence& seq) {
  seq.check_aligned();
  const std::size_t t_len = seq.length();
  std::vector<std::uint8_t> out;
  out.reserve(record_bytes(t_len));
  for (std::uint16_t s : seq.states) le::append(out, s);
  out.insert(out.end(), seq.tags.begin(), seq.tags.end());
  out.insert(out.end(), seq.actions.begin(), seq.actions.end());
  for (float r : seq.rewards) le::append(out, r);
  out.insert(out.end(), seq.labels.begin(), seq.labels.end());
  le::append(out, crc32_of(out));
  return out;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  // zlib takes uInt lengths; feed large buffers in chunks.
  while (offset < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, bytes.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string_view to_string(DatasetErrorKind kind) {
  switch (kind) {
    case DatasetErrorKind::io: return "io";
    case DatasetErrorKind::bad_magic: return "bad_magic";
    case DatasetErrorKind::bad_version: return "bad_version";
    case DatasetErrorKind::bad_header: return "bad_header";
    case DatasetErrorKind::truncated: return "truncated";
    case DatasetErrorKind::crc_mismatch: return "crc_mismatch";
    case DatasetErrorKind::invalid_value: return "invalid_value";
    case DatasetErrorKind::trailing_data: return "trailing_data";
    case DatasetErrorKind::shape_mismatch: return "shape_mismatch";
  }
  return "unknown";
}

DatasetError::DatasetError(DatasetErrorKind kind, const std::string& what,
                           std::optional<std::size_t> index)
    : std::runtime_error(what), kind_(kind), index_(index) {}

nlohmann::json DatasetManifest::to_json() const {
  return {{"file", file},
          {"sha256", sha256},
          {"file_bytes", file_bytes},
          {"seq_count", seq_count},
          {"seq_len", seq_len},
          {"total_steps", total_steps},
          {"header", header.to_json()},
          {"extra", extra}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.file = j.at("file").get<std::string>();
  m.sha256 = j.at("sha256").get<std::string>();
  m.file_bytes = j.at("file_bytes").get<std::uint64_t>();
  m.seq_count = j.at("seq_count").get<std::uint64_t>();
  m.seq_len = j.at("seq_len").get<std::uint64_t>();
  m.total_steps = j.at("total_steps").get<std::uint64_t>();
  m.header = DatasetHeader::from_json(j.at("header"));
  m.extra = j.value("extra", nlohmann::json::object());
  return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset) {
  return std::filesystem::path(dataset.string() + ".manifest.json");
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetErrorKind::io, "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest initialisation failed");
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1)
      throw std::runtime_error("sha256: digest update failed");
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw std::runtime_error("sha256: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path, DatasetHeader header)
    : path_(path), header_(std::move(header)) {
  if (header_.n_actions > 254)
    throw DatasetError(DatasetErrorKind::bad_header, "n_actions must be at most 254");
  if (header_.n_states_max > 65536)
    throw DatasetError(DatasetErrorKind::bad_header, "n_states_max must be at most 65536");
  header_.seq_count = 0;
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw DatasetError(DatasetErrorKind::io, "cannot create " + path_.string());
  const std::string text = header_text(header_, 0);
  header_bytes_ = text.size() + kHeaderSlack;
  std::vector<std::uint8_t> head(kDatasetMagic, kDatasetMagic + 4);
  le::append(head, kDatasetFormatVersion);
  le::append(head, static_cast<std::uint32_t>(header_bytes_));
  const std::string padded = header_text(header_, header_bytes_);
  head.insert(head.end(), padded.begin(), padded.end());
  le::write_bytes(out_, head);
  if (!out_) {
    fail_cleanup();
    throw DatasetError(DatasetErrorKind::io, "write failed: " + path_.string());
  }
}

DatasetWriter::~DatasetWriter() {
  if (!finished_) fail_cleanup();
}

void DatasetWriter::fail_cleanup() {
  if (out_.is_open()) out_.close();
  std::error_code ec;
  std::filesystem::remove(path_, ec);
  finished_ = true;
}

void DatasetWriter::append(const TrajectorySequence& seq) {
  if (finished_) throw std::logic_error("dataset writer already finished");
  seq.check_aligned();
  if (seq.length() != header_.seq_len)
    throw DatasetError(DatasetErrorKind::shape_mismatch,
                       "record " + std::to_string(count_) + " has length " +
                           std::to_string(seq.length()) + ", expected " +
                           std::to_string(header_.seq_len),
                       count_);
  check_values(seq, header_.n_actions, header_.n_states_max, count_);
  const auto bytes = encode_record(seq);
  le::write_bytes(out_, bytes);
  if (!out_) {
    fail_cleanup();
    throw DatasetError(DatasetErrorKind::io, "write failed: " + path_.string(), count_);
  }
  ++count_;
}

DatasetManifest DatasetWriter::finish(const nlohmann::json& manifest_extra) {
  if (finished_) throw std::logic_error("dataset writer already finished");
  header_.seq_count = count_;
  const std::string padded = header_text(header_, header_bytes_);
  out_.seekp(12);
  out_.write(padded.data(), static_cast<std::streamsize>(padded.size()));
  out_.flush();
  out_.close();
  if (!out_) {
    fail_cleanup();
    throw DatasetError(DatasetErrorKind::io, "write failed: " + path_.string());
  }
  finished_ = true;

  DatasetManifest m;
  m.file = path_.filename().string();
  m.sha256 = sha256_file(path_);
  m.file_bytes = std::filesystem::file_size(path_);
  m.seq_count = count_;
  m.seq_len = header_.seq_len;
  m.total_steps = count_ * header_.seq_len;
  m.header = header_;
  m.extra = manifest_extra;
  std::ofstream side(manifest_path(path_));
  side << m.to_json().dump(2) << '\n';
  if (!side) throw DatasetError(DatasetErrorKind::io, "cannot write manifest for " + path_.string());
  return m;
}

DatasetManifest write_dataset(std::span<const TrajectorySequence> sequences, DatasetHeader header,
                              const std::filesystem::path& path) {
  DatasetWriter writer(path, std::move(header));
  for (const auto& seq : sequences) writer.append(seq);
  return writer.finish();
}

DatasetReader::DatasetReader(const std::filesystem::path& path) {
  in_.open(path, std::ios::binary);
  if (!in_) throw DatasetError(DatasetErrorKind::io, "cannot open " + path.string());
  std::uint8_t head[12];
  if (!le::read_bytes(in_, head, 4) || std::memcmp(head, kDatasetMagic, 4) != 0)
    throw DatasetError(DatasetErrorKind::bad_magic, "not an AMDP dataset: " + path.string());
  if (!le::read_bytes(in_, head + 4, 8))
    throw DatasetError(DatasetErrorKind::bad_header, "short dataset header: " + path.string());
  const auto version = le::load<std::uint32_t>(head + 4);
  if (version != kDatasetFormatVersion)
    throw DatasetError(DatasetErrorKind::bad_version,
                       "unsupported dataset version " + std::to_string(version));
  const auto len = le::load<std::uint32_t>(head + 8);
  std::string text(len, '\0');
  if (!le::read_bytes(in_, reinterpret_cast<std::uint8_t*>(text.data()), len))
    throw DatasetError(DatasetErrorKind::bad_header, "short dataset header: " + path.string());
  try {
    header_ = DatasetHeader::from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(DatasetErrorKind::bad_header, std::string("bad dataset header: ") + e.what());
  }
  buffer_.resize(record_bytes(header_.seq_len));
}

std::optional<TrajectorySequence> DatasetReader::next() {
  const std::size_t t_len = header_.seq_len;
  if (index_ >= header_.seq_count) {
    if (in_.peek() != std::char_traits<char>::eof())
      throw DatasetError(DatasetErrorKind::trailing_data,
                         "bytes after the last record (" + std::to_string(index_) + " records)",
                         index_);
    return std::nullopt;
  }
  const std::size_t idx = index_;
  if (!le::read_bytes(in_, buffer_.data(), buffer_.size()))
    throw DatasetError(DatasetErrorKind::truncated, "record " + std::to_string(idx) + " is truncated",
                       idx);
  const std::size_t payload = record_payload_bytes(t_len);
  const auto stored = le::load<std::uint32_t>(buffer_.data() + payload);
  if (crc32_of({buffer_.data(), payload}) != stored)
    throw DatasetError(DatasetErrorKind::crc_mismatch,
                       "record " + std::to_string(idx) + " fails its crc32 check", idx);
  TrajectorySequence seq;
  seq.resize(t_len);
  const std::uint8_t* p = buffer_.data();
  for (std::size_t t = 0; t < t_len; ++t) seq.states[t] = le::load<std::uint16_t>(p + 2 * t);
  p += 2 * t_len;
  std::memcpy(seq.tags.data(), p, t_len);
  p += t_len;
  std::memcpy(seq.actions.data(), p, t_len);
  p += t_len;
  for (std::size_t t = 0; t < t_len; ++t) seq.rewards[t] = le::load<float>(p + 4 * t);
  p += 4 * t_len;
  std::memcpy(seq.labels.data(), p, t_len);
  check_values(seq, header_.n_actions, header_.n_states_max, idx);
  attach_task_ref(seq, header_, idx);
  ++index_;
  return seq;
}

std::vector<TrajectorySequence> read_dataset(const std::filesystem::path& path, DatasetHeader* header) {
  DatasetReader reader(path);
  if (header) *header = reader.header();
  std::vector<TrajectorySequence> out;
  while (auto seq = reader.next()) out.push_back(std::move(*seq));
  return out;
}

}  // namespace anymdp
