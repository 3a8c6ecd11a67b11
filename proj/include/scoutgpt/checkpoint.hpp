#ifndef SCOUTGPT_CHECKPOINT_HPP_
#define SCOUTGPT_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scoutgpt/error.hpp"
#include "scoutgpt/model.hpp"
#include "scoutgpt/vocabulary.hpp"

namespace scoutgpt {

// Layout: 8-byte magic, u32 version, u64 header length, JSON header, then every
// tensor in header order as little-endian float32.
inline constexpr char kCheckpointMagic[8] = {'S', 'C', 'G', 'P', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams<float> params;
  Vocabulary vocab;
  nlohmann::json metadata = nlohmann::json::object();  // free-form (training summary etc.)
};

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(Errc::malformed_input, "truncated checkpoint");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return v;
}

inline void append_floats(std::string& out, std::span<const float> values) {
  for (float f : values) put_le(out, std::bit_cast<std::uint32_t>(f));
}

}  // namespace detail

// Hash of the raw tensor payload; identifies a set of weights.
inline std::string model_hash(const ModelParams<float>& p) {
  std::string bytes;
  bytes.reserve(p.layout().parameter_count() * 4);
  for (std::size_t t = 0; t < p.layout().tensors().size(); ++t) {
    const auto v = p.vec(t);
    detail::append_floats(bytes, std::span<const float>(v.data(), static_cast<std::size_t>(v.size())));
  }
  return fnv1a_hex(bytes);
}

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  const auto& p = ck.params;
  if (p.config().vocab_size != ck.vocab.size()) {
    throw Error(Errc::vocabulary_mismatch, "model vocab_size " +
                                               std::to_string(p.config().vocab_size) +
                                               " differs from vocabulary size " +
                                               std::to_string(ck.vocab.size()));
  }
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : p.layout().tensors()) tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
  nlohmann::json header = {{"format", "scoutgpt-checkpoint"},
                           {"version", kCheckpointVersion},
                           {"config", p.config()},
                           {"vocabulary", ck.vocab.manifest()},
                           {"vocab_hash", ck.vocab.hash()},
                           {"model_hash", model_hash(p)},
                           {"dtype", "float32-le"},
                           {"tensors", tensors},
                           {"metadata", ck.metadata}};
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le(out, kCheckpointVersion);
  detail::put_le(out, static_cast<std::uint64_t>(h.size()));
  out += h;
  for (std::size_t t = 0; t < p.layout().tensors().size(); ++t) {
    const auto v = p.vec(t);
    detail::append_floats(out, std::span<const float>(v.data(), static_cast<std::size_t>(v.size())));
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw Error(Errc::malformed_input, "not a checkpoint file (bad magic)");
  }
  std::size_t pos = sizeof kCheckpointMagic;
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw Error(Errc::malformed_input, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto hlen = detail::get_le<std::uint64_t>(bytes, pos);
  if (pos + hlen > bytes.size()) throw Error(Errc::malformed_input, "truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_input, std::string("checkpoint header: ") + e.what());
  }
  pos += hlen;

  Checkpoint ck;
  ck.vocab = Vocabulary::from_manifest(header.at("vocabulary"));
  if (ck.vocab.hash() != header.at("vocab_hash").get<std::string>()) {
    throw Error(Errc::vocabulary_mismatch, "checkpoint vocabulary manifest does not match its hash");
  }
  const ModelConfig cfg = header.at("config").get<ModelConfig>();
  ck.params = ModelParams<float>(cfg);
  const auto& tensors = header.at("tensors");
  const auto& layout = ck.params.layout().tensors();
  if (tensors.size() != layout.size()) throw Error(Errc::shape, "checkpoint tensor count mismatch");
  for (std::size_t t = 0; t < layout.size(); ++t) {
    const auto& decl = tensors[t];
    if (decl.at("name").get<std::string>() != layout[t].name ||
        decl.at("shape")[0].get<std::size_t>() != layout[t].rows ||
        decl.at("shape")[1].get<std::size_t>() != layout[t].cols) {
      throw Error(Errc::shape, "checkpoint tensor " + std::to_string(t) + " does not match config");
    }
    auto v = ck.params.vec(t);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, pos));
    }
  }
  if (pos != bytes.size()) throw Error(Errc::malformed_input, "trailing bytes after tensors");
  if (header.contains("model_hash") && header["model_hash"].get<std::string>() != model_hash(ck.params)) {
    throw Error(Errc::malformed_input, "checkpoint payload does not match its model hash");
  }
  ck.metadata = header.value("metadata", nlohmann::json::object());
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = serialize_checkpoint(ck);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_CHECKPOINT_HPP_
