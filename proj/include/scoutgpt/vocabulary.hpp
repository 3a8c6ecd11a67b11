#ifndef SCOUTGPT_VOCABULARY_HPP_
#define SCOUTGPT_VOCABULARY_HPP_

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scoutgpt/discretize.hpp"
#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"

namespace scoutgpt {

using Token = std::int32_t;

// Vocabulary blocks, in token-index order. Also used as the per-position slot
// annotation of an encoded sequence.
enum class Block : std::uint8_t {
  special,
  player,
  team,
  action_type,
  x,
  y,
  delta_t,
  success,
  robv,
  minute,
  count,
};

inline constexpr std::size_t kBlockCount = 11;

inline constexpr std::array<Block, kBlockCount> kAllBlocks = {
    Block::special, Block::player,  Block::team, Block::action_type,
    Block::x,       Block::y,       Block::delta_t, Block::success,
    Block::robv,    Block::minute,  Block::count};

inline std::string_view block_name(Block b) {
  switch (b) {
    case Block::special: return "special";
    case Block::player: return "player_ids";
    case Block::team: return "team_side";
    case Block::action_type: return "action_types";
    case Block::x: return "x_bins";
    case Block::y: return "y_bins";
    case Block::delta_t: return "delta_bins";
    case Block::success: return "success";
    case Block::robv: return "robv_bins";
    case Block::minute: return "minute_bins";
    case Block::count: return "count_bins";
  }
  return "?";
}

inline constexpr Token kPad = 0;
inline constexpr Token kBos = 1;
inline constexpr Token kEpisodeEnd = 2;

// FNV-1a, 64-bit, rendered as 16 hex digits. Used for manifest and parameter
// fingerprints; not a security hash.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class Vocabulary {
 public:
  Vocabulary() : Vocabulary(std::vector<PlayerId>{}) {}

  explicit Vocabulary(std::vector<PlayerId> players,
             std::vector<std::string> action_types = spadl_action_types())
      : players_(std::move(players)), action_types_(std::move(action_types)) {
    for (std::size_t i = 0; i < players_.size(); ++i) {
      if (!player_index_.emplace(players_[i], static_cast<int>(i)).second) {
        throw Error(Errc::malformed_input, "duplicate player id in vocabulary");
      }
    }
    for (std::size_t i = 0; i < action_types_.size(); ++i) {
      if (!type_index_.emplace(action_types_[i], static_cast<int>(i)).second) {
        throw Error(Errc::malformed_input, "duplicate action type in vocabulary");
      }
    }
    std::array<int, kBlockCount> sizes = {
        3,      static_cast<int>(players_.size()), 2, static_cast<int>(action_types_.size()),
        kXBins, kYBins, kDeltaBins, 2, kRobvBins, kMinuteBins, kCountBins};
    Token next = 0;
    for (std::size_t b = 0; b < kBlockCount; ++b) {
      offsets_[b] = next;
      sizes_[b] = sizes[b];
      next += sizes[b];
    }
    size_ = next;
  }

  int size() const { return size_; }
  Token offset(Block b) const { return offsets_[static_cast<std::size_t>(b)]; }
  int block_size(Block b) const { return sizes_[static_cast<std::size_t>(b)]; }
  const std::vector<PlayerId>& players() const { return players_; }
  const std::vector<std::string>& action_types() const { return action_types_; }

  bool in_block(Token t, Block b) const {
    return t >= offset(b) && t < offset(b) + block_size(b);
  }

  Token token(Block b, int value) const {
    if (value < 0 || value >= block_size(b)) {
      throw Error(Errc::domain, "value " + std::to_string(value) + " outside block " +
                                    std::string(block_name(b)));
    }
    return offset(b) + value;
  }

  // (block, in-block value) owning token `t`.
  std::pair<Block, int> decode(Token t) const {
    if (t < 0 || t >= size_) {
      throw Error(Errc::domain, "token " + std::to_string(t) + " outside vocabulary");
    }
    for (std::size_t b = kBlockCount; b-- > 0;) {
      if (t >= offsets_[b] && sizes_[b] > 0) return {kAllBlocks[b], t - offsets_[b]};
    }
    return {Block::special, t};
  }

  bool has_player(PlayerId p) const { return player_index_.count(p) != 0; }

  Token player_token(PlayerId p) const {
    auto it = player_index_.find(p);
    if (it == player_index_.end()) {
      throw Error(Errc::unknown_player, "player " + std::to_string(p) + " not in vocabulary");
    }
    return offset(Block::player) + it->second;
  }

  PlayerId player_of(Token t) const {
    if (!in_block(t, Block::player)) {
      throw Error(Errc::domain, "token " + std::to_string(t) + " is not a player token");
    }
    return players_[static_cast<std::size_t>(t - offset(Block::player))];
  }

  Token type_token(std::string_view type) const {
    auto it = type_index_.find(std::string(type));
    if (it == type_index_.end()) {
      throw Error(Errc::malformed_input, "action type '" + std::string(type) +
                                             "' not in vocabulary");
    }
    return offset(Block::action_type) + it->second;
  }

  const std::string& type_of(Token t) const {
    if (!in_block(t, Block::action_type)) {
      throw Error(Errc::domain, "token " + std::to_string(t) + " is not an action-type token");
    }
    return action_types_[static_cast<std::size_t>(t - offset(Block::action_type))];
  }

  nlohmann::json manifest() const {
    nlohmann::json blocks = nlohmann::json::array();
    for (Block b : kAllBlocks) {
      blocks.push_back({{"name", block_name(b)}, {"offset", offset(b)}, {"size", block_size(b)}});
    }
    return {{"format", "scoutgpt-vocabulary"},
            {"version", 1},
            {"size", size_},
            {"blocks", blocks},
            {"specials", {"PAD", "BOS", "EPISODE_END"}},
            {"action_types", action_types_},
            {"player_ids", players_}};
  }

  std::string hash() const { return fnv1a_hex(manifest().dump()); }

  static Vocabulary from_manifest(const nlohmann::json& m) {
    try {
      if (m.at("format") != "scoutgpt-vocabulary" || m.at("version") != 1) {
        throw Error(Errc::malformed_input, "unsupported vocabulary manifest");
      }
      Vocabulary v(m.at("player_ids").get<std::vector<PlayerId>>(),
                   m.at("action_types").get<std::vector<std::string>>());
      if (v.manifest() != m) {
        throw Error(Errc::vocabulary_mismatch, "vocabulary manifest layout is inconsistent");
      }
      return v;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::malformed_input, std::string("bad vocabulary manifest: ") + e.what());
    }
  }

 private:
  std::vector<PlayerId> players_;
  std::vector<std::string> action_types_;
  std::unordered_map<PlayerId, int> player_index_;
  std::unordered_map<std::string, int> type_index_;
  std::array<Token, kBlockCount> offsets_{};
  std::array<int, kBlockCount> sizes_{};
  int size_ = 0;
};

// Vocabulary block holding the values of a discretized attribute.
inline Block block_for(Attribute a) {
  switch (a) {
    case Attribute::x: return Block::x;
    case Attribute::y: return Block::y;
    case Attribute::delta_t: return Block::delta_t;
    case Attribute::robv: return Block::robv;
    case Attribute::minute: return Block::minute;
    case Attribute::counter: return Block::count;
  }
  return Block::special;
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_VOCABULARY_HPP_
