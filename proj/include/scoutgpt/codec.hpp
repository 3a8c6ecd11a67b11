#ifndef SCOUTGPT_CODEC_HPP_
#define SCOUTGPT_CODEC_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scoutgpt/discretize.hpp"
#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"
#include "scoutgpt/vocabulary.hpp"

namespace scoutgpt {

inline constexpr int kContextTokens = 29;  // 22 players + minute + 6 counters
inline constexpr int kEventTokens = 8;
inline constexpr int kFirstEventOffset = 1 + kContextTokens;

// Slot order inside one encoded event.
inline constexpr std::array<Block, kEventTokens> kEventSlots = {
    Block::player, Block::team, Block::action_type, Block::x,
    Block::y,      Block::delta_t, Block::success,  Block::robv};

inline constexpr int kRobvSlot = 7;

// Minimum block size for `max_events` events.
inline constexpr int min_block_size(int max_events) { return 30 + kEventTokens * max_events + 2; }

// Largest event count that fits a block size.
inline constexpr int max_events_for(int block_size) {
  return (block_size - 32) / kEventTokens;
}

struct EncodeOptions {
  int block_size = 512;
  int max_events = 60;
};

struct EncodedEpisode {
  std::vector<Token> tokens;
  std::vector<std::uint8_t> loss_mask;  // 1: next-token prediction at this position is scored
  std::vector<Block> slot_kind;
  std::vector<int> event_boundaries;  // offset of each event's player token
  int length = 0;                     // tokens before padding, EPISODE_END included
  std::size_t first_event = 0;        // index in the source episode of the first encoded event
};

// Suffix sums of per-action OBV: target[t] = sum over tau >= t of obv[tau].
inline std::vector<double> compute_robv_targets(std::span<const Action> actions) {
  std::vector<double> out(actions.size());
  double acc = 0.0;
  for (std::size_t i = actions.size(); i-- > 0;) {
    acc += actions[i].obv;
    out[i] = acc;
  }
  return out;
}

// Whether a position whose next token lives in `next` contributes to the loss.
inline bool scored_next_slot(Block next, Token next_token) {
  switch (next) {
    case Block::team:
    case Block::action_type:
    case Block::x:
    case Block::y:
    case Block::delta_t:
    case Block::success:
    case Block::robv:
      return true;
    case Block::special:
      return next_token == kEpisodeEnd;
    default:
      return false;
  }
}

namespace detail {

inline void push(EncodedEpisode& enc, Token t, Block kind) {
  enc.tokens.push_back(t);
  enc.slot_kind.push_back(kind);
}

inline void finish_masks(EncodedEpisode& enc) {
  const std::size_t n = enc.tokens.size();
  enc.loss_mask.assign(n, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    enc.loss_mask[i] = scored_next_slot(enc.slot_kind[i + 1], enc.tokens[i + 1]) ? 1 : 0;
  }
}

}  // namespace detail

inline void append_context(std::vector<Token>& out, const ContextBlock& c, const Vocabulary& vocab) {
  for (PlayerId p : c.on_pitch) out.push_back(vocab.player_token(p));
  out.push_back(vocab.token(Block::minute, discretize(Attribute::minute, c.minute)));
  for (int v : {c.home_goals, c.away_goals, c.home_reds, c.away_reds, c.home_yellows,
                c.away_yellows}) {
    out.push_back(vocab.token(Block::count, discretize(Attribute::counter, v)));
  }
}

// Eight tokens for one action; `robv` is its residual-value target.
inline std::array<Token, kEventTokens> event_tokens(const Action& a, double robv,
                                                    const Vocabulary& vocab) {
  return {vocab.player_token(a.actor_id),
          vocab.token(Block::team, static_cast<int>(a.team_side)),
          vocab.type_token(a.action_type),
          vocab.token(Block::x, discretize(Attribute::x, a.x)),
          vocab.token(Block::y, discretize(Attribute::y, a.y)),
          vocab.token(Block::delta_t, discretize(Attribute::delta_t, a.delta_t)),
          vocab.token(Block::success, a.success ? 1 : 0),
          vocab.token(Block::robv, discretize(Attribute::robv, robv))};
}

inline EncodedEpisode encode_episode(const Episode& ep, const Vocabulary& vocab,
                                     const EncodeOptions& opt = {}) {
  if (opt.max_events < 1 || opt.block_size < min_block_size(opt.max_events)) {
    throw Error(Errc::shape, "block size " + std::to_string(opt.block_size) +
                                 " cannot hold " + std::to_string(opt.max_events) + " events");
  }
  // Targets come from the full episode so truncated heads do not shorten the tail sums.
  const std::vector<double> robv = compute_robv_targets(ep.actions);
  const std::size_t n = ep.actions.size();
  const std::size_t keep = std::min<std::size_t>(n, static_cast<std::size_t>(opt.max_events));
  const std::size_t first = n - keep;

  EncodedEpisode enc;
  enc.first_event = first;
  enc.tokens.reserve(static_cast<std::size_t>(opt.block_size));
  detail::push(enc, kBos, Block::special);
  std::vector<Token> ctx;
  append_context(ctx, ep.context, vocab);
  for (int i = 0; i < kContextTokens; ++i) {
    detail::push(enc, ctx[static_cast<std::size_t>(i)],
                 i < static_cast<int>(kPlayersOnPitch)
                     ? Block::player
                     : (i == static_cast<int>(kPlayersOnPitch) ? Block::minute : Block::count));
  }
  for (std::size_t i = first; i < n; ++i) {
    enc.event_boundaries.push_back(static_cast<int>(enc.tokens.size()));
    auto toks = event_tokens(ep.actions[i], robv[i], vocab);
    for (int s = 0; s < kEventTokens; ++s) detail::push(enc, toks[s], kEventSlots[s]);
  }
  detail::push(enc, kEpisodeEnd, Block::special);
  enc.length = static_cast<int>(enc.tokens.size());
  while (static_cast<int>(enc.tokens.size()) < opt.block_size) {
    detail::push(enc, kPad, Block::special);
  }
  detail::finish_masks(enc);
  return enc;
}

// Rebuilds the annotations of a token sequence (used for generated sequences).
inline EncodedEpisode annotate_tokens(std::span<const Token> tokens, const Vocabulary& vocab);

// Inverse of encode_episode up to discretization. Per-action OBV is recovered
// from consecutive rOBV bin centers, so re-encoding reproduces the same tokens.
inline Episode decode_tokens(std::span<const Token> tokens, const Vocabulary& vocab) {
  auto expect = [&](std::size_t pos, Block b) -> int {
    if (pos >= tokens.size()) {
      throw Error(Errc::grammar_violation,
                  "sequence ends inside a slot group at position " + std::to_string(pos), pos);
    }
    Token t = tokens[pos];
    if (!vocab.in_block(t, b)) {
      throw Error(Errc::grammar_violation,
                  "token " + std::to_string(t) + " at position " + std::to_string(pos) +
                      " is outside block " + std::string(block_name(b)),
                  pos);
    }
    return t - vocab.offset(b);
  };

  if (tokens.empty() || tokens[0] != kBos) {
    throw Error(Errc::grammar_violation, "sequence must start with BOS", 0);
  }
  Episode ep;
  std::size_t pos = 1;
  for (std::size_t i = 0; i < kPlayersOnPitch; ++i, ++pos) {
    expect(pos, Block::player);
    ep.context.on_pitch[i] = vocab.player_of(tokens[pos]);
  }
  ep.context.minute = expect(pos++, Block::minute);
  int* counters[] = {&ep.context.home_goals,   &ep.context.away_goals,
                     &ep.context.home_reds,    &ep.context.away_reds,
                     &ep.context.home_yellows, &ep.context.away_yellows};
  for (int* c : counters) *c = expect(pos++, Block::count);

  std::vector<double> robv;
  while (pos < tokens.size() && tokens[pos] != kEpisodeEnd && tokens[pos] != kPad) {
    Action a;
    expect(pos, Block::player);
    a.actor_id = vocab.player_of(tokens[pos++]);
    a.team_side = static_cast<TeamSide>(expect(pos++, Block::team));
    expect(pos, Block::action_type);
    a.action_type = vocab.type_of(tokens[pos++]);
    a.x = undiscretize(Attribute::x, expect(pos++, Block::x));
    a.y = undiscretize(Attribute::y, expect(pos++, Block::y));
    a.delta_t = undiscretize(Attribute::delta_t, expect(pos++, Block::delta_t));
    a.success = expect(pos++, Block::success) == 1;
    robv.push_back(undiscretize(Attribute::robv, expect(pos++, Block::robv)));
    ep.actions.push_back(std::move(a));
  }
  if (pos < tokens.size() && tokens[pos] == kEpisodeEnd) ++pos;
  for (; pos < tokens.size(); ++pos) {
    if (tokens[pos] != kPad) {
      throw Error(Errc::grammar_violation,
                  "non-PAD token after episode end at position " + std::to_string(pos), pos);
    }
  }
  for (std::size_t i = 0; i < robv.size(); ++i) {
    ep.actions[i].obv = i + 1 < robv.size() ? robv[i] - robv[i + 1] : robv[i];
  }
  return ep;
}

inline Episode decode_episode(const EncodedEpisode& enc, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < enc.tokens.size() && i < enc.slot_kind.size(); ++i) {
    if (!vocab.in_block(enc.tokens[i], enc.slot_kind[i])) {
      throw Error(Errc::grammar_violation,
                  "token at position " + std::to_string(i) + " disagrees with its slot kind", i);
    }
  }
  return decode_tokens(enc.tokens, vocab);
}

inline EncodedEpisode annotate_tokens(std::span<const Token> tokens, const Vocabulary& vocab) {
  decode_tokens(tokens, vocab);  // grammar check
  EncodedEpisode enc;
  enc.tokens.assign(tokens.begin(), tokens.end());
  enc.slot_kind.assign(tokens.size(), Block::special);
  std::size_t pos = 1;
  for (; pos < static_cast<std::size_t>(kFirstEventOffset) && pos < tokens.size(); ++pos) {
    enc.slot_kind[pos] = pos <= kPlayersOnPitch ? Block::player
                         : pos == kPlayersOnPitch + 1 ? Block::minute
                                                      : Block::count;
  }
  while (pos < tokens.size() && tokens[pos] != kEpisodeEnd && tokens[pos] != kPad) {
    enc.event_boundaries.push_back(static_cast<int>(pos));
    for (int s = 0; s < kEventTokens; ++s) enc.slot_kind[pos++] = kEventSlots[s];
  }
  enc.length = static_cast<int>(pos < tokens.size() && tokens[pos] == kEpisodeEnd ? pos + 1 : pos);
  detail::finish_masks(enc);
  return enc;
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_CODEC_HPP_
