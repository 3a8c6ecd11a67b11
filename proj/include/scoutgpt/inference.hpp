#ifndef SCOUTGPT_INFERENCE_HPP_
#define SCOUTGPT_INFERENCE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scoutgpt/codec.hpp"
#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"
#include "scoutgpt/metrics.hpp"
#include "scoutgpt/model.hpp"
#include "scoutgpt/profile.hpp"
#include "scoutgpt/rng.hpp"
#include "scoutgpt/transformer.hpp"
#include "scoutgpt/vocabulary.hpp"

namespace scoutgpt {

struct Substitution {
  PlayerId out_player = 0;
  PlayerId in_player = 0;
};

using EventTokens = std::array<Token, kEventTokens>;

namespace detail {

// Draws one token of block `b` from the current state; temperature 0 is argmax.
template <typename S>
Token sample_in_block(const DecodeState<S>& st, const Vocabulary& vocab, Block b, double temperature,
                      Rng& rng, std::vector<double>& scratch) {
  const Token first = vocab.offset(b);
  st.logits(first, vocab.block_size(b), scratch);
  std::size_t best = 0;
  for (std::size_t j = 1; j < scratch.size(); ++j) {
    if (scratch[j] > scratch[best]) best = j;
  }
  if (temperature <= 0.0) return first + static_cast<Token>(best);
  const double top = scratch[best];
  for (double& z : scratch) z = std::exp((z - top) / temperature);
  return first + static_cast<Token>(sample_categorical(rng, scratch));
}

inline void check_temperature(double temperature) {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::domain, "temperature must be a finite value >= 0");
  }
}

}  // namespace detail

// Emits one event after the tokens already in `st`: the player token is forced,
// each attribute slot is drawn from its own block. A forced team skips sampling
// that slot. The state holds the whole event afterwards.
template <typename S>
EventTokens sample_next_event(DecodeState<S>& st, const Vocabulary& vocab, PlayerId player,
                              double temperature, Rng& rng,
                              std::optional<TeamSide> forced_team = std::nullopt) {
  detail::check_temperature(temperature);
  if (st.position() + kEventTokens > st.capacity()) {
    throw Error(Errc::context_overflow, "no room for another event in block size " +
                                            std::to_string(st.capacity()));
  }
  EventTokens ev{};
  ev[0] = vocab.player_token(player);
  st.push(ev[0]);
  std::vector<double> scratch;
  for (int s = 1; s < kEventTokens; ++s) {
    const Block b = kEventSlots[static_cast<std::size_t>(s)];
    Token t;
    if (b == Block::team && forced_team) {
      t = vocab.token(Block::team, static_cast<int>(*forced_team));
    } else {
      t = detail::sample_in_block(st, vocab, b, temperature, rng, scratch);
    }
    ev[static_cast<std::size_t>(s)] = t;
    st.push(t);
  }
  return ev;
}

// Prefix form: `prefix` starts with BOS and a full context block that contains `player`.
template <typename S>
EventTokens sample_next_event(const ModelParams<S>& p, const Vocabulary& vocab,
                              std::span<const Token> prefix, PlayerId player, double temperature,
                              Rng& rng) {
  if (p.config().vocab_size != vocab.size()) {
    throw Error(Errc::vocabulary_mismatch, "model and vocabulary sizes differ");
  }
  if (static_cast<int>(prefix.size()) + kEventTokens > p.config().block_size) {
    throw Error(Errc::context_overflow, "prefix of " + std::to_string(prefix.size()) +
                                            " tokens leaves no room for an event");
  }
  if (prefix.size() < static_cast<std::size_t>(kFirstEventOffset) || prefix[0] != kBos) {
    throw Error(Errc::grammar_violation, "prefix must start with BOS and a context block");
  }
  const Token pt = vocab.player_token(player);
  if (std::find(prefix.begin() + 1, prefix.begin() + 1 + kPlayersOnPitch, pt) ==
      prefix.begin() + 1 + kPlayersOnPitch) {
    throw Error(Errc::unknown_player, "player " + std::to_string(player) + " is not on the pitch");
  }
  DecodeState<S> st(p);
  st.push(prefix);
  return sample_next_event(st, vocab, player, temperature, rng);
}

// Copy of `ep` with `sub` applied to the context and to every action of out_player.
inline Episode apply_substitution(const Episode& ep, const Vocabulary& vocab, const Substitution& sub) {
  for (PlayerId id : {sub.out_player, sub.in_player}) {
    if (!vocab.has_player(id)) {
      throw Error(Errc::unknown_player, "player " + std::to_string(id) + " is not in the vocabulary");
    }
  }
  const int slot = ep.context.slot_of(sub.out_player);
  if (slot < 0) {
    throw Error(Errc::unknown_player,
                "player " + std::to_string(sub.out_player) + " is not on the pitch in this episode");
  }
  if (sub.in_player == sub.out_player) return ep;
  if (ep.context.contains(sub.in_player)) {
    throw Error(Errc::domain,
                "player " + std::to_string(sub.in_player) + " is already on the pitch");
  }
  Episode out = ep;
  out.context.on_pitch[static_cast<std::size_t>(slot)] = sub.in_player;
  for (auto& a : out.actions) {
    if (a.actor_id == sub.out_player) a.actor_id = sub.in_player;
  }
  return out;
}

struct RobvReevaluation {
  std::vector<std::size_t> action_indices;  // positions in the source episode
  std::vector<double> substituted;          // expected rOBV with in_player
  std::vector<double> baseline;             // same slots, original sequence
  double mean_substituted = 0.0;
  double mean_baseline = 0.0;
};

inline nlohmann::json to_json(const RobvReevaluation& r) {
  return {{"action_indices", r.action_indices}, {"substituted", r.substituted},
          {"baseline", r.baseline},             {"mean_substituted", r.mean_substituted},
          {"mean_baseline", r.mean_baseline},   {"n_events", r.action_indices.size()}};
}

namespace detail {

// Distribution mean of the rOBV slot of each listed event.
template <typename S>
std::vector<double> expected_robv(const ModelParams<S>& p, const Vocabulary& vocab,
                                  const EncodedEpisode& enc, std::span<const std::size_t> events) {
  std::vector<double> out;
  if (events.empty()) return out;
  const std::span<const Token> tokens(enc.tokens.data(), static_cast<std::size_t>(enc.length));
  const RowMatrix<S> hidden = forward_hidden(p, tokens);
  const Token first = vocab.offset(Block::robv);
  const int n = vocab.block_size(Block::robv);
  const auto w = p.output_projection().middleRows(first, n);
  std::vector<double> centers(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) centers[static_cast<std::size_t>(j)] = bin_center(vocab, Block::robv, first + j);
  for (std::size_t e : events) {
    // The hidden state one position before the rOBV token predicts it.
    const auto row = static_cast<Eigen::Index>(enc.event_boundaries[e] + kRobvSlot - 1);
    const RowVector<S> z = hidden.row(row) * w.transpose();
    double top = static_cast<double>(z.maxCoeff()), sum = 0.0, acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const double q = std::exp(static_cast<double>(z[j]) - top);
      sum += q;
      acc += q * centers[static_cast<std::size_t>(j)];
    }
    out.push_back(acc / sum);
  }
  return out;
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace detail

// Teacher-forced rOBV readout with and without the substitution, at the slots
// where the substituted player acts inside the encoded window.
template <typename S>
RobvReevaluation reevaluate_robv(const ModelParams<S>& p, const Vocabulary& vocab, const Episode& ep,
                                 const Substitution& sub, const EncodeOptions& opt = {}) {
  if (p.config().vocab_size != vocab.size()) {
    throw Error(Errc::vocabulary_mismatch, "model and vocabulary sizes differ");
  }
  const Episode modified = apply_substitution(ep, vocab, sub);
  const EncodedEpisode base = encode_episode(ep, vocab, opt);
  RobvReevaluation r;
  std::vector<std::size_t> events;
  for (std::size_t e = 0; e < base.event_boundaries.size(); ++e) {
    const std::size_t idx = base.first_event + e;
    if (ep.actions[idx].actor_id == sub.out_player) {
      events.push_back(e);
      r.action_indices.push_back(idx);
    }
  }
  r.baseline = detail::expected_robv(p, vocab, base, events);
  r.substituted = detail::expected_robv(p, vocab, encode_episode(modified, vocab, opt), events);
  r.mean_baseline = detail::mean_of(r.baseline);
  r.mean_substituted = detail::mean_of(r.substituted);
  return r;
}

enum class Aggregation { mean, top_quartile_mean };

inline std::string_view to_string(Aggregation a) {
  return a == Aggregation::mean ? "mean" : "top_quartile_mean";
}

inline Aggregation aggregation_for(RoleClass role) {
  return role == RoleClass::attacker ? Aggregation::top_quartile_mean : Aggregation::mean;
}

inline double aggregate_robv(std::span<const double> samples, Aggregation how) {
  if (samples.empty()) throw Error(Errc::domain, "cannot aggregate an empty sample set");
  std::vector<double> v(samples.begin(), samples.end());
  std::size_t k = v.size();
  if (how == Aggregation::top_quartile_mean) {
    k = (v.size() + 3) / 4;
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(),
                      std::greater<>());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s / static_cast<double>(k);
}

inline double aggregate_robv(std::span<const double> samples, RoleClass role) {
  return aggregate_robv(samples, aggregation_for(role));
}

struct SimulationOptions {
  int n_samples = 30;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  RoleClass role = RoleClass::midfielder;
  EncodeOptions encode{};
};

struct SimulationResult {
  std::vector<double> robv_samples;  // one per rollout: mean sampled rOBV over the player's events
  ActionProfile action_profile;      // pooled over every generated event
  int n_samples = 0;
  Aggregation aggregation_used = Aggregation::mean;
  double aggregate_robv = 0.0;
  std::vector<std::vector<EventTokens>> rollouts;  // generated events per rollout

  bool operator==(const SimulationResult&) const = default;
};

inline nlohmann::json to_json(const SimulationResult& r) {
  return {{"robv_samples", r.robv_samples},
          {"action_profile", to_json(r.action_profile)},
          {"n_samples", r.n_samples},
          {"aggregation_used", to_string(r.aggregation_used)},
          {"aggregate_robv", r.aggregate_robv}};
}

// Rolls the episode forward N times under c'. Only the substituted player's
// events are sampled; everyone else's events are replayed from the encoded
// original so the actor sequence is fixed.
template <typename S>
SimulationResult simulate_substitution(const ModelParams<S>& p, const Vocabulary& vocab,
                                       const Episode& ep, const Substitution& sub,
                                       const SimulationOptions& opt) {
  if (p.config().vocab_size != vocab.size()) {
    throw Error(Errc::vocabulary_mismatch, "model and vocabulary sizes differ");
  }
  if (opt.n_samples < 1) throw Error(Errc::domain, "n_samples must be at least 1");
  detail::check_temperature(opt.temperature);
  const Episode modified = apply_substitution(ep, vocab, sub);
  const EncodedEpisode enc = encode_episode(modified, vocab, opt.encode);
  if (enc.length > p.config().block_size) {
    throw Error(Errc::context_overflow, "encoded episode of " + std::to_string(enc.length) +
                                            " tokens exceeds block size " +
                                            std::to_string(p.config().block_size));
  }
  std::vector<std::size_t> acting;
  for (std::size_t e = 0; e < enc.event_boundaries.size(); ++e) {
    if (modified.actions[enc.first_event + e].actor_id == sub.in_player) acting.push_back(e);
  }
  if (acting.empty()) {
    throw Error(Errc::domain, "player " + std::to_string(sub.out_player) +
                                  " has no events in the encoded episode");
  }
  const TeamSide side = ep.context.side_of_slot(ep.context.slot_of(sub.out_player));

  // Everything before the first sampled event is shared by all rollouts.
  DecodeState<S> shared(p);
  const auto first_sampled = static_cast<std::size_t>(enc.event_boundaries[acting.front()]);
  shared.push(std::span<const Token>(enc.tokens.data(), first_sampled));

  SimulationResult r;
  r.n_samples = opt.n_samples;
  r.aggregation_used = aggregation_for(opt.role);
  ProfileCounter profile;
  for (int k = 0; k < opt.n_samples; ++k) {
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(k)));
    DecodeState<S> st = shared;
    std::vector<EventTokens> generated;
    double robv_sum = 0.0;
    for (std::size_t e = acting.front(); e < enc.event_boundaries.size(); ++e) {
      const auto at = static_cast<std::size_t>(enc.event_boundaries[e]);
      if (modified.actions[enc.first_event + e].actor_id != sub.in_player) {
        st.push(std::span<const Token>(enc.tokens.data() + at, kEventTokens));
        continue;
      }
      const EventTokens ev = sample_next_event(st, vocab, sub.in_player, opt.temperature, rng, side);
      robv_sum += bin_center(vocab, Block::robv, ev[kRobvSlot]);
      profile.add(vocab.type_of(ev[2]), vocab.decode(ev[6]).second == 1);
      generated.push_back(ev);
    }
    r.robv_samples.push_back(robv_sum / static_cast<double>(generated.size()));
    r.rollouts.push_back(std::move(generated));
  }
  r.action_profile = profile.finish();
  r.aggregate_robv = aggregate_robv(r.robv_samples, r.aggregation_used);
  return r;
}

struct EpisodeSimulation {
  std::size_t episode_id = 0;  // caller's index for the episode
  SimulationResult result;
  RobvReevaluation reevaluation;
};

struct BatchSimulation {
  SimulationResult pooled;  // samples concatenated in episode order, profile over all events
  std::vector<EpisodeSimulation> episodes;
};

// Runs simulate_substitution and reevaluate_robv on each listed episode. Episode
// `id` rolls out with seed derive_seed(opt.seed, id).
template <typename S>
BatchSimulation simulate_batch(const ModelParams<S>& p, const Vocabulary& vocab,
                               const std::vector<const Episode*>& episodes,
                               const std::vector<std::size_t>& ids, const Substitution& sub,
                               const SimulationOptions& opt) {
  if (episodes.empty() || episodes.size() != ids.size()) {
    throw Error(Errc::domain, "batch needs one id per episode and at least one episode");
  }
  BatchSimulation b;
  ProfileCounter profile;
  b.pooled.aggregation_used = aggregation_for(opt.role);
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    SimulationOptions o = opt;
    o.seed = derive_seed(opt.seed, ids[i]);
    EpisodeSimulation e;
    e.episode_id = ids[i];
    e.result = simulate_substitution(p, vocab, *episodes[i], sub, o);
    e.reevaluation = reevaluate_robv(p, vocab, *episodes[i], sub, opt.encode);
    b.pooled.robv_samples.insert(b.pooled.robv_samples.end(), e.result.robv_samples.begin(),
                                 e.result.robv_samples.end());
    for (const auto& rollout : e.result.rollouts) {
      for (const auto& ev : rollout) profile.add(vocab.type_of(ev[2]), vocab.decode(ev[6]).second == 1);
    }
    e.result.rollouts.clear();
    b.episodes.push_back(std::move(e));
  }
  b.pooled.n_samples = static_cast<int>(b.pooled.robv_samples.size());
  b.pooled.action_profile = profile.finish();
  b.pooled.aggregate_robv = aggregate_robv(b.pooled.robv_samples, b.pooled.aggregation_used);
  return b;
}

inline nlohmann::json to_json(const BatchSimulation& b) {
  nlohmann::json per = nlohmann::json::array();
  double base = 0.0, subst = 0.0;
  std::size_t n = 0;
  for (const auto& e : b.episodes) {
    per.push_back({{"episode_id", e.episode_id},
                   {"result", to_json(e.result)},
                   {"reevaluation", to_json(e.reevaluation)}});
    for (std::size_t k = 0; k < e.reevaluation.baseline.size(); ++k) {
      base += e.reevaluation.baseline[k];
      subst += e.reevaluation.substituted[k];
      ++n;
    }
  }
  const double d = n == 0 ? 1.0 : static_cast<double>(n);
  return {{"result", to_json(b.pooled)},
          {"reevaluation", {{"mean_substituted", subst / d}, {"mean_baseline", base / d}, {"n_events", n}}},
          {"episodes", per}};
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_INFERENCE_HPP_
