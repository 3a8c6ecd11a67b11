#ifndef SCOUTGPT_DOMAIN_HPP_
#define SCOUTGPT_DOMAIN_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "scoutgpt/error.hpp"

namespace scoutgpt {

using PlayerId = std::uint32_t;

inline constexpr double kPitchLength = 105.0;
inline constexpr double kPitchWidth = 68.0;
inline constexpr std::size_t kPlayersOnPitch = 22;
inline constexpr std::size_t kPlayersPerSide = 11;

enum class TeamSide : std::uint8_t { home = 0, away = 1 };

inline std::string_view to_string(TeamSide side) {
  return side == TeamSide::home ? "home" : "away";
}

inline TeamSide team_side_from_string(std::string_view s) {
  if (s == "home") return TeamSide::home;
  if (s == "away") return TeamSide::away;
  throw Error(Errc::malformed_input, "unknown team side '" + std::string(s) + "'");
}

inline TeamSide opponent(TeamSide side) {
  return side == TeamSide::home ? TeamSide::away : TeamSide::home;
}

enum class StartReason : std::uint8_t {
  kickoff,
  set_piece,
  goal_restart,
  period_start,
  personnel_change,
};

inline std::string_view to_string(StartReason r) {
  switch (r) {
    case StartReason::kickoff: return "kickoff";
    case StartReason::set_piece: return "set_piece";
    case StartReason::goal_restart: return "goal_restart";
    case StartReason::period_start: return "period_start";
    case StartReason::personnel_change: return "personnel_change";
  }
  return "kickoff";
}

inline StartReason start_reason_from_string(std::string_view s) {
  for (auto r : {StartReason::kickoff, StartReason::set_piece, StartReason::goal_restart,
                 StartReason::period_start, StartReason::personnel_change}) {
    if (to_string(r) == s) return r;
  }
  throw Error(Errc::malformed_input, "unknown start reason '" + std::string(s) + "'");
}

// The 22 SPADL action types, in SPADL's canonical order.
inline const std::vector<std::string>& spadl_action_types() {
  static const std::vector<std::string> types = {
      "pass",          "cross",          "throw_in",     "freekick_crossed",
      "freekick_short", "corner_crossed", "corner_short", "take_on",
      "foul",          "tackle",         "interception", "shot",
      "shot_penalty",  "shot_freekick",  "keeper_save",  "keeper_claim",
      "keeper_punch",  "keeper_pick_up", "clearance",    "bad_touch",
      "non_action",    "dribble"};
  return types;
}

// Positional family used for value aggregation; supplied by callers, never inferred.
enum class RoleClass { attacker, midfielder, defender, keeper };

inline std::string_view to_string(RoleClass r) {
  switch (r) {
    case RoleClass::attacker: return "attacker";
    case RoleClass::midfielder: return "midfielder";
    case RoleClass::defender: return "defender";
    case RoleClass::keeper: return "keeper";
  }
  return "midfielder";
}

inline RoleClass role_from_string(std::string_view s) {
  for (auto r : {RoleClass::attacker, RoleClass::midfielder, RoleClass::defender,
                 RoleClass::keeper}) {
    if (to_string(r) == s) return r;
  }
  throw Error(Errc::malformed_input, "unknown role class '" + std::string(s) + "'");
}

// One on-ball event. Coordinates are in the acting team's attacking frame.
struct Action {
  PlayerId actor_id = 0;
  TeamSide team_side = TeamSide::home;
  std::string action_type;
  double x = 0.0;
  double y = 0.0;
  double delta_t = 0.0;
  bool success = false;
  double obv = 0.0;

  bool operator==(const Action&) const = default;
};

struct ContextBlock {
  std::array<PlayerId, kPlayersOnPitch> on_pitch{};  // home 1-11, then away 1-11
  int minute = 0;
  int home_goals = 0;
  int away_goals = 0;
  int home_reds = 0;
  int away_reds = 0;
  int home_yellows = 0;
  int away_yellows = 0;

  bool operator==(const ContextBlock&) const = default;

  // Slot of `player` in on_pitch, or -1.
  int slot_of(PlayerId player) const {
    auto it = std::find(on_pitch.begin(), on_pitch.end(), player);
    return it == on_pitch.end() ? -1 : static_cast<int>(it - on_pitch.begin());
  }
  bool contains(PlayerId player) const { return slot_of(player) >= 0; }
  TeamSide side_of_slot(int slot) const {
    return slot < static_cast<int>(kPlayersPerSide) ? TeamSide::home : TeamSide::away;
  }
};

struct Episode {
  ContextBlock context;
  std::vector<Action> actions;
  std::string source_match_id;
  StartReason start_reason = StartReason::kickoff;

  bool operator==(const Episode&) const = default;
};

// Counter caps for the context block.
inline constexpr int kMaxMinute = 130;
inline constexpr int kMaxGoals = 15;
inline constexpr int kMaxReds = 5;
inline constexpr int kMaxYellows = 11;

inline void validate_context(const ContextBlock& c) {
  std::unordered_set<PlayerId> seen(c.on_pitch.begin(), c.on_pitch.end());
  if (seen.size() != kPlayersOnPitch) {
    throw Error(Errc::malformed_input, "context block lists duplicate players");
  }
  auto in = [](int v, int hi) { return v >= 0 && v <= hi; };
  if (!in(c.minute, kMaxMinute) || !in(c.home_goals, kMaxGoals) ||
      !in(c.away_goals, kMaxGoals) || !in(c.home_reds, kMaxReds) ||
      !in(c.away_reds, kMaxReds) || !in(c.home_yellows, kMaxYellows) ||
      !in(c.away_yellows, kMaxYellows)) {
    throw Error(Errc::malformed_input, "context counter outside its clipped range");
  }
}

inline void validate_action(const Action& a, std::size_t index) {
  if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(a.delta_t) ||
      !std::isfinite(a.obv)) {
    throw Error(Errc::malformed_input,
                "action " + std::to_string(index) + " has a non-finite field", index);
  }
  if (a.x < 0.0 || a.x >= kPitchLength || a.y < 0.0 || a.y >= kPitchWidth) {
    throw Error(Errc::malformed_input,
                "action " + std::to_string(index) + " lies outside the pitch", index);
  }
  if (a.delta_t < 0.0) {
    throw Error(Errc::malformed_input,
                "action " + std::to_string(index) + " has negative delta_t", index);
  }
}

// Checks every Episode invariant; throws malformed_input naming the action index.
inline void validate_episode(const Episode& ep,
                             const std::vector<std::string>& types = spadl_action_types()) {
  validate_context(ep.context);
  if (ep.actions.empty()) {
    throw Error(Errc::malformed_input, "episode has no actions");
  }
  if (ep.actions.front().delta_t != 0.0) {
    throw Error(Errc::malformed_input, "first action of an episode must have delta_t = 0", 0);
  }
  for (std::size_t i = 0; i < ep.actions.size(); ++i) {
    const Action& a = ep.actions[i];
    validate_action(a, i);
    int slot = ep.context.slot_of(a.actor_id);
    if (slot < 0) {
      throw Error(Errc::malformed_input,
                  "action " + std::to_string(i) + " actor " + std::to_string(a.actor_id) +
                      " is not on the pitch",
                  i);
    }
    if (ep.context.side_of_slot(slot) != a.team_side) {
      throw Error(Errc::malformed_input,
                  "action " + std::to_string(i) + " team side disagrees with lineup", i);
    }
    if (std::find(types.begin(), types.end(), a.action_type) == types.end()) {
      throw Error(Errc::malformed_input,
                  "action " + std::to_string(i) + " has unknown type '" + a.action_type + "'",
                  i);
    }
  }
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_DOMAIN_HPP_
