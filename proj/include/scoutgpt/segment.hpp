#ifndef SCOUTGPT_SEGMENT_HPP_
#define SCOUTGPT_SEGMENT_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"

namespace scoutgpt {

struct RawAction {
  Action action;   // delta_t is ignored; it is recomputed from the clock
  double clock_s;  // seconds since kickoff
};

enum class MarkerKind { restart, goal, yellow_card, substitution, dismissal };

// Annotation applied between action `before_action - 1` and `before_action`.
struct MatchMarker {
  std::size_t before_action = 0;
  MarkerKind kind = MarkerKind::restart;
  StartReason reason = StartReason::set_piece;  // restart only
  TeamSide side = TeamSide::home;               // goal, yellow_card, dismissal
  PlayerId player_out = 0;                      // substitution, dismissal
  PlayerId player_in = 0;                       // substitution
};

struct RawMatch {
  std::string match_id;
  std::array<PlayerId, kPlayersOnPitch> lineup{};
  std::vector<RawAction> actions;
  std::vector<MatchMarker> markers;
};

inline bool splits_episode(MarkerKind k) {
  return k == MarkerKind::restart || k == MarkerKind::goal || k == MarkerKind::substitution ||
         k == MarkerKind::dismissal;
}

// Cuts a match into fixed-personnel episodes. A dismissed player keeps his
// context slot (the 22-slot grammar is fixed) but may not act afterwards.
inline std::vector<Episode> segment_episodes(const RawMatch& match) {
  validate_context(ContextBlock{match.lineup});
  std::map<std::size_t, std::vector<const MatchMarker*>> by_index;
  for (const auto& m : match.markers) {
    if (m.before_action > match.actions.size()) {
      throw Error(Errc::malformed_input, "marker refers past the last action");
    }
    by_index[m.before_action].push_back(&m);
  }

  ContextBlock state{match.lineup};
  std::set<PlayerId> dismissed;
  std::vector<Episode> episodes;
  StartReason pending_reason = StartReason::kickoff;
  bool split = true;
  auto clipped = [](int v, int hi) { return std::min(v, hi); };

  for (std::size_t i = 0; i <= match.actions.size(); ++i) {
    if (auto it = by_index.find(i); it != by_index.end()) {
      bool personnel = false;
      for (const MatchMarker* m : it->second) {
        switch (m->kind) {
          case MarkerKind::restart:
            if (pending_reason != StartReason::personnel_change) pending_reason = m->reason;
            break;
          case MarkerKind::goal:
            (m->side == TeamSide::home ? state.home_goals : state.away_goals) += 1;
            if (pending_reason != StartReason::personnel_change)
              pending_reason = StartReason::goal_restart;
            break;
          case MarkerKind::yellow_card:
            (m->side == TeamSide::home ? state.home_yellows : state.away_yellows) += 1;
            break;
          case MarkerKind::substitution: {
            int slot = state.slot_of(m->player_out);
            if (slot < 0 || state.contains(m->player_in)) {
              throw Error(Errc::malformed_input,
                          "invalid substitution before action " + std::to_string(i), i);
            }
            state.on_pitch[static_cast<std::size_t>(slot)] = m->player_in;
            personnel = true;
            break;
          }
          case MarkerKind::dismissal:
            if (!state.contains(m->player_out)) {
              throw Error(Errc::malformed_input,
                          "dismissal of a player not on the pitch before action " +
                              std::to_string(i),
                          i);
            }
            dismissed.insert(m->player_out);
            (m->side == TeamSide::home ? state.home_reds : state.away_reds) += 1;
            personnel = true;
            break;
        }
        if (splits_episode(m->kind)) split = true;
      }
      if (personnel) pending_reason = StartReason::personnel_change;
    }
    if (i == match.actions.size()) break;

    const RawAction& ra = match.actions[i];
    int slot = state.slot_of(ra.action.actor_id);
    if (slot < 0 || dismissed.count(ra.action.actor_id)) {
      throw Error(Errc::malformed_input,
                  "action " + std::to_string(i) + " references player " +
                      std::to_string(ra.action.actor_id) + " who is not on the pitch",
                  i);
    }
    if (i > 0 && ra.clock_s < match.actions[i - 1].clock_s) {
      throw Error(Errc::malformed_input, "action " + std::to_string(i) + " is out of time order",
                  i);
    }
    Action a = ra.action;
    if (split) {
      Episode ep;
      ep.context = state;
      ep.context.minute = clipped(static_cast<int>(std::floor(ra.clock_s / 60.0)), kMaxMinute);
      ep.context.home_goals = clipped(state.home_goals, kMaxGoals);
      ep.context.away_goals = clipped(state.away_goals, kMaxGoals);
      ep.context.home_reds = clipped(state.home_reds, kMaxReds);
      ep.context.away_reds = clipped(state.away_reds, kMaxReds);
      ep.context.home_yellows = clipped(state.home_yellows, kMaxYellows);
      ep.context.away_yellows = clipped(state.away_yellows, kMaxYellows);
      ep.source_match_id = match.match_id;
      ep.start_reason = pending_reason;
      episodes.push_back(std::move(ep));
      a.delta_t = 0.0;
      split = false;
      pending_reason = StartReason::set_piece;
    } else {
      a.delta_t = ra.clock_s - match.actions[i - 1].clock_s;
    }
    a.team_side = state.side_of_slot(slot);
    validate_action(a, i);
    episodes.back().actions.push_back(std::move(a));
  }
  return episodes;
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_SEGMENT_HPP_
