#ifndef SCOUTGPT_SYNTH_HPP_
#define SCOUTGPT_SYNTH_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"
#include "scoutgpt/rng.hpp"
#include "scoutgpt/segment.hpp"

// Synthetic league: players drawn from parameterized archetypes acting on a
// known scoring-potential surface. Provides ground truth for learning,
// counterfactual and aggregation checks.
namespace scoutgpt::synth {

inline constexpr int kGridCols = 12;
inline constexpr int kGridRows = 8;
inline constexpr int kZones = 3;  // defensive, middle, attacking third
inline constexpr double kCellLength = kPitchLength / kGridCols;
inline constexpr double kCellWidth = kPitchWidth / kGridRows;

inline int zone_of_col(int col) { return col * kZones / kGridCols; }
// Zone of a coordinate; exact for 1 m bin centers since thirds fall on 35 m and 70 m.
inline int zone_of_x(double x) {
  return std::clamp(static_cast<int>(x / (kPitchLength / kZones)), 0, kZones - 1);
}

inline int type_index(std::string_view name) {
  const auto& types = spadl_action_types();
  auto it = std::find(types.begin(), types.end(), name);
  if (it == types.end()) throw Error(Errc::malformed_input, "unknown action type");
  return static_cast<int>(it - types.begin());
}

inline int type_count() { return static_cast<int>(spadl_action_types().size()); }

struct Move {
  int dcol = 0;
  int drow = 0;
  double p = 1.0;
};

struct Archetype {
  std::string name;
  RoleClass role_class = RoleClass::midfielder;
  // Per zone, a categorical over spadl_action_types().
  std::array<std::vector<double>, kZones> action_dist;
  std::vector<double> success_rate;  // per action type
  // zone * type_count() + type -> displacement of the ball on success.
  std::vector<std::vector<Move>> zone_transition;

  const std::vector<Move>& moves(int zone, int type) const {
    static const std::vector<Move> stay = {Move{}};
    const auto& m = zone_transition[static_cast<std::size_t>(zone * type_count() + type)];
    return m.empty() ? stay : m;
  }
};

inline void validate_archetype(const Archetype& a) {
  const auto n = static_cast<std::size_t>(type_count());
  for (const auto& dist : a.action_dist) {
    if (dist.size() != n) throw Error(Errc::malformed_input, a.name + ": bad action_dist size");
    double s = std::accumulate(dist.begin(), dist.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-9 ||
        std::any_of(dist.begin(), dist.end(), [](double p) { return p < 0.0; })) {
      throw Error(Errc::malformed_input, a.name + ": action_dist must sum to 1");
    }
  }
  if (a.success_rate.size() != n ||
      std::any_of(a.success_rate.begin(), a.success_rate.end(),
                  [](double p) { return p < 0.0 || p > 1.0; })) {
    throw Error(Errc::malformed_input, a.name + ": success_rate must lie in [0,1]");
  }
  if (a.zone_transition.size() != n * kZones) {
    throw Error(Errc::malformed_input, a.name + ": bad zone_transition size");
  }
  for (const auto& moves : a.zone_transition) {
    if (moves.empty()) continue;
    double s = 0.0;
    for (const auto& m : moves) s += m.p;
    if (std::abs(s - 1.0) > 1e-9) {
      throw Error(Errc::malformed_input, a.name + ": zone_transition must sum to 1");
    }
  }
}

// Scoring potential on a 12 x 8 grid, stored in integer units of 1/1024 so that
// every synthetic OBV is dyadic and suffix sums telescope exactly.
inline constexpr int kValueUnitsPerOne = 1024;

struct ValueSurface {
  std::array<int, kGridCols * kGridRows> units{};
  int goal_units = 410;

  int units_at(int col, int row) const {
    return units[static_cast<std::size_t>(col * kGridRows + row)];
  }
  double at(int col, int row) const {
    return static_cast<double>(units_at(col, row)) / kValueUnitsPerOne;
  }
  double goal_value() const { return static_cast<double>(goal_units) / kValueUnitsPerOne; }

  // Monotone toward the opponent goal, peaked in the central channel.
  static ValueSurface standard() {
    static constexpr std::array<int, kGridCols> col_units = {0,  4,  8,  13, 19,  28,
                                                             38, 51, 70, 94, 128, 174};
    static constexpr std::array<int, kGridRows> row_permille = {600,  800,  1000, 1000,
                                                               1000, 1000, 800,  600};
    ValueSurface s;
    for (int c = 0; c < kGridCols; ++c) {
      for (int r = 0; r < kGridRows; ++r) {
        s.units[static_cast<std::size_t>(c * kGridRows + r)] =
            col_units[static_cast<std::size_t>(c)] * row_permille[static_cast<std::size_t>(r)] /
            1000;
      }
    }
    return s;
  }

  static ValueSurface zero() {
    ValueSurface s;
    s.goal_units = 0;
    return s;
  }
};

struct LeaguePlayer {
  PlayerId id = 0;
  int archetype = 0;
  int team = 0;
};

struct SyntheticLeague {
  std::vector<Archetype> archetypes;
  std::vector<LeaguePlayer> players;  // per team: 11 starters (keeper first), then bench
  ValueSurface value_surface = ValueSurface::standard();
  double failure_penalty = 0.2;   // OBV of a failed action is -lambda * phi(start), rounded to units
  double out_of_play_prob = 0.3;  // failed non-shot action ends the episode
  double yellow_prob = 0.15;      // per foul
  std::uint64_t rng_seed = 0;
  int team_count = 0;

  const LeaguePlayer& player(PlayerId id) const {
    for (const auto& p : players) {
      if (p.id == id) return p;
    }
    throw Error(Errc::unknown_player, "player " + std::to_string(id) + " not in league");
  }
  const Archetype& archetype_of(PlayerId id) const {
    return archetypes[static_cast<std::size_t>(player(id).archetype)];
  }
  std::vector<PlayerId> team(int t) const {
    std::vector<PlayerId> out;
    for (const auto& p : players) {
      if (p.team == t) out.push_back(p.id);
    }
    return out;
  }
};

namespace detail {

struct DistBuilder {
  std::vector<double> v = std::vector<double>(static_cast<std::size_t>(type_count()), 0.0);
  DistBuilder& set(std::string_view type, double p) {
    v[static_cast<std::size_t>(type_index(type))] = p;
    return *this;
  }
};

inline std::vector<Move> forward(std::initializer_list<std::pair<int, double>> dcols) {
  std::vector<Move> out;
  for (auto [dc, p] : dcols) {
    out.push_back({dc, -1, p / 4});
    out.push_back({dc, 0, p / 2});
    out.push_back({dc, 1, p / 4});
  }
  return out;
}

inline Archetype make_archetype(std::string name, RoleClass role,
                                std::array<DistBuilder, kZones> dists, DistBuilder success,
                                std::initializer_list<std::pair<std::string_view, std::vector<Move>>>
                                    transitions) {
  Archetype a;
  a.name = std::move(name);
  a.role_class = role;
  for (int z = 0; z < kZones; ++z) a.action_dist[static_cast<std::size_t>(z)] = dists[z].v;
  a.success_rate = success.v;
  a.zone_transition.assign(static_cast<std::size_t>(type_count() * kZones), {});
  for (const auto& [type, moves] : transitions) {
    for (int z = 0; z < kZones; ++z) {
      a.zone_transition[static_cast<std::size_t>(z * type_count() + type_index(type))] = moves;
    }
  }
  validate_archetype(a);
  return a;
}

}  // namespace detail

// Six archetypes: keeper, passer-defender, ball-winner, playmaker,
// dribbler-forward, finisher. Indices are stable.
inline std::vector<Archetype> default_archetypes() {
  using detail::DistBuilder;
  using detail::forward;
  using detail::make_archetype;
  std::vector<Archetype> out;
  out.push_back(make_archetype(
      "keeper", RoleClass::keeper,
      {DistBuilder{}.set("pass", 0.55).set("keeper_save", 0.15).set("keeper_claim", 0.1)
           .set("keeper_pick_up", 0.1).set("clearance", 0.1),
       DistBuilder{}.set("pass", 0.7).set("clearance", 0.3),
       DistBuilder{}.set("pass", 0.7).set("clearance", 0.3)},
      DistBuilder{}.set("pass", 0.8).set("keeper_save", 0.9).set("keeper_claim", 0.9)
          .set("keeper_pick_up", 0.95).set("clearance", 0.85),
      {{"pass", forward({{1, 0.3}, {2, 0.4}, {3, 0.3}})},
       {"clearance", forward({{3, 0.5}, {4, 0.5}})}}));
  out.push_back(make_archetype(
      "passer-defender", RoleClass::defender,
      {DistBuilder{}.set("pass", 0.6).set("clearance", 0.15).set("tackle", 0.1)
           .set("interception", 0.1).set("dribble", 0.05),
       DistBuilder{}.set("pass", 0.7).set("tackle", 0.1).set("interception", 0.1)
           .set("dribble", 0.1),
       DistBuilder{}.set("pass", 0.8).set("cross", 0.1).set("dribble", 0.1)},
      DistBuilder{}.set("pass", 0.9).set("clearance", 0.8).set("tackle", 0.6)
          .set("interception", 0.7).set("dribble", 0.8).set("cross", 0.3),
      {{"pass", forward({{-2, 0.25}, {-1, 0.35}, {0, 0.3}, {1, 0.1}})},
       {"dribble", forward({{0, 0.6}, {1, 0.4}})},
       {"clearance", forward({{2, 0.5}, {3, 0.5}})},
       {"cross", forward({{1, 0.5}, {2, 0.5}})}}));
  out.push_back(make_archetype(
      "ball-winner", RoleClass::midfielder,
      {DistBuilder{}.set("tackle", 0.25).set("interception", 0.25).set("pass", 0.4)
           .set("foul", 0.1),
       DistBuilder{}.set("tackle", 0.2).set("interception", 0.2).set("pass", 0.5).set("foul", 0.1),
       DistBuilder{}.set("pass", 0.7).set("tackle", 0.15).set("shot", 0.05).set("foul", 0.1)},
      DistBuilder{}.set("pass", 0.85).set("tackle", 0.65).set("interception", 0.75)
          .set("shot", 0.08),
      {{"pass", forward({{-1, 0.3}, {0, 0.4}, {1, 0.3}})}}));
  out.push_back(make_archetype(
      "playmaker", RoleClass::midfielder,
      {DistBuilder{}.set("pass", 0.8).set("dribble", 0.2),
       DistBuilder{}.set("pass", 0.7).set("dribble", 0.2).set("take_on", 0.1),
       DistBuilder{}.set("pass", 0.55).set("cross", 0.15).set("shot", 0.15).set("dribble", 0.15)},
      DistBuilder{}.set("pass", 0.85).set("dribble", 0.8).set("take_on", 0.55).set("cross", 0.3)
          .set("shot", 0.12),
      {{"pass", forward({{0, 0.2}, {1, 0.4}, {2, 0.3}, {3, 0.1}})},
       {"dribble", forward({{0, 0.5}, {1, 0.5}})},
       {"take_on", forward({{1, 1.0}})},
       {"cross", forward({{1, 0.5}, {2, 0.5}})}}));
  out.push_back(make_archetype(
      "dribbler-forward", RoleClass::attacker,
      {DistBuilder{}.set("dribble", 0.6).set("pass", 0.4),
       DistBuilder{}.set("dribble", 0.5).set("take_on", 0.2).set("pass", 0.3),
       DistBuilder{}.set("dribble", 0.35).set("take_on", 0.2).set("shot", 0.25).set("pass", 0.2)},
      DistBuilder{}.set("dribble", 0.85).set("take_on", 0.6).set("pass", 0.8).set("shot", 0.2),
      {{"dribble", forward({{1, 0.6}, {2, 0.4}})},
       {"take_on", forward({{1, 0.5}, {2, 0.5}})},
       {"pass", forward({{1, 0.5}, {2, 0.5}})}}));
  out.push_back(make_archetype(
      "finisher", RoleClass::attacker,
      {DistBuilder{}.set("pass", 0.9).set("dribble", 0.1),
       DistBuilder{}.set("pass", 0.8).set("dribble", 0.2),
       DistBuilder{}.set("shot", 0.45).set("pass", 0.45).set("dribble", 0.1)},
      DistBuilder{}.set("pass", 0.75).set("shot", 0.25).set("dribble", 0.7),
      {{"pass", forward({{-1, 0.4}, {0, 0.4}, {1, 0.2}})},
       {"dribble", forward({{0, 0.5}, {1, 0.5}})}}));
  return out;
}

enum ArchetypeIndex : int {
  kKeeper = 0,
  kPasserDefender = 1,
  kBallWinner = 2,
  kPlaymaker = 3,
  kDribblerForward = 4,
  kFinisher = 5,
};

// Default league: `teams` squads of 14 (11 starters + 3 bench). Player ids are
// 100 * (team + 1) + squad index.
inline SyntheticLeague make_league(std::uint64_t seed = 0, int teams = 4) {
  static constexpr std::array<int, 14> squad = {
      kKeeper,         kPasserDefender, kPasserDefender,  kPasserDefender, kPasserDefender,
      kBallWinner,     kBallWinner,     kPlaymaker,       kDribblerForward, kDribblerForward,
      kFinisher,       kPasserDefender, kPlaymaker,       kFinisher};
  SyntheticLeague league;
  league.archetypes = default_archetypes();
  league.rng_seed = seed;
  league.team_count = teams;
  for (int t = 0; t < teams; ++t) {
    for (std::size_t k = 0; k < squad.size(); ++k) {
      league.players.push_back(
          {static_cast<PlayerId>(100 * (t + 1) + static_cast<int>(k)), squad[k], t});
    }
  }
  return league;
}

// ----------------------------------------------------------------------------
// Play dynamics

enum class EpisodeEnd { none, goal, shot_missed, out_of_play, foul };

struct PlayState {
  std::array<PlayerId, kPlayersOnPitch> lineup{};
  int actor_slot = 0;
  int col = 5;
  int row = 3;
};

struct StepOutcome {
  Action action;  // delta_t left at 0
  int type = 0;
  int start_col = 0, start_row = 0;
  int end_col = 0, end_row = 0;  // cell holding the ball afterwards (own frame)
  double phi_start = 0.0, phi_end = 0.0;
  EpisodeEnd end = EpisodeEnd::none;
  bool yellow = false;
};

inline bool is_shot(int type) {
  static const int a = type_index("shot"), b = type_index("shot_penalty"),
                   c = type_index("shot_freekick");
  return type == a || type == b || type == c;
}

inline bool hands_off_ball(int type) {
  static const std::set<int> passing = {
      type_index("pass"),          type_index("cross"),          type_index("throw_in"),
      type_index("freekick_crossed"), type_index("freekick_short"), type_index("corner_crossed"),
      type_index("corner_short"),  type_index("clearance")};
  return passing.count(type) != 0;
}

inline int side_base(TeamSide side) { return side == TeamSide::home ? 0 : 11; }
inline TeamSide side_of_slot(int slot) { return slot < 11 ? TeamSide::home : TeamSide::away; }

// Uniform slot on `side`, optionally excluding one slot.
inline int random_slot(Rng& rng, TeamSide side, int exclude = -1) {
  for (;;) {
    int s = side_base(side) + static_cast<int>(uniform_index(rng, 11));
    if (s != exclude) return s;
  }
}

// Pins the type and success of an action instead of drawing them.
struct ForcedAction {
  int type = 0;
  bool success = false;
};

// Executes one on-ball action from `state` and advances it to the next actor.
// When the outcome ends the episode, `state` is left untouched beyond the ball cell.
inline StepOutcome step(const SyntheticLeague& league, PlayState& state, Rng& rng,
                        const ForcedAction* forced = nullptr) {
  StepOutcome out;
  const PlayerId actor = state.lineup[static_cast<std::size_t>(state.actor_slot)];
  const Archetype& arch = league.archetype_of(actor);
  const TeamSide side = side_of_slot(state.actor_slot);
  const int zone = zone_of_col(state.col);

  static const int foul = type_index("foul");
  bool success = false;
  if (forced) {
    out.type = forced->type;
    success = forced->success;
  } else {
    out.type = static_cast<int>(
        sample_categorical(rng, arch.action_dist[static_cast<std::size_t>(zone)]));
    success = out.type != foul &&
              uniform01(rng) < arch.success_rate[static_cast<std::size_t>(out.type)];
  }
  out.start_col = state.col;
  out.start_row = state.row;
  const ValueSurface& surface = league.value_surface;
  const int units_start = surface.units_at(state.col, state.row);
  out.phi_start = surface.at(state.col, state.row);

  Action& a = out.action;
  a.actor_id = actor;
  a.team_side = side;
  a.action_type = spadl_action_types()[static_cast<std::size_t>(out.type)];
  a.x = (state.col + uniform01(rng)) * kCellLength;
  a.y = (state.row + uniform01(rng)) * kCellWidth;
  a.success = success;

  const double penalty =
      -std::round(league.failure_penalty * units_start) / kValueUnitsPerOne;
  if (is_shot(out.type)) {
    out.end = success ? EpisodeEnd::goal : EpisodeEnd::shot_missed;
    out.phi_end = success ? surface.goal_value() : out.phi_start;
    a.obv = success ? static_cast<double>(surface.goal_units - units_start) / kValueUnitsPerOne
                    : penalty;
    out.end_col = state.col;
    out.end_row = state.row;
    return out;
  }
  if (out.type == foul) {
    out.end = EpisodeEnd::foul;
    out.yellow = uniform01(rng) < league.yellow_prob;
    a.obv = penalty;
    out.end_col = state.col;
    out.end_row = state.row;
    out.phi_end = out.phi_start;
    return out;
  }
  if (success) {
    const auto& moves = arch.moves(zone, out.type);
    std::vector<double> w;
    w.reserve(moves.size());
    for (const auto& m : moves) w.push_back(m.p);
    const Move& m = moves[sample_categorical(rng, w)];
    state.col = std::clamp(state.col + m.dcol, 0, kGridCols - 1);
    state.row = std::clamp(state.row + m.drow, 0, kGridRows - 1);
    out.phi_end = surface.at(state.col, state.row);
    a.obv = static_cast<double>(surface.units_at(state.col, state.row) - units_start) /
            kValueUnitsPerOne;
    if (hands_off_ball(out.type)) state.actor_slot = random_slot(rng, side, state.actor_slot);
  } else {
    a.obv = penalty;
    out.phi_end = out.phi_start;
    if (uniform01(rng) < league.out_of_play_prob) {
      out.end = EpisodeEnd::out_of_play;
    } else {
      // Turnover: the opponent continues from the mirrored cell.
      state.col = kGridCols - 1 - state.col;
      state.row = kGridRows - 1 - state.row;
      state.actor_slot = random_slot(rng, opponent(side));
    }
  }
  out.end_col = state.col;
  out.end_row = state.row;
  return out;
}

// ----------------------------------------------------------------------------
// Matches

struct MatchOptions {
  std::vector<PlayerId> home_bench;
  std::vector<PlayerId> away_bench;
  double half_seconds = 2700.0;
  std::string match_id = "synthetic";
};

struct ActionProvenance {
  int start_col = 0, start_row = 0, end_col = 0, end_row = 0;
  double phi_start = 0.0, phi_end = 0.0;
  bool goal = false;
};

struct MatchBookkeeping {
  std::size_t restart_count = 0;  // episode boundaries after the first episode
  std::map<PlayerId, std::vector<std::size_t>> type_counts;
  // Sum over the player's actions of action_dist[zone at that action].
  std::map<PlayerId, std::vector<double>> expected_type_mass;
  std::map<PlayerId, std::size_t> success_counts;
  std::vector<ActionProvenance> provenance;  // aligned with raw.actions
};

struct GeneratedMatch {
  RawMatch raw;
  std::vector<Episode> episodes;
  MatchBookkeeping book;
};

inline GeneratedMatch generate_match(const SyntheticLeague& league,
                                     const std::vector<PlayerId>& home_ids,
                                     const std::vector<PlayerId>& away_ids, std::uint64_t seed,
                                     const MatchOptions& opt = {}) {
  if (home_ids.size() != kPlayersPerSide || away_ids.size() != kPlayersPerSide) {
    throw Error(Errc::malformed_input, "a match needs 11 home and 11 away players");
  }
  std::set<PlayerId> all(home_ids.begin(), home_ids.end());
  all.insert(away_ids.begin(), away_ids.end());
  for (PlayerId b : opt.home_bench) all.insert(b);
  for (PlayerId b : opt.away_bench) all.insert(b);
  if (all.size() != kPlayersOnPitch + opt.home_bench.size() + opt.away_bench.size()) {
    throw Error(Errc::malformed_input, "duplicate player ids in match lineup");
  }
  for (PlayerId p : all) league.player(p);

  Rng rng(seed);
  GeneratedMatch gm;
  RawMatch& raw = gm.raw;
  raw.match_id = opt.match_id;
  std::copy(home_ids.begin(), home_ids.end(), raw.lineup.begin());
  std::copy(away_ids.begin(), away_ids.end(), raw.lineup.begin() + kPlayersPerSide);

  PlayState st;
  st.lineup = raw.lineup;

  struct PendingSub {
    double at;
    TeamSide side;
    PlayerId in;
  };
  std::vector<PendingSub> subs;
  for (TeamSide side : {TeamSide::home, TeamSide::away}) {
    const auto& bench = side == TeamSide::home ? opt.home_bench : opt.away_bench;
    for (PlayerId in : bench) {
      double at = opt.half_seconds * (1.2 + 0.6 * uniform01(rng));
      subs.push_back({at, side, in});
    }
  }
  std::stable_sort(subs.begin(), subs.end(),
                   [](const PendingSub& a, const PendingSub& b) { return a.at < b.at; });
  std::set<int> subbed_slots;

  double clock = 0.0;
  int half = 0;
  auto kickoff = [&](TeamSide side) {
    st.col = 5;
    st.row = 3 + static_cast<int>(uniform_index(rng, 2));
    st.actor_slot = random_slot(rng, side, side_base(side));
  };
  kickoff(TeamSide::home);

  for (;;) {
    StepOutcome o = step(league, st, rng);
    raw.actions.push_back({o.action, clock});
    auto& counts = gm.book.type_counts[o.action.actor_id];
    auto& mass = gm.book.expected_type_mass[o.action.actor_id];
    if (counts.empty()) {
      counts.assign(static_cast<std::size_t>(type_count()), 0);
      mass.assign(static_cast<std::size_t>(type_count()), 0.0);
    }
    counts[static_cast<std::size_t>(o.type)] += 1;
    const auto& dist = league.archetype_of(o.action.actor_id)
                           .action_dist[static_cast<std::size_t>(zone_of_col(o.start_col))];
    for (std::size_t k = 0; k < dist.size(); ++k) mass[k] += dist[k];
    gm.book.success_counts[o.action.actor_id] += o.action.success ? 1 : 0;
    gm.book.provenance.push_back({o.start_col, o.start_row, o.end_col, o.end_row, o.phi_start,
                                  o.phi_end, o.end == EpisodeEnd::goal});
    clock += 1.0 + static_cast<double>(uniform_index(rng, 3));

    const double period_end = opt.half_seconds * (half + 1);
    EpisodeEnd end = o.end;
    if (end == EpisodeEnd::none && clock > period_end + 180.0) end = EpisodeEnd::out_of_play;
    if (end == EpisodeEnd::none) continue;

    const std::size_t at = raw.actions.size();
    const TeamSide acting = o.action.team_side;
    if (end == EpisodeEnd::goal) {
      raw.markers.push_back({at, MarkerKind::goal, StartReason::goal_restart, acting});
    }
    if (o.yellow) raw.markers.push_back({at, MarkerKind::yellow_card, StartReason::set_piece, acting});
    clock += 5.0 + static_cast<double>(uniform_index(rng, 11));

    StartReason reason = StartReason::set_piece;
    if (clock >= period_end) {
      if (half == 1) break;
      half = 1;
      clock = std::max(clock, opt.half_seconds);
      reason = StartReason::period_start;
      kickoff(TeamSide::away);
    } else if (end == EpisodeEnd::goal) {
      reason = StartReason::goal_restart;
      kickoff(opponent(acting));
    } else if (end == EpisodeEnd::shot_missed) {
      st.col = 0;
      st.row = 3 + static_cast<int>(uniform_index(rng, 2));
      st.actor_slot = side_base(opponent(acting));  // keeper takes the goal kick
    } else {
      st.col = kGridCols - 1 - o.start_col;
      st.row = kGridRows - 1 - o.start_row;
      st.actor_slot = random_slot(rng, opponent(acting));
    }
    raw.markers.push_back({at, MarkerKind::restart, reason});

    while (!subs.empty() && subs.front().at <= clock) {
      const PendingSub s = subs.front();
      subs.erase(subs.begin());
      int slot;
      do {
        slot = side_base(s.side) + 1 + static_cast<int>(uniform_index(rng, 10));
      } while (subbed_slots.count(slot));
      subbed_slots.insert(slot);
      MatchMarker m{at, MarkerKind::substitution, StartReason::personnel_change, s.side};
      m.player_out = st.lineup[static_cast<std::size_t>(slot)];
      m.player_in = s.in;
      raw.markers.push_back(m);
      st.lineup[static_cast<std::size_t>(slot)] = s.in;
    }
    ++gm.book.restart_count;
  }
  gm.episodes = segment_episodes(raw);
  return gm;
}

struct CorpusOptions {
  int matches = 200;
  std::uint64_t seed = 1;
  double half_seconds = 2700.0;
};

struct GeneratedCorpus {
  std::vector<Episode> episodes;
  std::size_t match_count = 0;
  std::size_t restart_count = 0;
  std::map<PlayerId, std::vector<std::size_t>> type_counts;
  std::map<PlayerId, std::vector<double>> expected_type_mass;
  std::map<PlayerId, std::size_t> success_counts;
};

// Ordered fixture list cycling through all home/away pairings.
inline std::pair<int, int> fixture(int match, int teams) {
  const int pairs = teams * (teams - 1);
  int k = match % pairs;
  int home = k / (teams - 1);
  int away = k % (teams - 1);
  if (away >= home) ++away;
  return {home, away};
}

// Squad indices that trade places between the starting XI and the bench.
inline constexpr std::array<std::pair<int, int>, 3> kRotationPairs{{{1, 11}, {7, 12}, {10, 13}}};

// Every other appearance a team starts its bench players so per-player volumes stay comparable.
inline std::vector<PlayerId> rotated_squad(std::vector<PlayerId> squad, int appearance) {
  if (appearance % 2 == 1) {
    for (auto [a, b] : kRotationPairs) {
      if (static_cast<std::size_t>(b) < squad.size()) {
        std::swap(squad[static_cast<std::size_t>(a)], squad[static_cast<std::size_t>(b)]);
      }
    }
  }
  return squad;
}

inline GeneratedCorpus generate_corpus(const SyntheticLeague& league, const CorpusOptions& opt) {
  GeneratedCorpus gc;
  std::vector<int> appearances(static_cast<std::size_t>(league.team_count), 0);
  for (int m = 0; m < opt.matches; ++m) {
    auto [h, a] = fixture(m, league.team_count);
    auto home = rotated_squad(league.team(h), appearances[static_cast<std::size_t>(h)]++);
    auto away = rotated_squad(league.team(a), appearances[static_cast<std::size_t>(a)]++);
    MatchOptions mo;
    mo.half_seconds = opt.half_seconds;
    mo.home_bench.assign(home.begin() + kPlayersPerSide, home.end());
    mo.away_bench.assign(away.begin() + kPlayersPerSide, away.end());
    mo.match_id = "synth-" + std::to_string(opt.seed) + "-" + std::to_string(m);
    home.resize(kPlayersPerSide);
    away.resize(kPlayersPerSide);
    auto gm = generate_match(league, home, away,
                             derive_seed(opt.seed, static_cast<std::uint64_t>(m)), mo);
    for (auto& ep : gm.episodes) gc.episodes.push_back(std::move(ep));
    gc.restart_count += gm.book.restart_count;
    for (const auto& [p, c] : gm.book.type_counts) {
      auto& dst = gc.type_counts[p];
      auto& mass = gc.expected_type_mass[p];
      if (dst.empty()) {
        dst.assign(c.size(), 0);
        mass.assign(c.size(), 0.0);
      }
      const auto& src_mass = gm.book.expected_type_mass.at(p);
      for (std::size_t k = 0; k < c.size(); ++k) {
        dst[k] += c[k];
        mass[k] += src_mass[k];
      }
      gc.success_counts[p] += gm.book.success_counts.at(p);
    }
  }
  gc.match_count = static_cast<std::size_t>(opt.matches);
  return gc;
}

inline nlohmann::json ground_truth_json(const SyntheticLeague& league) {
  const auto& types = spadl_action_types();
  nlohmann::json archetypes = nlohmann::json::array();
  for (const auto& a : league.archetypes) {
    nlohmann::json dist = nlohmann::json::object();
    for (int z = 0; z < kZones; ++z) {
      nlohmann::json zone = nlohmann::json::object();
      for (std::size_t k = 0; k < types.size(); ++k) {
        double p = a.action_dist[static_cast<std::size_t>(z)][k];
        if (p > 0.0) zone[types[k]] = p;
      }
      dist[std::to_string(z)] = zone;
    }
    nlohmann::json rates = nlohmann::json::object();
    for (std::size_t k = 0; k < types.size(); ++k) {
      if (a.success_rate[k] > 0.0) rates[types[k]] = a.success_rate[k];
    }
    archetypes.push_back({{"name", a.name},
                          {"role_class", to_string(a.role_class)},
                          {"action_dist_by_zone", dist},
                          {"success_rate", rates}});
  }
  nlohmann::json players = nlohmann::json::array();
  for (const auto& p : league.players) {
    const auto& a = league.archetypes[static_cast<std::size_t>(p.archetype)];
    players.push_back({{"player_id", p.id},
                       {"team", p.team},
                       {"archetype", a.name},
                       {"role_class", to_string(a.role_class)}});
  }
  return {{"seed", league.rng_seed},
          {"failure_penalty", league.failure_penalty},
          {"value_surface", {{"cols", kGridCols}, {"rows", kGridRows},
                             {"units_per_one", kValueUnitsPerOne},
                             {"phi_units", league.value_surface.units},
                             {"goal_units", league.value_surface.goal_units}}},
          {"archetypes", archetypes},
          {"players", players}};
}

// ----------------------------------------------------------------------------
// Monte-Carlo residual-value oracle

struct OracleState {
  std::array<PlayerId, kPlayersOnPitch> lineup{};
  int actor_slot = 0;
  int col = 9;
  int row = 3;
  // When set, the first action is this one and only its outcome is random.
  std::optional<ForcedAction> first;
};

struct OracleEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

// Mean suffix-OBV over rollouts in which `player` occupies the acting slot.
inline OracleEstimate oracle_residual_value(const SyntheticLeague& league, const OracleState& state,
                                            PlayerId player, int horizon, std::size_t n_rollouts,
                                            std::uint64_t seed = 0) {
  if (n_rollouts < 1) throw Error(Errc::malformed_input, "n_rollouts must be >= 1");
  league.player(player);
  for (std::size_t s = 0; s < kPlayersOnPitch; ++s) {
    if (static_cast<int>(s) != state.actor_slot && state.lineup[s] == player) {
      throw Error(Errc::malformed_input, "player already occupies another slot");
    }
  }
  if (state.first && (state.first->type < 0 || state.first->type >= type_count() ||
                      (state.first->success && state.first->type == type_index("foul")))) {
    throw Error(Errc::malformed_input, "forced first action is not a valid outcome");
  }
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t r = 0; r < n_rollouts; ++r) {
    Rng rng(derive_seed(seed, r));
    PlayState ps;
    ps.lineup = state.lineup;
    ps.lineup[static_cast<std::size_t>(state.actor_slot)] = player;
    ps.actor_slot = state.actor_slot;
    ps.col = state.col;
    ps.row = state.row;
    double total = 0.0;
    for (int t = 0; t < horizon; ++t) {
      StepOutcome o = step(league, ps, rng, t == 0 && state.first ? &*state.first : nullptr);
      total += o.action.obv;
      if (o.end != EpisodeEnd::none) break;
    }
    sum += total;
    sum_sq += total * total;
  }
  OracleEstimate est;
  est.n = n_rollouts;
  est.mean = sum / static_cast<double>(n_rollouts);
  if (n_rollouts > 1) {
    double var = (sum_sq - sum * est.mean) / static_cast<double>(n_rollouts - 1);
    est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(n_rollouts));
  }
  return est;
}

}  // namespace scoutgpt::synth

#endif  // SCOUTGPT_SYNTH_HPP_
