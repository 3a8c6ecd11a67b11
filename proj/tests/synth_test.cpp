#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>

#include "scoutgpt/codec.hpp"
#include "scoutgpt/corpus.hpp"
#include "scoutgpt/synth.hpp"

namespace scoutgpt::synth {
namespace {

std::vector<PlayerId> starters(const SyntheticLeague& league, int team) {
  auto ids = league.team(team);
  ids.resize(kPlayersPerSide);
  return ids;
}

std::string serialize(const std::vector<Episode>& eps) {
  std::ostringstream os;
  write_corpus(os, eps);
  return os.str();
}

TEST(Synth, DefaultArchetypesAreValid) {
  auto league = make_league();
  EXPECT_EQ(league.archetypes.size(), 6u);
  EXPECT_EQ(league.players.size(), 56u);
  for (const auto& a : league.archetypes) EXPECT_NO_THROW(validate_archetype(a));
}

TEST(Synth, SameSeedGivesIdenticalCorpus) {
  auto league = make_league();
  CorpusOptions opt{.matches = 4, .seed = 99};
  auto a = generate_corpus(league, opt);
  auto b = generate_corpus(league, opt);
  EXPECT_EQ(serialize(a.episodes), serialize(b.episodes));
  opt.seed = 100;
  EXPECT_NE(serialize(generate_corpus(league, opt).episodes), serialize(a.episodes));
}

TEST(Synth, RestartCountPredictsEpisodeCount) {
  auto league = make_league();
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    auto home = league.team(0), away = league.team(1);
    MatchOptions mo;
    mo.home_bench.assign(home.begin() + 11, home.end());
    mo.away_bench.assign(away.begin() + 11, away.end());
    home.resize(11);
    away.resize(11);
    auto gm = generate_match(league, home, away, seed, mo);
    EXPECT_GT(gm.book.restart_count, 10u);
    EXPECT_EQ(gm.episodes.size(), gm.book.restart_count + 1);
    EXPECT_EQ(segment_episodes(gm.raw).size(), gm.book.restart_count + 1);
  }
}

TEST(Synth, EpisodesSatisfyCodecInvariants) {
  auto league = make_league();
  auto corpus = generate_corpus(league, {.matches = 6, .seed = 5});
  Vocabulary vocab(player_universe(corpus.episodes));
  std::size_t personnel = 0;
  for (const auto& ep : corpus.episodes) {
    ASSERT_NO_THROW(validate_episode(ep));
    auto enc = encode_episode(ep, vocab, {.block_size = 512, .max_events = 60});
    ASSERT_NO_THROW(decode_episode(enc, vocab));
    personnel += ep.start_reason == StartReason::personnel_change ? 1 : 0;
    for (const auto& a : ep.actions) {
      ASSERT_EQ(a.obv * kValueUnitsPerOne, std::round(a.obv * kValueUnitsPerOne));
    }
  }
  EXPECT_GT(personnel, 0u);
  EXPECT_EQ(corpus_stats(corpus.episodes).match_count, 6u);
}

TEST(Synth, DegenerateArchetypeOnlyPasses) {
  auto league = make_league();
  Archetype& pm = league.archetypes[kPlaymaker];
  for (auto& dist : pm.action_dist) {
    std::fill(dist.begin(), dist.end(), 0.0);
    dist[static_cast<std::size_t>(type_index("pass"))] = 1.0;
  }
  validate_archetype(pm);
  auto corpus = generate_corpus(league, {.matches = 4, .seed = 8});
  std::size_t seen = 0;
  for (const auto& ep : corpus.episodes) {
    for (const auto& a : ep.actions) {
      if (league.player(a.actor_id).archetype == kPlaymaker) {
        EXPECT_EQ(a.action_type, "pass");
        ++seen;
      }
    }
  }
  EXPECT_GT(seen, 100u);
}

TEST(Synth, ValueTelescopesWithinSuccessfulRuns) {
  auto league = make_league();
  auto home = starters(league, 2), away = starters(league, 3);
  auto gm = generate_match(league, home, away, 77);
  const auto& prov = gm.book.provenance;
  std::size_t runs = 0;
  for (std::size_t i = 0; i < gm.raw.actions.size();) {
    const auto& a = gm.raw.actions[i].action;
    if (!a.success || is_shot(type_index(a.action_type))) {
      ++i;
      continue;
    }
    // Maximal run of successful, non-shot actions by one team with continuous ball path.
    std::size_t j = i;
    double sum = 0.0;
    while (j < gm.raw.actions.size()) {
      const auto& b = gm.raw.actions[j].action;
      if (!b.success || is_shot(type_index(b.action_type)) || b.team_side != a.team_side) break;
      if (j > i && (prov[j].start_col != prov[j - 1].end_col ||
                    prov[j].start_row != prov[j - 1].end_row)) {
        break;
      }
      sum += b.obv;
      ++j;
    }
    EXPECT_EQ(sum, prov[j - 1].phi_end - prov[i].phi_start);
    runs += j - i > 1 ? 1 : 0;
    i = j;
  }
  EXPECT_GT(runs, 20u);
}

TEST(Synth, EmpiricalActionFrequenciesMatchArchetypes) {
  auto league = make_league();
  auto corpus = generate_corpus(league, {.matches = 200, .seed = 2024});
  double worst = 0.0;
  for (const auto& [player, counts] : corpus.type_counts) {
    const auto& mass = corpus.expected_type_mass.at(player);
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    ASSERT_GT(total, 0.0) << player;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      double gap = std::abs(static_cast<double>(counts[k]) / total - mass[k] / total);
      worst = std::max(worst, gap);
      EXPECT_LE(gap, 0.02) << "player " << player << " type " << spadl_action_types()[k];
    }
  }
  RecordProperty("worst_gap", std::to_string(worst));
  std::printf("worst per-type frequency gap: %.4f\n", worst);
}

TEST(Synth, DuplicateLineupRejected) {
  auto league = make_league();
  auto home = starters(league, 0), away = starters(league, 1);
  away[3] = home[2];
  EXPECT_THROW(generate_match(league, home, away, 1), Error);
  away = starters(league, 1);
  away[4] = 99999;
  EXPECT_THROW(generate_match(league, home, away, 1), Error);
}

OracleState attacking_state(const SyntheticLeague& league) {
  OracleState s;
  auto home = starters(league, 0), away = starters(league, 1);
  std::copy(home.begin(), home.end(), s.lineup.begin());
  std::copy(away.begin(), away.end(), s.lineup.begin() + 11);
  s.actor_slot = 7;  // playmaker slot
  s.col = 9;
  s.row = 3;
  return s;
}

TEST(Oracle, ZeroSurfaceGivesZero) {
  auto league = make_league();
  league.value_surface = ValueSurface::zero();
  auto est = oracle_residual_value(league, attacking_state(league), 307, 40, 500);
  EXPECT_EQ(est.mean, 0.0);
  EXPECT_EQ(est.std_error, 0.0);
}

TEST(Oracle, DeterministicDynamicsHaveZeroVariance) {
  auto league = make_league();
  Archetype det = league.archetypes[kPlaymaker];
  for (auto& dist : det.action_dist) {
    std::fill(dist.begin(), dist.end(), 0.0);
    dist[static_cast<std::size_t>(type_index("pass"))] = 1.0;
  }
  std::fill(det.success_rate.begin(), det.success_rate.end(), 1.0);
  for (auto& moves : det.zone_transition) moves = {Move{1, 0, 1.0}};
  validate_archetype(det);
  league.archetypes.assign(league.archetypes.size(), det);

  auto state = attacking_state(league);
  state.col = 2;
  auto one = oracle_residual_value(league, state, league.players[7].id, 6, 1, 5);
  auto many = oracle_residual_value(league, state, league.players[7].id, 6, 200, 6);
  EXPECT_EQ(many.mean, one.mean);
  EXPECT_EQ(many.std_error, 0.0);
  // Six one-column moves from column 2 reach column 8 on row 3.
  EXPECT_EQ(one.mean, league.value_surface.at(8, 3) - league.value_surface.at(2, 3));
}

TEST(Oracle, DribblerOutvaluesPasserDefenderInAttackingZone) {
  auto league = make_league();
  auto state = attacking_state(league);
  const PlayerId dribbler = 308;  // team 2, squad index 8
  const PlayerId defender = 401;  // team 3, squad index 1
  ASSERT_EQ(league.player(dribbler).archetype, kDribblerForward);
  ASSERT_EQ(league.player(defender).archetype, kPasserDefender);
  auto d = oracle_residual_value(league, state, dribbler, 60, 10000, 1);
  auto p = oracle_residual_value(league, state, defender, 60, 10000, 1);
  EXPECT_GT(d.mean - 1.96 * d.std_error, p.mean + 1.96 * p.std_error)
      << d.mean << " +- " << d.std_error << " vs " << p.mean << " +- " << p.std_error;
}

TEST(Oracle, ForcedFirstActionFixesItsOutcome) {
  auto league = make_league();
  auto state = attacking_state(league);
  // A missed shot ends the episode, so every rollout returns the failure penalty.
  state.first = ForcedAction{type_index("shot"), false};
  const auto miss = oracle_residual_value(league, state, 308, 60, 50, 3);
  const int units = league.value_surface.units_at(state.col, state.row);
  EXPECT_EQ(miss.mean, -std::round(league.failure_penalty * units) / kValueUnitsPerOne);
  EXPECT_EQ(miss.std_error, 0.0);
  // Same recorded pass, different passer: the forward moves the ball further up.
  state.first = ForcedAction{type_index("pass"), true};
  const auto fwd = oracle_residual_value(league, state, 308, 60, 10000, 4);
  const auto def = oracle_residual_value(league, state, 401, 60, 10000, 4);
  EXPECT_GT(fwd.mean - 1.96 * fwd.std_error, def.mean + 1.96 * def.std_error);
  state.first = ForcedAction{type_index("foul"), true};
  EXPECT_THROW(oracle_residual_value(league, state, 308, 10, 10), Error);
}

TEST(Oracle, InputErrors) {
  auto league = make_league();
  auto state = attacking_state(league);
  EXPECT_THROW(oracle_residual_value(league, state, 31337, 10, 10), Error);
  EXPECT_THROW(oracle_residual_value(league, state, 308, 10, 0), Error);
  EXPECT_THROW(oracle_residual_value(league, state, state.lineup[0], 10, 10), Error);
}

}  // namespace
}  // namespace scoutgpt::synth
