#include <gtest/gtest.h>

#include "scoutgpt/segment.hpp"
#include "test_support.hpp"

namespace scoutgpt {
namespace {

RawMatch ten_action_match() {
  RawMatch m;
  m.match_id = "fixture";
  m.lineup = testing::make_context(1).on_pitch;
  for (int i = 0; i < 10; ++i) {
    RawAction ra;
    ra.action.actor_id = m.lineup[static_cast<std::size_t>(i % 22)];
    ra.action.action_type = "pass";
    ra.action.x = 10.0 + i;
    ra.action.y = 20.0;
    ra.action.success = true;
    ra.clock_s = 100.0 + 4.0 * i;
    m.actions.push_back(ra);
  }
  return m;
}

TEST(Segment, NoMarkersGivesOneEpisode) {
  auto m = ten_action_match();
  auto eps = segment_episodes(m);
  ASSERT_EQ(eps.size(), 1u);
  EXPECT_EQ(eps[0].actions.size(), 10u);
  EXPECT_EQ(eps[0].start_reason, StartReason::kickoff);
  EXPECT_EQ(eps[0].context.minute, 1);
  EXPECT_EQ(eps[0].actions[0].delta_t, 0.0);
  EXPECT_EQ(eps[0].actions[1].delta_t, 4.0);
  for (const auto& ep : eps) validate_episode(ep);
}

TEST(Segment, SubstitutionSplitsAfterSixthAction) {
  auto m = ten_action_match();
  MatchMarker sub;
  sub.before_action = 6;
  sub.kind = MarkerKind::substitution;
  sub.side = TeamSide::home;
  sub.player_out = m.lineup[10];  // does not act in actions 6..9
  sub.player_in = 999;
  m.markers.push_back(sub);
  auto eps = segment_episodes(m);
  ASSERT_EQ(eps.size(), 2u);
  EXPECT_EQ(eps[0].actions.size(), 6u);
  EXPECT_EQ(eps[1].actions.size(), 4u);
  EXPECT_EQ(eps[1].start_reason, StartReason::personnel_change);
  EXPECT_EQ(eps[1].context.on_pitch[10], 999u);
  EXPECT_EQ(eps[1].actions[0].delta_t, 0.0);
  for (const auto& ep : eps) validate_episode(ep);
}

TEST(Segment, GoalsCardsAndRestartsUpdateContext) {
  auto m = ten_action_match();
  m.markers.push_back({3, MarkerKind::goal, StartReason::goal_restart, TeamSide::away});
  m.markers.push_back({3, MarkerKind::yellow_card, StartReason::set_piece, TeamSide::home});
  m.markers.push_back({7, MarkerKind::restart, StartReason::period_start});
  auto eps = segment_episodes(m);
  ASSERT_EQ(eps.size(), 3u);
  EXPECT_EQ(eps[1].start_reason, StartReason::goal_restart);
  EXPECT_EQ(eps[1].context.away_goals, 1);
  EXPECT_EQ(eps[1].context.home_yellows, 1);
  EXPECT_EQ(eps[2].start_reason, StartReason::period_start);
  EXPECT_EQ(eps[2].context.away_goals, 1);
}

TEST(Segment, ActorNotOnPitchNamesActionIndex) {
  auto m = ten_action_match();
  m.actions[4].action.actor_id = 4242;
  try {
    segment_episodes(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::malformed_input);
    EXPECT_EQ(e.position(), std::optional<std::size_t>(4));
  }
}

TEST(Segment, SubstitutedPlayerMayNotActAfterwards) {
  auto m = ten_action_match();
  MatchMarker sub;
  sub.before_action = 2;
  sub.kind = MarkerKind::substitution;
  sub.player_out = m.lineup[5];
  sub.player_in = 777;
  m.markers.push_back(sub);
  EXPECT_THROW(segment_episodes(m), Error);  // action 5 is by lineup[5]
}

TEST(Segment, DismissalStartsEpisodeAndCountsRed) {
  auto m = ten_action_match();
  MatchMarker red;
  red.before_action = 8;
  red.kind = MarkerKind::dismissal;
  red.side = TeamSide::home;
  red.player_out = m.lineup[3];
  m.markers.push_back(red);
  auto eps = segment_episodes(m);
  ASSERT_EQ(eps.size(), 2u);
  EXPECT_EQ(eps[1].context.home_reds, 1);
  EXPECT_EQ(eps[1].start_reason, StartReason::personnel_change);

  m.actions[9].action.actor_id = m.lineup[3];
  EXPECT_THROW(segment_episodes(m), Error);
}

TEST(Segment, RejectsTimeDisorder) {
  auto m = ten_action_match();
  m.actions[6].clock_s = 0.0;
  EXPECT_THROW(segment_episodes(m), Error);
}

}  // namespace
}  // namespace scoutgpt
