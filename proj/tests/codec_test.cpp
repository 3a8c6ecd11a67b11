#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "scoutgpt/codec.hpp"
#include "scoutgpt/corpus.hpp"
#include "scoutgpt/discretize.hpp"
#include "scoutgpt/vocabulary.hpp"
#include "test_support.hpp"

namespace scoutgpt {
namespace {

using testing::make_context;
using testing::random_episode;

Vocabulary test_vocab() { return Vocabulary(testing::player_range(1000, 40)); }

TEST(Discretize, MidPitch) {
  EXPECT_EQ(discretize(Attribute::x, 52.5), 52);
  EXPECT_DOUBLE_EQ(undiscretize(Attribute::x, 52), 52.5);
  EXPECT_EQ(discretize(Attribute::robv, 0.0), 100);
  EXPECT_DOUBLE_EQ(undiscretize(Attribute::robv, 100), 0.0);
}

TEST(Discretize, Clipping) {
  EXPECT_EQ(discretize(Attribute::x, 104.99), 104);
  EXPECT_EQ(discretize(Attribute::x, -3.0), 0);
  EXPECT_EQ(discretize(Attribute::y, 70.0), 67);
  EXPECT_EQ(discretize(Attribute::delta_t, 75.0), 60);
  EXPECT_EQ(discretize(Attribute::delta_t, 2.4), 2);
  EXPECT_EQ(discretize(Attribute::robv, 3.0), 200);
  EXPECT_EQ(discretize(Attribute::robv, -1.5), 0);
  EXPECT_EQ(discretize(Attribute::robv, 0.254), 125);
  EXPECT_EQ(discretize(Attribute::minute, 131.0), 130);
  EXPECT_EQ(discretize(Attribute::counter, 17.0), 15);
}

TEST(Discretize, NonFiniteIsDomainError) {
  for (double v : {std::numeric_limits<double>::quiet_NaN(),
                   std::numeric_limits<double>::infinity()}) {
    try {
      discretize(Attribute::x, v);
      FAIL() << "expected domain error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::domain);
    }
  }
  EXPECT_THROW(undiscretize(Attribute::y, 68), Error);
}

TEST(Discretize, CoordinateRoundTripWithinHalfMeter) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, kPitchLength);
  for (int i = 0; i < 10000; ++i) {
    double x = ux(rng);
    EXPECT_LE(std::abs(undiscretize(Attribute::x, discretize(Attribute::x, x)) - x), 0.5);
  }
}

TEST(RobvTargets, SuffixSums) {
  std::vector<Action> actions(3);
  actions[0].obv = 0.1;
  actions[1].obv = -0.05;
  actions[2].obv = 0.2;
  auto t = compute_robv_targets(actions);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_NEAR(t[0], 0.25, 1e-15);
  EXPECT_NEAR(t[1], 0.15, 1e-15);
  EXPECT_EQ(t[2], 0.2);

  std::vector<Action> zeros(7);
  for (double v : compute_robv_targets(zeros)) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(compute_robv_targets(std::vector<Action>{}).empty());
}

TEST(RobvTargets, TelescopingIsExactForDyadicValues) {
  std::mt19937_64 rng(3);
  auto ep = random_episode(rng, make_context(), 50);
  auto t = compute_robv_targets(ep.actions);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) EXPECT_EQ(t[i] - t[i + 1], ep.actions[i].obv);
  EXPECT_EQ(t.back(), ep.actions.back().obv);
}

TEST(Vocabulary, BlocksAreDisjointAndCover) {
  auto vocab = test_vocab();
  EXPECT_EQ(vocab.size(), 611 + 40);
  for (Token t = 0; t < vocab.size(); ++t) {
    int owners = 0;
    for (Block b : kAllBlocks) owners += vocab.in_block(t, b) ? 1 : 0;
    ASSERT_EQ(owners, 1) << "token " << t;
    auto [block, value] = vocab.decode(t);
    EXPECT_EQ(vocab.token(block, value), t);
  }
}

TEST(Vocabulary, ManifestRoundTripKeepsHash) {
  auto vocab = test_vocab();
  auto again = Vocabulary::from_manifest(nlohmann::json::parse(vocab.manifest().dump()));
  EXPECT_EQ(again.hash(), vocab.hash());
  EXPECT_NE(Vocabulary(testing::player_range(1000, 41)).hash(), vocab.hash());
  EXPECT_THROW(vocab.player_token(5), Error);
  EXPECT_THROW(vocab.player_of(vocab.offset(Block::x)), Error);
}

TEST(Encode, LayoutForThreeEvents) {
  std::mt19937_64 rng(1);
  auto vocab = test_vocab();
  auto ep = random_episode(rng, make_context(), 3);
  auto enc = encode_episode(ep, vocab, {.block_size = min_block_size(100), .max_events = 100});
  EXPECT_EQ(enc.length, 1 + 29 + 24 + 1);
  EXPECT_EQ(enc.length, 55);
  EXPECT_EQ(enc.tokens.size(), static_cast<std::size_t>(min_block_size(100)));
  EXPECT_EQ(enc.tokens[0], kBos);
  EXPECT_EQ(enc.tokens[54], kEpisodeEnd);
  EXPECT_EQ(enc.tokens[55], kPad);
  EXPECT_EQ(enc.event_boundaries, (std::vector<int>{30, 38, 46}));
  // Context: 22 players, minute, then 6 counters.
  for (int i = 1; i <= 22; ++i) EXPECT_EQ(enc.slot_kind[i], Block::player);
  EXPECT_EQ(enc.slot_kind[23], Block::minute);
  for (int i = 24; i < 30; ++i) EXPECT_EQ(enc.slot_kind[i], Block::count);
  EXPECT_EQ(enc.tokens[23], vocab.token(Block::minute, ep.context.minute));
  EXPECT_EQ(enc.tokens[24], vocab.token(Block::count, 1));
  EXPECT_EQ(enc.tokens[25], vocab.token(Block::count, 2));
  EXPECT_EQ(enc.tokens[28], vocab.token(Block::count, 3));
}

TEST(Encode, TruncationKeepsMostRecentEventsAndFullTailValue) {
  std::mt19937_64 rng(2);
  auto vocab = test_vocab();
  auto ep = random_episode(rng, make_context(), 120);
  auto enc = encode_episode(ep, vocab, {.block_size = min_block_size(100), .max_events = 100});
  EXPECT_EQ(enc.first_event, 20u);
  EXPECT_EQ(enc.event_boundaries.size(), 100u);
  auto dec = decode_episode(enc, vocab);
  ASSERT_EQ(dec.actions.size(), 100u);
  EXPECT_EQ(dec.actions.front().actor_id, ep.actions[20].actor_id);
  EXPECT_EQ(dec.actions.front().action_type, ep.actions[20].action_type);
  EXPECT_EQ(discretize(Attribute::x, dec.actions.front().x), discretize(Attribute::x, ep.actions[20].x));
  // The rOBV token of the first kept event carries the suffix sum from index 20.
  auto targets = compute_robv_targets(ep.actions);
  EXPECT_EQ(enc.tokens[30 + kRobvSlot], vocab.token(Block::robv, discretize(Attribute::robv, targets[20])));
}

TEST(Encode, UnknownPlayerAndSmallBlock) {
  std::mt19937_64 rng(5);
  auto ep = random_episode(rng, make_context(5000), 4);
  try {
    encode_episode(ep, test_vocab(), {.block_size = 512, .max_events = 60});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_player);
  }
  auto ok = random_episode(rng, make_context(), 4);
  EXPECT_THROW(encode_episode(ok, test_vocab(), {.block_size = 100, .max_events = 20}), Error);
}

TEST(Encode, GrammarAndLossMaskProperties) {
  std::mt19937_64 rng(17);
  auto vocab = test_vocab();
  const EncodeOptions opt{.block_size = min_block_size(20), .max_events = 20};
  for (int trial = 0; trial < 200; ++trial) {
    auto ep = random_episode(rng, make_context(), 1 + static_cast<int>(rng() % 30));
    auto enc = encode_episode(ep, vocab, opt);
    ASSERT_EQ(enc.tokens.size(), enc.loss_mask.size());
    for (std::size_t i = 0; i < enc.tokens.size(); ++i) {
      ASSERT_TRUE(vocab.in_block(enc.tokens[i], enc.slot_kind[i])) << i;
    }
    for (int start : enc.event_boundaries) {
      for (int s = 0; s < kEventTokens; ++s) {
        ASSERT_EQ(enc.slot_kind[static_cast<std::size_t>(start + s)], kEventSlots[s]);
      }
    }
    for (std::size_t i = 0; i + 1 < enc.tokens.size(); ++i) {
      const Block next = enc.slot_kind[i + 1];
      const bool attribute = next != Block::special && next != Block::player &&
                             next != Block::minute && next != Block::count;
      const bool expected = attribute || enc.tokens[i + 1] == kEpisodeEnd;
      ASSERT_EQ(enc.loss_mask[i] != 0, expected) << "position " << i;
      if (next == Block::player) ASSERT_EQ(enc.loss_mask[i], 0);
    }
    EXPECT_EQ(enc.loss_mask.back(), 0);
  }
}

TEST(Decode, RoundTripOnDiscretizedDomain) {
  std::mt19937_64 rng(23);
  auto vocab = test_vocab();
  const EncodeOptions opt{.block_size = min_block_size(40), .max_events = 40};
  for (int trial = 0; trial < 300; ++trial) {
    auto ep = random_episode(rng, make_context(), 1 + static_cast<int>(rng() % 40));
    auto enc = encode_episode(ep, vocab, opt);
    auto dec = decode_episode(enc, vocab);
    auto expect = testing::discretized(ep);
    ASSERT_EQ(dec.context, expect.context);
    ASSERT_EQ(dec.actions.size(), expect.actions.size());
    for (std::size_t i = 0; i < dec.actions.size(); ++i) {
      const auto& a = dec.actions[i];
      const auto& b = expect.actions[i];
      ASSERT_EQ(a.actor_id, b.actor_id);
      ASSERT_EQ(a.team_side, b.team_side);
      ASSERT_EQ(a.action_type, b.action_type);
      ASSERT_EQ(a.x, b.x);
      ASSERT_EQ(a.y, b.y);
      ASSERT_EQ(a.delta_t, b.delta_t);
      ASSERT_EQ(a.success, b.success);
    }
    // Fixed point: re-encoding the decoded episode reproduces the tokens.
    auto again = encode_episode(dec, vocab, opt);
    ASSERT_EQ(again.tokens, enc.tokens);
    ASSERT_EQ(again.loss_mask, enc.loss_mask);
  }
}

TEST(Decode, HandBuiltSingleEvent) {
  auto vocab = test_vocab();
  auto ctx = make_context();
  std::vector<Token> toks = {kBos};
  append_context(toks, ctx, vocab);
  toks.insert(toks.end(), {vocab.player_token(1012), vocab.token(Block::team, 1),
                           vocab.type_token("shot"), vocab.token(Block::x, 97),
                           vocab.token(Block::y, 33), vocab.token(Block::delta_t, 0),
                           vocab.token(Block::success, 1), vocab.token(Block::robv, 140),
                           kEpisodeEnd, kPad, kPad, kPad});
  auto ep = decode_tokens(toks, vocab);
  EXPECT_EQ(ep.context, ctx);
  ASSERT_EQ(ep.actions.size(), 1u);
  const Action& a = ep.actions[0];
  EXPECT_EQ(a.actor_id, 1012u);
  EXPECT_EQ(a.team_side, TeamSide::away);
  EXPECT_EQ(a.action_type, "shot");
  EXPECT_EQ(a.x, 97.5);
  EXPECT_EQ(a.y, 33.5);
  EXPECT_EQ(a.delta_t, 0.0);
  EXPECT_TRUE(a.success);
  EXPECT_NEAR(a.obv, 0.4, 1e-12);
}

TEST(Decode, PadTailAddsNoEvents) {
  auto vocab = test_vocab();
  std::vector<Token> toks = {kBos};
  append_context(toks, make_context(), vocab);
  toks.resize(200, kPad);
  EXPECT_TRUE(decode_tokens(toks, vocab).actions.empty());
}

TEST(Decode, GrammarViolationReportsPosition) {
  std::mt19937_64 rng(9);
  auto vocab = test_vocab();
  auto enc = encode_episode(random_episode(rng, make_context(), 3), vocab,
                            {.block_size = 64, .max_events = 4});
  auto toks = enc.tokens;
  toks[30 + 3] = vocab.token(Block::y, 10);  // x slot of the first event
  try {
    decode_tokens(toks, vocab);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::grammar_violation);
    EXPECT_EQ(e.position(), std::optional<std::size_t>(33));
  }
  auto bad = enc;
  bad.slot_kind[5] = Block::robv;
  EXPECT_THROW(decode_episode(bad, vocab), Error);
}

TEST(Corpus, StatsAndNdjsonRoundTrip) {
  EXPECT_EQ(corpus_stats({}).episode_count, 0u);
  EXPECT_EQ(corpus_stats({}).mean_events_per_episode, 0.0);

  std::mt19937_64 rng(4);
  std::vector<Episode> eps = {random_episode(rng, make_context(), 10),
                              random_episode(rng, make_context(2000), 30)};
  eps[0].source_match_id = "a";
  eps[1].source_match_id = "b";
  auto s = corpus_stats(eps);
  EXPECT_EQ(s.match_count, 2u);
  EXPECT_EQ(s.episode_count, 2u);
  EXPECT_DOUBLE_EQ(s.mean_events_per_episode, 20.0);
  EXPECT_EQ(s.player_count, 44u);

  std::stringstream io;
  write_corpus(io, eps);
  auto back = read_corpus(io);
  EXPECT_EQ(back, eps);

  std::stringstream broken("{\"match_id\": 3}\n");
  EXPECT_THROW(read_corpus(broken), Error);
}

}  // namespace
}  // namespace scoutgpt
