#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "scoutgpt/checkpoint.hpp"
#include "scoutgpt/corpus.hpp"
#include "scoutgpt/metrics.hpp"
#include "scoutgpt/synth.hpp"
#include "scoutgpt/trainer.hpp"
#include "test_support.hpp"

namespace scoutgpt {
namespace {

ModelConfig small_config(int vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.block_size = 96;
  c.n_layers = 2;
  c.n_heads = 2;
  c.embed_dim = 32;
  return c;
}

const EncodeOptions kOpt{.block_size = 96, .max_events = 8};

struct Fixture {
  std::vector<Episode> episodes;
  Vocabulary vocab;
};

const Fixture& synthetic() {
  static const Fixture f = [] {
    auto league = synth::make_league();
    auto corpus = synth::generate_corpus(league, {.matches = 4, .seed = 3});
    Fixture out;
    out.vocab = Vocabulary(player_universe(corpus.episodes));
    out.episodes = std::move(corpus.episodes);
    return out;
  }();
  return f;
}

TEST(Trainer, ZeroStepsLeavesParamsUnchanged) {
  const auto& f = synthetic();
  auto p = init_params<float>(small_config(f.vocab.size()), 1);
  const auto before = p;
  const auto ts = make_training_set(f.episodes, f.vocab, kOpt);
  TrainConfig cfg;
  cfg.steps = 0;
  const auto r = train(p, f.vocab.hash(), ts, cfg);
  EXPECT_EQ(r.steps_done, 0);
  EXPECT_TRUE(std::equal(p.values().begin(), p.values().end(), before.values().begin()));
}

TEST(Trainer, RefusesMismatchedVocabulary) {
  const auto& f = synthetic();
  auto p = init_params<float>(small_config(f.vocab.size()), 1);
  const auto ts = make_training_set(f.episodes, f.vocab, kOpt);
  Vocabulary other(testing::player_range(1, 56));
  try {
    train(p, other.hash(), ts, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::vocabulary_mismatch);
  }
}

TEST(Trainer, InitialLossNearLogVocabOnSyntheticBatch) {
  const auto& f = synthetic();
  ModelConfig cfg;
  cfg.vocab_size = f.vocab.size();
  cfg.block_size = 192;
  const auto p = init_params<float>(cfg, 7);
  auto ts = make_training_set(f.episodes, f.vocab, {.block_size = 192, .max_events = 20});
  ts.sequences.resize(32);
  const double loss = sequence_loss(p, std::span<const Sequence>(ts.sequences));
  EXPECT_NEAR(loss / std::log(static_cast<double>(f.vocab.size())), 1.0, 0.05) << loss;
}

TEST(Trainer, SameSeedGivesIdenticalLossCurve) {
  const auto& f = synthetic();
  const auto ts = make_training_set(f.episodes, f.vocab, kOpt);
  TrainConfig cfg;
  cfg.steps = 12;
  cfg.batch_size = 4;
  cfg.eval_interval = 4;
  auto run = [&](std::uint64_t seed) {
    cfg.seed = seed;
    auto p = init_params<float>(small_config(f.vocab.size()), seed);
    auto r = train(p, f.vocab.hash(), ts, cfg);
    return std::make_pair(r.losses, model_hash(p));
  };
  const auto a = run(5), b = run(5), c = run(6);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first, c.first);
  EXPECT_LT(a.first.back(), a.first.front());
}

TEST(Trainer, AdamWFirstStepIsLearningRateSizedAndDecaysMatrices) {
  ModelConfig mc = small_config(40);
  mc.n_layers = 0;
  ModelParams<float> p(mc);
  for (auto& w : p.values()) w = 1.0f;
  auto g = p.zeros_like();
  for (auto& x : g.values()) x = 0.5f;
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.5;
  cfg.grad_clip_norm = 1e9;
  AdamW opt(p, cfg);
  opt.step(p, g);
  // Adam's bias-corrected first step moves each weight by lr * sign(g), then decay scales by (1 - lr*wd).
  EXPECT_NEAR(p.token_embedding()(0, 0), (1.0 - 0.01) * (1.0 - 0.005), 1e-6);
  EXPECT_NEAR(p.vec(p.layout().final_gain)[0], 1.0 - 0.01, 1e-6);
}

TEST(Trainer, SplitByMatchIsDisjointAndComplete) {
  const auto& f = synthetic();
  const auto s = split_by_match(f.episodes, 0.25, 9);
  EXPECT_EQ(s.train.size() + s.heldout.size(), f.episodes.size());
  std::set<std::string> a, b;
  for (const auto& e : s.train) a.insert(e.source_match_id);
  for (const auto& e : s.heldout) b.insert(e.source_match_id);
  EXPECT_EQ(b.size(), 1u);
  for (const auto& m : b) EXPECT_EQ(a.count(m), 0u);
  const auto again = split_by_match(f.episodes, 0.25, 9);
  EXPECT_EQ(again.heldout.front().source_match_id, s.heldout.front().source_match_id);
  EXPECT_THROW(split_by_match(f.episodes, 1.0, 1), Error);
}

// ---------------------------------------------------------------------------
// Metrics harness

struct SlotSet {
  int team, type_index, x, y, delta, success, robv;
};

std::vector<SlotPrediction> fixture_predictions(const Vocabulary& v,
                                                const std::vector<SlotSet>& pred,
                                                const std::vector<SlotSet>& truth) {
  std::vector<SlotPrediction> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& p = pred[i];
    const auto& t = truth[i];
    out.push_back({Block::team, v.token(Block::team, p.team), v.token(Block::team, t.team)});
    out.push_back({Block::action_type, v.token(Block::action_type, p.type_index),
                   v.token(Block::action_type, t.type_index)});
    out.push_back({Block::x, v.token(Block::x, p.x), v.token(Block::x, t.x)});
    out.push_back({Block::y, v.token(Block::y, p.y), v.token(Block::y, t.y)});
    out.push_back({Block::delta_t, v.token(Block::delta_t, p.delta), v.token(Block::delta_t, t.delta)});
    out.push_back({Block::success, v.token(Block::success, p.success), v.token(Block::success, t.success)});
    out.push_back({Block::robv, v.token(Block::robv, p.robv), v.token(Block::robv, t.robv)});
  }
  return out;
}

TEST(Metrics, HandBuiltFourEventFixture) {
  Vocabulary v(testing::player_range(1, 22));
  // type indices: pass 0, dribble 21, tackle 9, shot 11
  const std::vector<SlotSet> truth = {{0, 0, 10, 20, 0, 1, 150},
                                      {0, 21, 30, 34, 3, 1, 120},
                                      {1, 9, 70, 10, 5, 0, 100},
                                      {1, 11, 95, 34, 2, 1, 200}};
  const std::vector<SlotSet> pred = {{0, 0, 12, 20, 1, 1, 140},
                                     {1, 0, 30, 30, 3, 0, 120},
                                     {1, 9, 60, 12, 8, 0, 110},
                                     {0, 11, 95, 34, 2, 1, 180}};
  const auto r = score_predictions(v, fixture_predictions(v, pred, truth));
  // Hand computation:
  //   team 2/4, type 3/4, success 3/4
  //   |dx| = 2, 0, 10, 0 m      -> 3.0
  //   |dy| = 0, 4, 2, 0 m       -> 1.5
  //   |dδ| = 1, 0, 3, 0 s       -> 1.0
  //   |drOBV| = .1, 0, .1, .2   -> 0.1
  EXPECT_EQ(r.acc_team, 0.5);
  EXPECT_EQ(r.acc_type, 0.75);
  EXPECT_EQ(r.acc_success, 0.75);
  EXPECT_EQ(r.mae_x, 3.0);
  EXPECT_EQ(r.mae_y, 1.5);
  EXPECT_EQ(r.mae_delta, 1.0);
  EXPECT_DOUBLE_EQ(r.mae_robv, 0.1);
  EXPECT_EQ(r.n_events_evaluated, 4u);
}

TEST(Metrics, OraclePredictionsArePerfect) {
  Vocabulary v(testing::player_range(1, 22));
  const std::vector<SlotSet> truth = {{0, 3, 1, 2, 3, 0, 7}, {1, 4, 104, 67, 60, 1, 200}};
  const auto r = score_predictions(v, fixture_predictions(v, truth, truth));
  EXPECT_EQ(r.acc_team, 1.0);
  EXPECT_EQ(r.acc_type, 1.0);
  EXPECT_EQ(r.acc_success, 1.0);
  EXPECT_EQ(r.mae_x + r.mae_y + r.mae_delta + r.mae_robv, 0.0);
}

TEST(Metrics, UniformRandomXPredictionsGiveThirdOfPitchLength) {
  Vocabulary v(testing::player_range(1, 22));
  Rng rng(2024);
  std::vector<SlotPrediction> preds;
  std::vector<SlotSet> dummy = {{0, 0, 0, 0, 0, 0, 0}};
  for (int i = 0; i < 10000; ++i) {
    const int p = static_cast<int>(uniform_index(rng, kXBins));
    const int t = static_cast<int>(uniform_index(rng, kXBins));
    preds.push_back({Block::x, v.token(Block::x, p), v.token(Block::x, t)});
    preds.push_back({Block::action_type, v.token(Block::action_type, 0), v.token(Block::action_type, 0)});
  }
  const auto r = score_predictions(v, preds);
  EXPECT_NEAR(r.mae_x, 35.0, 2.0);
}

TEST(Metrics, RejectsOutOfBlockPrediction) {
  Vocabulary v(testing::player_range(1, 22));
  std::vector<SlotPrediction> preds = {
      {Block::x, v.token(Block::y, 3), v.token(Block::x, 3)}};
  EXPECT_THROW(score_predictions(v, preds), Error);
  EXPECT_THROW(score_predictions(v, std::vector<SlotPrediction>{}), Error);
}

TEST(Evaluate, ScoresExactlyTheLossMaskedAttributeSlots) {
  const auto& f = synthetic();
  const auto p = init_params<float>(small_config(f.vocab.size()), 3);
  std::vector<Episode> some(f.episodes.begin(), f.episodes.begin() + 20);
  const auto preds = collect_predictions(p, f.vocab, some, kOpt);
  std::size_t masked = 0, events = 0;
  for (const auto& ep : some) {
    const auto enc = encode_episode(ep, f.vocab, kOpt);
    for (auto m : enc.loss_mask) masked += m;
    events += enc.event_boundaries.size();
  }
  EXPECT_EQ(preds.size(), masked - some.size());  // minus one EPISODE_END per episode
  EXPECT_EQ(preds.size(), 7 * events);
  for (const auto& pr : preds) EXPECT_TRUE(f.vocab.in_block(pr.predicted, pr.kind));
  const auto r = evaluate(p, f.vocab, some, kOpt);
  EXPECT_EQ(r.n_events_evaluated, events);
  EXPECT_THROW(evaluate(p, f.vocab, {}, kOpt), Error);
}

// ---------------------------------------------------------------------------
// Checkpoints

TEST(Checkpoint, RoundTripIsByteExactAndReproducesMetrics) {
  const auto& f = synthetic();
  Checkpoint ck;
  ck.vocab = f.vocab;
  ck.params = init_params<float>(small_config(f.vocab.size()), 4);
  ck.params.vec(ck.params.layout().blocks[0].attn_out_bias)[0] = 0.25f;
  ck.metadata = {{"note", "fixture"}};
  const auto path = std::filesystem::temp_directory_path() / "scoutgpt_ckpt_test.bin";
  save_checkpoint(path, ck);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(serialize_checkpoint(loaded), serialize_checkpoint(ck));
  EXPECT_EQ(loaded.vocab.hash(), f.vocab.hash());
  EXPECT_EQ(loaded.params.config(), ck.params.config());
  EXPECT_EQ(model_hash(loaded.params), model_hash(ck.params));
  std::vector<Episode> some(f.episodes.begin(), f.episodes.begin() + 10);
  EXPECT_EQ(evaluate(loaded.params, loaded.vocab, some, kOpt), evaluate(ck.params, ck.vocab, some, kOpt));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto& f = synthetic();
  Checkpoint ck;
  ck.vocab = f.vocab;
  ck.params = init_params<float>(small_config(f.vocab.size()), 4);
  const std::string bytes = serialize_checkpoint(ck);
  EXPECT_THROW(deserialize_checkpoint("NOTACKPT" + bytes.substr(8)), Error);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  std::string flipped = bytes;
  flipped[flipped.size() - 1] ^= 0x40;
  EXPECT_THROW(deserialize_checkpoint(flipped), Error);
  Checkpoint wrong = ck;
  wrong.vocab = Vocabulary(testing::player_range(1, 3));
  EXPECT_THROW(serialize_checkpoint(wrong), Error);
}

}  // namespace
}  // namespace scoutgpt
