#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>

#include "scoutgpt/model.hpp"
#include "scoutgpt/transformer.hpp"
#include "test_support.hpp"

namespace scoutgpt {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 50;
  c.block_size = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.embed_dim = 16;
  return c;
}

// Every tensor random and non-degenerate so all gradient paths are exercised.
template <typename S>
ModelParams<S> random_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<S> p(cfg);
  Rng rng(seed);
  for (std::size_t t = 0; t < p.layout().tensors().size(); ++t) {
    const TensorRole role = p.layout().tensors()[t].role;
    auto v = p.vec(t);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double z = normal01(rng);
      v[i] = static_cast<S>(role == TensorRole::gain ? 1.0 + 0.2 * z
                            : role == TensorRole::bias ? 0.1 * z
                                                       : 0.3 * z);
    }
  }
  return p;
}

Sequence random_sequence(Rng& rng, const ModelConfig& cfg, int length) {
  Sequence s;
  for (int t = 0; t < length; ++t) {
    s.inputs.push_back(static_cast<Token>(uniform_index(rng, static_cast<std::uint64_t>(cfg.vocab_size))));
    s.targets.push_back(static_cast<Token>(uniform_index(rng, static_cast<std::uint64_t>(cfg.vocab_size))));
    s.mask.push_back(static_cast<std::uint8_t>(uniform_index(rng, 3) != 0));
  }
  s.mask[0] = 1;
  return s;
}

TEST(Model, LayoutAndConfigValidation) {
  auto cfg = tiny_config();
  ParamLayout lay(cfg);
  const std::size_t d = 16, v = 50, b = 16;
  const std::size_t per_block = 4 * d + (d * 3 * d + 3 * d) + (d * d + d) + (d * 4 * d + 4 * d) +
                                (4 * d * d + d);
  EXPECT_EQ(lay.parameter_count(), v * d + b * d + 2 * per_block + 2 * d);
  for (const auto& t : lay.tensors()) EXPECT_EQ(t.offset % 16, 0u) << t.name;
  cfg.n_heads = 3;
  EXPECT_THROW(ParamLayout{cfg}, Error);
  cfg = tiny_config();
  cfg.dropout_rate = 0.1;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Model, GradientMatchesCentralFiniteDifferences) {
  const auto cfg = tiny_config();
  auto p = random_params<double>(cfg, 11);
  Rng rng(12);
  std::vector<Sequence> batch = {random_sequence(rng, cfg, 16), random_sequence(rng, cfg, 11),
                                 random_sequence(rng, cfg, 5)};
  const auto analytic = backward(p, std::span<const Sequence>(batch));

  const double eps = 1e-5;
  auto values = p.values();
  double worst_group = 0.0;
  for (std::size_t t = 0; t < p.layout().tensors().size(); ++t) {
    const TensorInfo& info = p.layout().tensors()[t];
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = info.offset; i < info.offset + info.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = sequence_loss(p, std::span<const Sequence>(batch));
      values[i] = saved - eps;
      const double down = sequence_loss(p, std::span<const Sequence>(batch));
      values[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double a = analytic.values()[i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    const double denom = std::sqrt(a2) + std::sqrt(n2);
    const double rel = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
    worst_group = std::max(worst_group, rel);
    EXPECT_LT(rel, 1e-4) << info.name;
    EXPECT_GT(std::sqrt(a2), 0.0) << info.name << " has an identically zero gradient";
  }
  std::printf("max per-group relative error: %.3g\n", worst_group);
}

TEST(Model, CausalityUnderFuturePerturbation) {
  ModelConfig cfg = tiny_config();
  cfg.block_size = 24;
  const auto p = random_params<float>(cfg, 3);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Token> tokens(24);
    for (auto& t : tokens) t = static_cast<Token>(uniform_index(rng, 50));
    const int cut = static_cast<int>(uniform_index(rng, 23));
    auto changed = tokens;
    for (std::size_t i = static_cast<std::size_t>(cut) + 1; i < changed.size(); ++i) {
      changed[i] = static_cast<Token>(uniform_index(rng, 50));
    }
    const auto a = forward(p, std::span<const Token>(tokens));
    const auto b = forward(p, std::span<const Token>(changed));
    for (int t = 0; t <= cut; ++t) {
      ASSERT_TRUE(a.row(t) == b.row(t)) << "position " << t << " cut " << cut;
    }
  }
}

TEST(Model, SingleTokenShape) {
  const auto p = init_params<float>(tiny_config(), 1);
  const std::vector<Token> one = {7};
  const auto logits = forward(p, std::span<const Token>(one));
  EXPECT_EQ(logits.rows(), 1);
  EXPECT_EQ(logits.cols(), 50);
}

TEST(Model, ZeroResidualProjectionsGiveClosedFormLogits) {
  const auto cfg = tiny_config();
  const auto p = init_params<double>(cfg, 9);
  const std::vector<Token> tokens = {1, 4, 9, 16, 25, 36, 49};
  const auto logits = forward(p, std::span<const Token>(tokens));
  const auto wte = p.token_embedding();
  const auto wpe = p.position_embedding();
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    Eigen::RowVectorXd x = wte.row(tokens[t]) + wpe.row(static_cast<Eigen::Index>(t));
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    Eigen::RowVectorXd ln = (x.array() - mean) / std::sqrt(var + 1e-5);
    Eigen::RowVectorXd expect = ln * wte.transpose();
    EXPECT_LT((logits.row(static_cast<Eigen::Index>(t)) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Model, OutputProjectionSharesEmbeddingStorage) {
  auto p = init_params<float>(tiny_config(), 2);
  EXPECT_EQ(p.output_projection().data(), p.token_embedding().data());
  const std::vector<Token> tokens = {3, 5};
  const auto before = forward(p, std::span<const Token>(tokens));
  p.token_embedding()(11, 0) += 1.0f;
  EXPECT_EQ(p.output_projection()(11, 0), p.token_embedding()(11, 0));
  const auto after = forward(p, std::span<const Token>(tokens));
  EXPECT_NE(before(0, 11), after(0, 11));
}

TEST(Model, SoftmaxRowsSumToOne) {
  const auto p = random_params<float>(tiny_config(), 5);
  std::vector<Token> tokens(16);
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<Token>(3 * i % 50);
  const auto logits = forward(p, std::span<const Token>(tokens));
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double lse = log_sum_exp(logits.row(t));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) sum += std::exp(logits(t, j) - lse);
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Model, LossMaskedProperties) {
  const int v = 50;
  std::vector<RowMatrix<double>> uniform = {RowMatrix<double>::Constant(4, v, 0.3)};
  std::vector<std::vector<Token>> targets = {{1, 7, 49, 0}};
  std::vector<std::vector<std::uint8_t>> all = {{1, 1, 1, 1}};
  EXPECT_NEAR(loss_masked(uniform, targets, all), std::log(50.0), 1e-12);

  std::vector<RowMatrix<double>> sharp = {RowMatrix<double>::Zero(4, v)};
  for (int t = 0; t < 4; ++t) sharp[0](t, targets[0][static_cast<std::size_t>(t)]) = 1e4;
  EXPECT_LT(loss_masked(sharp, targets, all), 1e-12);

  Rng rng(6);
  RowMatrix<double> lg(6, v);
  for (Eigen::Index i = 0; i < lg.size(); ++i) lg.data()[i] = normal01(rng);
  std::vector<std::vector<Token>> tg = {{3, 8, 13, 21, 34, 44}};
  std::vector<std::vector<std::uint8_t>> half = {{1, 0, 1, 0, 1, 0}};
  double direct = 0.0;
  for (int t : {0, 2, 4}) {
    direct += log_sum_exp(lg.row(t)) - lg(t, tg[0][static_cast<std::size_t>(t)]);
  }
  EXPECT_NEAR(loss_masked(std::vector<RowMatrix<double>>{lg}, tg, half), direct / 3.0, 1e-12);

  std::vector<std::vector<std::uint8_t>> none = {{0, 0, 0, 0}};
  try {
    loss_masked(uniform, targets, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_batch);
  }
}

TEST(Model, SequenceLossEqualsLossOverFullLogits) {
  const auto cfg = tiny_config();
  const auto p = random_params<double>(cfg, 8);
  Rng rng(9);
  std::vector<Sequence> batch = {random_sequence(rng, cfg, 16), random_sequence(rng, cfg, 7)};
  std::vector<RowMatrix<double>> logits;
  std::vector<std::vector<Token>> targets;
  std::vector<std::vector<std::uint8_t>> masks;
  for (const auto& s : batch) {
    logits.push_back(forward(p, std::span<const Token>(s.inputs)));
    targets.push_back(s.targets);
    masks.push_back(s.mask);
  }
  EXPECT_NEAR(sequence_loss(p, std::span<const Sequence>(batch)),
              loss_masked(logits, targets, masks), 1e-12);
}

TEST(Model, UnmaskedTargetsAndUnusedPositionsContributeNothing) {
  const auto cfg = tiny_config();
  const auto p = random_params<double>(cfg, 10);
  Rng rng(11);
  std::vector<Sequence> batch = {random_sequence(rng, cfg, 9)};
  batch[0].mask[4] = 0;
  const auto g1 = backward(p, std::span<const Sequence>(batch));
  batch[0].targets[4] = (batch[0].targets[4] + 17) % 50;
  const auto g2 = backward(p, std::span<const Sequence>(batch));
  for (std::size_t i = 0; i < g1.size(); ++i) ASSERT_EQ(g1.values()[i], g2.values()[i]) << i << " diff " << g1.values()[i] - g2.values()[i];
  const auto wpe_grad = g1.position_embedding();
  for (Eigen::Index r = 9; r < wpe_grad.rows(); ++r) EXPECT_EQ(wpe_grad.row(r).squaredNorm(), 0.0);
  EXPECT_GT(wpe_grad.row(0).squaredNorm(), 0.0);
}

TEST(Model, InitialLossNearLogVocab) {
  auto cfg = tiny_config();
  cfg.vocab_size = 640;
  cfg.block_size = 64;
  cfg.embed_dim = 64;
  cfg.n_heads = 4;
  const auto p = init_params<float>(cfg, 1);
  Rng rng(2);
  std::vector<Sequence> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_sequence(rng, cfg, 64));
  const double loss = sequence_loss(p, std::span<const Sequence>(batch));
  EXPECT_NEAR(loss / std::log(640.0), 1.0, 0.05) << loss;
}

TEST(Model, ShapeErrors) {
  const auto p = init_params<float>(tiny_config(), 1);
  const std::vector<Token> bad = {1, 50};
  EXPECT_THROW(forward(p, std::span<const Token>(bad)), Error);
  const std::vector<Token> too_long(17, 1);
  EXPECT_THROW(forward(p, std::span<const Token>(too_long)), Error);
  const std::vector<Token> empty;
  EXPECT_THROW(forward(p, std::span<const Token>(empty)), Error);
}

TEST(Model, EmbeddingRowAccessor) {
  Vocabulary vocab(testing::player_range(10, 30));
  ModelConfig cfg = tiny_config();
  cfg.vocab_size = vocab.size();
  cfg.init_scale = 0.0;
  const auto zero = init_params<float>(cfg, 1);
  const Token player = vocab.player_token(12);
  for (float x : embedding_row(zero, vocab, player)) EXPECT_EQ(x, 0.0f);
  EXPECT_THROW(embedding_row(zero, vocab, vocab.offset(Block::x)), Error);
  cfg.init_scale = 1.0;
  const auto p = init_params<float>(cfg, 1);
  const auto row = embedding_row(p, vocab, player);
  ASSERT_EQ(row.size(), 16u);
  EXPECT_EQ(row[3], p.token_embedding()(player, 3));
}

TEST(Model, DecodeStateMatchesFullForward) {
  ModelConfig cfg = tiny_config();
  const auto p = random_params<double>(cfg, 21);
  Rng rng(22);
  std::vector<Token> tokens(16);
  for (auto& t : tokens) t = static_cast<Token>(uniform_index(rng, 50));
  const auto full = forward(p, std::span<const Token>(tokens));
  DecodeState<double> state(p);
  std::vector<double> row;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    state.push(tokens[t]);
    state.logits(0, 50, row);
    for (int j = 0; j < 50; ++j) EXPECT_NEAR(row[static_cast<std::size_t>(j)], full(static_cast<Eigen::Index>(t), j), 1e-10);
  }
  DecodeState<double> branch = state;
  EXPECT_THROW(branch.push(1), Error);
  state.logits(20, 5, row);
  EXPECT_EQ(row.size(), 5u);
  EXPECT_NEAR(row[0], full(15, 20), 1e-10);
}

TEST(Model, ForwardIsDeterministic) {
  const auto p = random_params<float>(tiny_config(), 31);
  const std::vector<Token> tokens = {1, 2, 3, 4, 5, 6, 7, 8};
  const auto a = forward(p, std::span<const Token>(tokens));
  const auto b = forward(p, std::span<const Token>(tokens));
  EXPECT_TRUE(a == b);
}

}  // namespace
}  // namespace scoutgpt
