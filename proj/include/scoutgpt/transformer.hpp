#ifndef SCOUTGPT_TRANSFORMER_HPP_
#define SCOUTGPT_TRANSFORMER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scoutgpt/error.hpp"
#include "scoutgpt/model.hpp"
#include "scoutgpt/vocabulary.hpp"

namespace scoutgpt {

inline constexpr double kLayerNormEps = 1e-5;

// One teacher-forced training row: inputs[t] predicts targets[t] where mask[t] is set.
struct Sequence {
  std::vector<Token> inputs;
  std::vector<Token> targets;
  std::vector<std::uint8_t> mask;
};

namespace detail {

template <typename S>
using Mat = RowMatrix<S>;
template <typename S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

inline void check_tokens(const ModelConfig& cfg, std::span<const Token> tokens) {
  if (tokens.empty()) throw Error(Errc::shape, "empty token sequence");
  if (static_cast<int>(tokens.size()) > cfg.block_size) {
    throw Error(Errc::shape, "sequence length " + std::to_string(tokens.size()) +
                                 " exceeds block size " + std::to_string(cfg.block_size));
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= cfg.vocab_size) {
      throw Error(Errc::shape, "token " + std::to_string(tokens[i]) + " outside vocabulary", i);
    }
  }
}

// Row-wise layer norm. Keeps the normalized input for the backward pass.
template <typename S, typename In, typename G, typename B>
void layer_norm(const In& x, const G& gain, const B& bias, Mat<S>& xhat, Col<S>& rstd,
                Mat<S>& y) {
  const Eigen::Index n = x.rows(), d = x.cols();
  xhat.resize(n, d);
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S mean = x.row(i).mean();
    const S var = (x.row(i).array() - mean).square().mean();
    rstd[i] = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
    xhat.row(i) = (x.row(i).array() - mean) * rstd[i];
  }
  y = (xhat.array().rowwise() * gain.array()).rowwise() + bias.array();
}

// Accumulates gain/bias gradients and returns dx.
template <typename S, typename G, typename DG, typename DB>
Mat<S> layer_norm_backward(const Mat<S>& dy, const Mat<S>& xhat, const Col<S>& rstd,
                           const G& gain, DG&& dgain, DB&& dbias) {
  dgain += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  Mat<S> dxhat = dy.array().rowwise() * gain.array();
  const S inv_d = S(1) / static_cast<S>(dy.cols());
  Mat<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const S m1 = dxhat.row(i).sum() * inv_d;
    const S m2 = dxhat.row(i).dot(xhat.row(i)) * inv_d;
    dx.row(i) = rstd[i] * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
  }
  return dx;
}

template <typename S>
constexpr S gelu_c() { return static_cast<S>(0.7978845608028654); }  // sqrt(2/pi)

template <typename S>
Mat<S> gelu(const Mat<S>& x) {
  const auto u = gelu_c<S>() * (x.array() + S(0.044715) * x.array().cube());
  return (S(0.5) * x.array() * (S(1) + u.tanh())).matrix();
}

template <typename S>
Mat<S> gelu_grad(const Mat<S>& x) {
  const auto x2 = x.array().square();
  const auto t = (gelu_c<S>() * (x.array() + S(0.044715) * x.array() * x2)).tanh().eval();
  return (S(0.5) * (S(1) + t) +
          S(0.5) * x.array() * (S(1) - t.square()) * gelu_c<S>() * (S(1) + S(3 * 0.044715) * x2))
      .matrix();
}

template <typename S>
struct BlockCache {
  Mat<S> ln1_hat, ln1, qkv, attn, ln2_hat, ln2, pre, act;
  Col<S> ln1_rstd, ln2_rstd;
  std::vector<Mat<S>> probs;  // per head, T x T, zero above the diagonal
};

template <typename S>
struct ForwardCache {
  std::vector<BlockCache<S>> blocks;
  Mat<S> final_hat;
  Col<S> final_rstd;
};

template <typename S>
void causal_softmax_rows(Mat<S>& scores) {
  const Eigen::Index t = scores.rows();
  for (Eigen::Index i = 0; i < t; ++i) {
    auto row = scores.row(i);
    const S mx = row.head(i + 1).maxCoeff();
    row.head(i + 1) = (row.head(i + 1).array() - mx).exp();
    row.head(i + 1) /= row.head(i + 1).sum();
    if (i + 1 < t) row.tail(t - i - 1).setZero();
  }
}

}  // namespace detail

// Final layer-normed hidden states (T x D) for one sequence. Logits are
// hidden · token_embeddingᵀ. Fills `cache` when given, for backward().
template <typename S>
RowMatrix<S> forward_hidden(const ModelParams<S>& p, std::span<const Token> tokens,
                            detail::ForwardCache<S>* cache = nullptr) {
  using namespace detail;
  const ModelConfig& cfg = p.config();
  check_tokens(cfg, tokens);
  const auto T = static_cast<Eigen::Index>(tokens.size());
  const int D = cfg.embed_dim, H = cfg.n_heads, hd = cfg.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  const ParamLayout& lay = p.layout();

  Mat<S> x(T, D);
  const auto wte = p.token_embedding();
  const auto wpe = p.position_embedding();
  for (Eigen::Index t = 0; t < T; ++t) x.row(t) = wte.row(tokens[static_cast<std::size_t>(t)]) + wpe.row(t);

  if (cache) cache->blocks.resize(lay.blocks.size());
  BlockCache<S> local;
  for (std::size_t l = 0; l < lay.blocks.size(); ++l) {
    const BlockTensors& bt = lay.blocks[l];
    BlockCache<S>& c = cache ? cache->blocks[l] : local;
    layer_norm<S>(x, p.vec(bt.ln1_gain), p.vec(bt.ln1_bias), c.ln1_hat, c.ln1_rstd, c.ln1);
    c.qkv.noalias() = c.ln1 * p.mat(bt.qkv_weight);
    c.qkv.rowwise() += p.vec(bt.qkv_bias);
    c.attn.resize(T, D);
    c.probs.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      const auto q = c.qkv.middleCols(h * hd, hd);
      const auto k = c.qkv.middleCols(D + h * hd, hd);
      const auto v = c.qkv.middleCols(2 * D + h * hd, hd);
      Mat<S>& prob = c.probs[static_cast<std::size_t>(h)];
      prob.noalias() = (q * k.transpose()) * scale;
      causal_softmax_rows(prob);
      c.attn.middleCols(h * hd, hd).noalias() = prob * v;
    }
    x.noalias() += c.attn * p.mat(bt.attn_out_weight);
    x.rowwise() += p.vec(bt.attn_out_bias);
    layer_norm<S>(x, p.vec(bt.ln2_gain), p.vec(bt.ln2_bias), c.ln2_hat, c.ln2_rstd, c.ln2);
    c.pre.noalias() = c.ln2 * p.mat(bt.mlp_in_weight);
    c.pre.rowwise() += p.vec(bt.mlp_in_bias);
    c.act = gelu(c.pre);
    x.noalias() += c.act * p.mat(bt.mlp_out_weight);
    x.rowwise() += p.vec(bt.mlp_out_bias);
  }
  Mat<S> hat, hidden;
  Col<S> rstd;
  layer_norm<S>(x, p.vec(lay.final_gain), p.vec(lay.final_bias), hat, rstd, hidden);
  if (cache) {
    cache->final_hat = std::move(hat);
    cache->final_rstd = std::move(rstd);
  }
  return hidden;
}

// Full logits (T x V) for one sequence.
template <typename S>
RowMatrix<S> forward(const ModelParams<S>& p, std::span<const Token> tokens) {
  RowMatrix<S> logits;
  logits.noalias() = forward_hidden(p, tokens) * p.output_projection().transpose();
  return logits;
}

// Batch form: N sequences, each T_i x V.
template <typename S>
std::vector<RowMatrix<S>> forward(const ModelParams<S>& p,
                                  const std::vector<std::vector<Token>>& batch) {
  std::vector<RowMatrix<S>> out;
  out.reserve(batch.size());
  for (const auto& seq : batch) out.push_back(forward(p, std::span<const Token>(seq)));
  return out;
}

// log-sum-exp of a row, accumulated in double.
template <typename Row>
double log_sum_exp(const Row& row) {
  const double mx = static_cast<double>(row.maxCoeff());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
  return mx + std::log(sum);
}

// Mean over masked positions of -log softmax(logits)[target].
template <typename S>
double loss_masked(const std::vector<RowMatrix<S>>& logits,
                   const std::vector<std::vector<Token>>& targets,
                   const std::vector<std::vector<std::uint8_t>>& mask) {
  if (logits.size() != targets.size() || logits.size() != mask.size()) {
    throw Error(Errc::shape, "logits, targets and mask batch sizes differ");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < logits.size(); ++n) {
    const auto& lg = logits[n];
    if (targets[n].size() != static_cast<std::size_t>(lg.rows()) ||
        mask[n].size() != static_cast<std::size_t>(lg.rows())) {
      throw Error(Errc::shape, "targets/mask length differs from logits rows", n);
    }
    for (Eigen::Index t = 0; t < lg.rows(); ++t) {
      if (!mask[n][static_cast<std::size_t>(t)]) continue;
      const Token y = targets[n][static_cast<std::size_t>(t)];
      if (y < 0 || y >= lg.cols()) throw Error(Errc::shape, "target outside vocabulary", n);
      total += log_sum_exp(lg.row(t)) - static_cast<double>(lg(t, y));
      ++count;
    }
  }
  if (count == 0) throw Error(Errc::degenerate_batch, "mask selects no positions");
  return total / static_cast<double>(count);
}

inline std::size_t masked_count(std::span<const Sequence> batch) {
  std::size_t n = 0;
  for (const auto& s : batch) {
    if (s.inputs.size() != s.targets.size() || s.inputs.size() != s.mask.size()) {
      throw Error(Errc::shape, "sequence inputs, targets and mask lengths differ");
    }
    for (auto m : s.mask) n += m ? 1 : 0;
  }
  if (n == 0) throw Error(Errc::degenerate_batch, "mask selects no positions");
  return n;
}

namespace detail {

template <typename S>
Mat<S> gather_masked(const Mat<S>& hidden, const Sequence& s, std::vector<Eigen::Index>& rows) {
  rows.clear();
  for (std::size_t t = 0; t < s.mask.size(); ++t) {
    if (s.mask[t]) rows.push_back(static_cast<Eigen::Index>(t));
  }
  Mat<S> out(static_cast<Eigen::Index>(rows.size()), hidden.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = hidden.row(rows[r]);
  return out;
}

// Sums -log p(target) over masked rows; optionally turns `logits` into dloss/dlogits * weight.
template <typename S>
double masked_nll(Mat<S>& logits, const Sequence& s, const std::vector<Eigen::Index>& rows,
                  bool want_grad, S weight) {
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto row = logits.row(static_cast<Eigen::Index>(r));
    const Token y = s.targets[static_cast<std::size_t>(rows[r])];
    if (y < 0 || y >= row.size()) throw Error(Errc::shape, "target outside vocabulary");
    const double lse = log_sum_exp(row);
    total += lse - static_cast<double>(row[y]);
    if (want_grad) {
      for (Eigen::Index j = 0; j < row.size(); ++j) {
        row[j] = static_cast<S>(std::exp(static_cast<double>(row[j]) - lse)) * weight;
      }
      row[y] -= weight;
    }
  }
  return total;
}

}  // namespace detail

// Masked mean loss computed on scored rows only (same value as loss_masked over full logits).
template <typename S>
double sequence_loss(const ModelParams<S>& p, std::span<const Sequence> batch) {
  const std::size_t count = masked_count(batch);
  double total = 0.0;
  std::vector<Eigen::Index> rows;
  for (const auto& s : batch) {
    const auto hidden = forward_hidden(p, std::span<const Token>(s.inputs));
    auto hm = detail::gather_masked(hidden, s, rows);
    if (rows.empty()) continue;
    detail::Mat<S> logits = hm * p.output_projection().transpose();
    total += detail::masked_nll(logits, s, rows, false, S(0));
  }
  return total / static_cast<double>(count);
}

// Adds the gradient of the batch's masked mean loss into `grad` and returns the loss.
// The tied embedding receives both its input and output-projection contributions.
template <typename S>
double accumulate_gradients(const ModelParams<S>& p, std::span<const Sequence> batch,
                            ModelParams<S>& grad) {
  using namespace detail;
  if (grad.size() != p.size()) throw Error(Errc::shape, "gradient buffer does not match model");
  const std::size_t count = masked_count(batch);
  const S weight = static_cast<S>(1.0 / static_cast<double>(count));
  const ModelConfig& cfg = p.config();
  const ParamLayout& lay = p.layout();
  const int D = cfg.embed_dim, H = cfg.n_heads, hd = cfg.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  const auto wte = p.token_embedding();
  auto dwte = grad.token_embedding();
  auto dwpe = grad.position_embedding();

  double total = 0.0;
  ForwardCache<S> cache;
  std::vector<Eigen::Index> rows;
  for (const auto& s : batch) {
    const std::span<const Token> tokens(s.inputs);
    const Mat<S> hidden = forward_hidden(p, tokens, &cache);
    const Eigen::Index T = hidden.rows();
    Mat<S> hm = gather_masked(hidden, s, rows);
    if (rows.empty()) continue;
    Mat<S> dlogits = hm * wte.transpose();
    total += masked_nll(dlogits, s, rows, true, weight);

    dwte.noalias() += dlogits.transpose() * hm;
    Mat<S> dhm = dlogits * wte;
    Mat<S> dhidden = Mat<S>::Zero(T, D);
    for (std::size_t r = 0; r < rows.size(); ++r) dhidden.row(rows[r]) = dhm.row(static_cast<Eigen::Index>(r));

    Mat<S> dx = layer_norm_backward<S>(dhidden, cache.final_hat, cache.final_rstd,
                                       p.vec(lay.final_gain), grad.vec(lay.final_gain),
                                       grad.vec(lay.final_bias));

    for (std::size_t l = lay.blocks.size(); l-- > 0;) {
      const BlockTensors& bt = lay.blocks[l];
      const BlockCache<S>& c = cache.blocks[l];

      // MLP branch.
      grad.mat(bt.mlp_out_weight).noalias() += c.act.transpose() * dx;
      grad.vec(bt.mlp_out_bias) += dx.colwise().sum();
      Mat<S> dpre = dx * p.mat(bt.mlp_out_weight).transpose();
      dpre.array() *= gelu_grad(c.pre).array();
      grad.mat(bt.mlp_in_weight).noalias() += c.ln2.transpose() * dpre;
      grad.vec(bt.mlp_in_bias) += dpre.colwise().sum();
      Mat<S> dln2 = dpre * p.mat(bt.mlp_in_weight).transpose();
      dx += layer_norm_backward<S>(dln2, c.ln2_hat, c.ln2_rstd, p.vec(bt.ln2_gain),
                                   grad.vec(bt.ln2_gain), grad.vec(bt.ln2_bias));

      // Attention branch.
      grad.mat(bt.attn_out_weight).noalias() += c.attn.transpose() * dx;
      grad.vec(bt.attn_out_bias) += dx.colwise().sum();
      Mat<S> dattn = dx * p.mat(bt.attn_out_weight).transpose();
      Mat<S> dqkv(T, 3 * D);
      for (int h = 0; h < H; ++h) {
        const Mat<S>& prob = c.probs[static_cast<std::size_t>(h)];
        const auto q = c.qkv.middleCols(h * hd, hd);
        const auto k = c.qkv.middleCols(D + h * hd, hd);
        const auto v = c.qkv.middleCols(2 * D + h * hd, hd);
        const auto dout = dattn.middleCols(h * hd, hd);
        Mat<S> dprob = dout * v.transpose();
        dqkv.middleCols(2 * D + h * hd, hd).noalias() = prob.transpose() * dout;
        const Col<S> inner = (dprob.array() * prob.array()).rowwise().sum();
        Mat<S> dscore = (prob.array() * (dprob.colwise() - inner).array()) * scale;
        dqkv.middleCols(h * hd, hd).noalias() = dscore * k;
        dqkv.middleCols(D + h * hd, hd).noalias() = dscore.transpose() * q;
      }
      grad.mat(bt.qkv_weight).noalias() += c.ln1.transpose() * dqkv;
      grad.vec(bt.qkv_bias) += dqkv.colwise().sum();
      Mat<S> dln1 = dqkv * p.mat(bt.qkv_weight).transpose();
      dx += layer_norm_backward<S>(dln1, c.ln1_hat, c.ln1_rstd, p.vec(bt.ln1_gain),
                                   grad.vec(bt.ln1_gain), grad.vec(bt.ln1_bias));
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      dwte.row(tokens[static_cast<std::size_t>(t)]) += dx.row(t);
      dwpe.row(t) += dx.row(t);
    }
  }
  return total / static_cast<double>(count);
}

// Gradient of the masked mean loss with respect to every parameter.
template <typename S>
ModelParams<S> backward(const ModelParams<S>& p, std::span<const Sequence> batch) {
  ModelParams<S> grad = p.zeros_like();
  accumulate_gradients(p, batch, grad);
  return grad;
}

// Incremental decoder with a key/value cache. Copy it to branch rollouts from a
// shared prefix.
template <typename S>
class DecodeState {
 public:
  explicit DecodeState(const ModelParams<S>& p) : p_(&p) {
    const ModelConfig& cfg = p.config();
    keys_.assign(p.layout().blocks.size(), RowMatrix<S>(cfg.block_size, cfg.embed_dim));
    values_ = keys_;
  }

  int position() const { return pos_; }
  int capacity() const { return p_->config().block_size; }
  const RowVector<S>& hidden() const { return hidden_; }

  // Appends one token; hidden() then holds the state that predicts the next token.
  void push(Token token) {
    const ModelConfig& cfg = p_->config();
    if (pos_ >= cfg.block_size) {
      throw Error(Errc::context_overflow, "sequence exceeds block size " +
                                              std::to_string(cfg.block_size));
    }
    if (token < 0 || token >= cfg.vocab_size) throw Error(Errc::shape, "token outside vocabulary");
    const ParamLayout& lay = p_->layout();
    const int D = cfg.embed_dim, hd = cfg.head_dim();
    const S scale = S(1) / std::sqrt(static_cast<S>(hd));
    RowVector<S> x = p_->token_embedding().row(token) + p_->position_embedding().row(pos_);
    RowVector<S> qkv, attn(D), mid, pre;
    for (std::size_t l = 0; l < lay.blocks.size(); ++l) {
      const BlockTensors& bt = lay.blocks[l];
      qkv.noalias() = norm(x, bt.ln1_gain, bt.ln1_bias) * p_->mat(bt.qkv_weight);
      qkv += p_->vec(bt.qkv_bias);
      keys_[l].row(pos_) = qkv.segment(D, D);
      values_[l].row(pos_) = qkv.segment(2 * D, D);
      for (int h = 0; h < cfg.n_heads; ++h) {
        const auto k = keys_[l].block(0, h * hd, pos_ + 1, hd);
        const auto v = values_[l].block(0, h * hd, pos_ + 1, hd);
        RowVector<S> s = (qkv.segment(h * hd, hd) * k.transpose()) * scale;
        s = (s.array() - s.maxCoeff()).exp();
        s /= s.sum();
        attn.segment(h * hd, hd).noalias() = s * v;
      }
      x.noalias() += attn * p_->mat(bt.attn_out_weight);
      x += p_->vec(bt.attn_out_bias);
      pre.noalias() = norm(x, bt.ln2_gain, bt.ln2_bias) * p_->mat(bt.mlp_in_weight);
      pre += p_->vec(bt.mlp_in_bias);
      const detail::Mat<S> act = detail::gelu<S>(pre);
      x.noalias() += act * p_->mat(bt.mlp_out_weight);
      x += p_->vec(bt.mlp_out_bias);
    }
    hidden_ = norm(x, lay.final_gain, lay.final_bias);
    ++pos_;
  }

  void push(std::span<const Token> tokens) {
    for (Token t : tokens) push(t);
  }

  // Logits for tokens [first, first + count) given the current state.
  void logits(Token first, int count, std::vector<double>& out) const {
    if (pos_ == 0) throw Error(Errc::shape, "no tokens decoded yet");
    const auto w = p_->output_projection().middleRows(first, count);
    const RowVector<S> z = hidden_ * w.transpose();
    out.resize(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) out[static_cast<std::size_t>(j)] = static_cast<double>(z[j]);
  }

 private:
  RowVector<S> norm(const RowVector<S>& x, std::size_t gain, std::size_t bias) const {
    const S mean = x.mean();
    const S var = (x.array() - mean).square().mean();
    const S rstd = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
    return (((x.array() - mean) * rstd) * p_->vec(gain).array() + p_->vec(bias).array()).matrix();
  }

  const ModelParams<S>* p_;
  std::vector<RowMatrix<S>> keys_, values_;
  RowVector<S> hidden_;
  int pos_ = 0;
};

}  // namespace scoutgpt

#endif  // SCOUTGPT_TRANSFORMER_HPP_
