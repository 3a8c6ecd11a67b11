#ifndef SCOUTGPT_TRAINER_HPP_
#define SCOUTGPT_TRAINER_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scoutgpt/codec.hpp"
#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"
#include "scoutgpt/metrics.hpp"
#include "scoutgpt/model.hpp"
#include "scoutgpt/rng.hpp"
#include "scoutgpt/transformer.hpp"
#include "scoutgpt/vocabulary.hpp"

namespace scoutgpt {

struct TrainConfig {
  int batch_size = 16;
  int steps = 1000;
  double learning_rate = 3e-4;
  double weight_decay = 0.1;
  double grad_clip_norm = 1.0;
  int eval_interval = 100;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double max_seconds = 0.0;  // wall-clock cap; 0 disables it

  void validate() const {
    if (batch_size < 1 || steps < 0 || eval_interval < 1 || !(learning_rate > 0) ||
        !(weight_decay >= 0) || !(grad_clip_norm > 0) || !(max_seconds >= 0)) {
      throw Error(Errc::domain, "invalid training config");
    }
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},         {"steps", c.steps},
       {"learning_rate", c.learning_rate},   {"weight_decay", c.weight_decay},
       {"grad_clip_norm", c.grad_clip_norm}, {"eval_interval", c.eval_interval},
       {"seed", c.seed},                     {"beta1", c.beta1},
       {"beta2", c.beta2},                   {"adam_eps", c.adam_eps},
       {"max_seconds", c.max_seconds}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.steps = j.value("steps", d.steps);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.grad_clip_norm = j.value("grad_clip_norm", d.grad_clip_norm);
  c.eval_interval = j.value("eval_interval", d.eval_interval);
  c.seed = j.value("seed", d.seed);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.max_seconds = j.value("max_seconds", d.max_seconds);
}

// Encoded, teacher-forced rows tagged with the vocabulary they were built with.
struct TrainingSet {
  std::string vocab_hash;
  std::vector<Sequence> sequences;
};

inline Sequence to_sequence(const EncodedEpisode& enc) {
  const auto n = static_cast<std::size_t>(enc.length);
  Sequence s;
  s.inputs.assign(enc.tokens.begin(), enc.tokens.begin() + static_cast<std::ptrdiff_t>(n - 1));
  s.targets.assign(enc.tokens.begin() + 1, enc.tokens.begin() + static_cast<std::ptrdiff_t>(n));
  s.mask.assign(enc.loss_mask.begin(), enc.loss_mask.begin() + static_cast<std::ptrdiff_t>(n - 1));
  return s;
}

inline TrainingSet make_training_set(const std::vector<Episode>& episodes, const Vocabulary& vocab,
                                     const EncodeOptions& opt) {
  TrainingSet ts;
  ts.vocab_hash = vocab.hash();
  ts.sequences.reserve(episodes.size());
  for (const auto& ep : episodes) {
    if (ep.actions.empty()) continue;
    ts.sequences.push_back(to_sequence(encode_episode(ep, vocab, opt)));
  }
  return ts;
}

// In-place Fisher-Yates with our own index draw (std::shuffle is implementation-defined).
template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

struct CorpusSplit {
  std::vector<Episode> train;
  std::vector<Episode> heldout;
  std::vector<std::string> heldout_matches;  // sorted
};

// Whole matches go to one side so no match leaks across the split.
inline CorpusSplit split_by_match(const std::vector<Episode>& episodes, double heldout_fraction,
                                  std::uint64_t seed) {
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
    throw Error(Errc::domain, "heldout_fraction must be in [0, 1)");
  }
  std::set<std::string> ids;
  for (const auto& ep : episodes) ids.insert(ep.source_match_id);
  std::vector<std::string> order(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, 0x5b17));
  seeded_shuffle(order, rng);
  auto n_held = static_cast<std::size_t>(std::ceil(heldout_fraction * static_cast<double>(order.size())));
  if (heldout_fraction > 0.0 && order.size() >= 2) n_held = std::clamp<std::size_t>(n_held, 1, order.size() - 1);
  const std::set<std::string> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_held));
  CorpusSplit out;
  for (const auto& ep : episodes) (held.count(ep.source_match_id) ? out.heldout : out.train).push_back(ep);
  out.heldout_matches.assign(held.begin(), held.end());
  return out;
}

// Adam with decoupled weight decay and global-norm clipping.
class AdamW {
 public:
  AdamW(const ModelParams<float>& p, const TrainConfig& cfg)
      : cfg_(cfg), m_(p.size(), 0.0f), v_(p.size(), 0.0f) {
    for (const auto& t : p.layout().tensors()) {
      if (t.decays()) decay_ranges_.push_back({t.offset, t.offset + t.size()});
    }
  }

  // Returns the gradient norm before clipping.
  double step(ModelParams<float>& p, const ModelParams<float>& grad) {
    auto w = p.values();
    auto g = grad.values();
    double sq = 0.0;
    for (float x : g) sq += static_cast<double>(x) * x;
    const double norm = std::sqrt(sq);
    const double clip = norm > cfg_.grad_clip_norm ? cfg_.grad_clip_norm / (norm + 1e-6) : 1.0;
    ++t_;
    const double lr = cfg_.learning_rate;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    const auto b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
    const auto step_size = static_cast<float>(lr / bc1);
    const auto inv_bc2 = static_cast<float>(1.0 / bc2);
    const auto eps = static_cast<float>(cfg_.adam_eps);
    const auto cl = static_cast<float>(clip);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const float gi = g[i] * cl;
      m_[i] = b1 * m_[i] + (1.0f - b1) * gi;
      v_[i] = b2 * v_[i] + (1.0f - b2) * gi * gi;
      w[i] -= step_size * m_[i] / (std::sqrt(v_[i] * inv_bc2) + eps);
    }
    const auto decay = static_cast<float>(1.0 - lr * cfg_.weight_decay);
    for (auto [a, b] : decay_ranges_) {
      for (std::size_t i = a; i < b; ++i) w[i] *= decay;
    }
    return norm;
  }

  int steps_taken() const { return t_; }

 private:
  TrainConfig cfg_;
  std::vector<float> m_, v_;
  std::vector<std::pair<std::size_t, std::size_t>> decay_ranges_;
  int t_ = 0;
};

struct EvalPoint {
  int step = 0;
  double train_loss = 0.0;    // mean over the steps since the previous point
  double heldout_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<double> losses;  // losses[k]: batch loss at step k, before its update
  std::vector<EvalPoint> evals;
  int steps_done = 0;
  double seconds = 0.0;
  bool stopped_by_time = false;
};

inline nlohmann::json to_json(const TrainResult& r) {
  nlohmann::json evals = nlohmann::json::array();
  for (const auto& e : r.evals) {
    evals.push_back({{"step", e.step},
                     {"train_loss", e.train_loss},
                     {"heldout_loss", std::isnan(e.heldout_loss) ? nlohmann::json(nullptr)
                                                                 : nlohmann::json(e.heldout_loss)}});
  }
  return {{"steps_done", r.steps_done}, {"seconds", r.seconds},
          {"stopped_by_time", r.stopped_by_time}, {"evals", evals}, {"losses", r.losses}};
}

using EvalHook = std::function<void(const EvalPoint&, const ModelParams<float>&)>;

struct TrainOptions {
  const TrainingSet* heldout = nullptr;
  std::size_t heldout_sequences = 256;  // fixed prefix of the held-out set used for eval loss
  EvalHook on_eval;
};

inline TrainResult train(ModelParams<float>& params, const std::string& model_vocab_hash,
                         const TrainingSet& data, const TrainConfig& cfg,
                         const TrainOptions& opt = {}) {
  cfg.validate();
  if (data.vocab_hash != model_vocab_hash) {
    throw Error(Errc::vocabulary_mismatch, "corpus vocabulary " + data.vocab_hash +
                                               " does not match model vocabulary " +
                                               model_vocab_hash);
  }
  if (opt.heldout && opt.heldout->vocab_hash != model_vocab_hash) {
    throw Error(Errc::vocabulary_mismatch, "held-out vocabulary does not match model");
  }
  TrainResult result;
  if (cfg.steps == 0) return result;
  if (data.sequences.empty()) throw Error(Errc::degenerate_batch, "empty training set");

  const auto started = std::chrono::steady_clock::now();
  AdamW optim(params, cfg);
  ModelParams<float> grad = params.zeros_like();
  std::vector<std::size_t> order(data.sequences.size());
  std::size_t cursor = order.size();
  std::uint64_t epoch = 0;
  Rng rng;
  std::vector<Sequence> batch;
  double window = 0.0;
  int window_n = 0;

  std::vector<Sequence> held;
  if (opt.heldout) {
    const auto n = std::min(opt.heldout_sequences, opt.heldout->sequences.size());
    held.assign(opt.heldout->sequences.begin(), opt.heldout->sequences.begin() + static_cast<std::ptrdiff_t>(n));
  }

  for (int step = 0; step < cfg.steps; ++step) {
    batch.clear();
    while (batch.size() < static_cast<std::size_t>(cfg.batch_size)) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.seed(derive_seed(cfg.seed, 0xda7a, epoch++));
        seeded_shuffle(order, rng);
        cursor = 0;
      }
      batch.push_back(data.sequences[order[cursor++]]);
    }
    grad.set_zero();
    const double loss = accumulate_gradients(params, std::span<const Sequence>(batch), grad);
    optim.step(params, grad);
    result.losses.push_back(loss);
    result.steps_done = step + 1;
    window += loss;
    ++window_n;

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const bool out_of_time = cfg.max_seconds > 0 && elapsed >= cfg.max_seconds;
    const bool last = step + 1 == cfg.steps || out_of_time;
    if ((step + 1) % cfg.eval_interval == 0 || last) {
      EvalPoint ep;
      ep.step = step + 1;
      ep.train_loss = window / window_n;
      if (!held.empty()) ep.heldout_loss = sequence_loss(params, std::span<const Sequence>(held));
      result.evals.push_back(ep);
      if (opt.on_eval) opt.on_eval(ep, params);
      window = 0.0;
      window_n = 0;
    }
    if (out_of_time) {
      result.stopped_by_time = step + 1 < cfg.steps;
      break;
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// Index of the largest logit in [first, first + count); ties go to the lowest index.
inline Token block_argmax(std::span<const double> logits, Token first) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j) {
    if (logits[j] > logits[best]) best = j;
  }
  return first + static_cast<Token>(best);
}

// Teacher-forced, grammar-restricted argmax at every scored attribute slot.
inline std::vector<SlotPrediction> collect_predictions(const ModelParams<float>& params,
                                                       const Vocabulary& vocab,
                                                       const std::vector<Episode>& episodes,
                                                       const EncodeOptions& opt) {
  if (params.config().vocab_size != vocab.size()) {
    throw Error(Errc::vocabulary_mismatch, "model and vocabulary sizes differ");
  }
  std::vector<SlotPrediction> out;
  std::vector<double> row;
  const auto wte = params.output_projection();
  for (const auto& ep : episodes) {
    if (ep.actions.empty()) continue;
    const EncodedEpisode enc = encode_episode(ep, vocab, opt);
    const Sequence seq = to_sequence(enc);
    const auto hidden = forward_hidden(params, std::span<const Token>(seq.inputs));
    for (std::size_t t = 0; t < seq.inputs.size(); ++t) {
      const Block kind = enc.slot_kind[t + 1];
      const bool attribute = kind != Block::special && kind != Block::player &&
                             kind != Block::minute && kind != Block::count;
      if (static_cast<bool>(seq.mask[t]) != (attribute || seq.targets[t] == kEpisodeEnd)) {
        throw Error(Errc::grammar_violation, "evaluation positions differ from loss mask", t);
      }
      if (!attribute) continue;
      const Token first = vocab.offset(kind);
      const int count = vocab.block_size(kind);
      const auto z = hidden.row(static_cast<Eigen::Index>(t)) * wte.middleRows(first, count).transpose();
      row.resize(static_cast<std::size_t>(count));
      for (int j = 0; j < count; ++j) row[static_cast<std::size_t>(j)] = static_cast<double>(z[j]);
      out.push_back({kind, block_argmax(row, first), seq.targets[t]});
    }
  }
  return out;
}

inline MetricReport evaluate(const ModelParams<float>& params, const Vocabulary& vocab,
                             const std::vector<Episode>& heldout, const EncodeOptions& opt) {
  if (heldout.empty()) throw Error(Errc::degenerate_batch, "empty held-out set");
  const auto preds = collect_predictions(params, vocab, heldout, opt);
  return score_predictions(vocab, preds);
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_TRAINER_HPP_
