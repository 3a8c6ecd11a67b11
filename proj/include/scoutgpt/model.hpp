#ifndef SCOUTGPT_MODEL_HPP_
#define SCOUTGPT_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "scoutgpt/error.hpp"
#include "scoutgpt/rng.hpp"
#include "scoutgpt/vocabulary.hpp"

namespace scoutgpt {

struct ModelConfig {
  int vocab_size = 0;
  int block_size = 512;
  int n_layers = 4;
  int n_heads = 4;
  int embed_dim = 128;
  double dropout_rate = 0.0;
  double init_scale = 1.0;

  int head_dim() const { return embed_dim / n_heads; }
  int hidden_dim() const { return 4 * embed_dim; }

  void validate() const {
    if (vocab_size < 1 || block_size < 1 || n_layers < 0 || n_heads < 1 || embed_dim < 1) {
      throw Error(Errc::shape, "model config dimensions must be positive");
    }
    if (embed_dim % n_heads != 0) {
      throw Error(Errc::shape, "embed_dim " + std::to_string(embed_dim) +
                                   " is not divisible by n_heads " + std::to_string(n_heads));
    }
    if (dropout_rate != 0.0) throw Error(Errc::domain, "dropout is not supported; use 0");
    if (!(init_scale >= 0.0)) throw Error(Errc::domain, "init_scale must be >= 0");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"vocab_size", c.vocab_size}, {"block_size", c.block_size},
       {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
       {"embed_dim", c.embed_dim},   {"dropout_rate", c.dropout_rate},
       {"init_scale", c.init_scale}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.block_size = j.value("block_size", d.block_size);
  c.n_layers = j.value("n_layers", d.n_layers);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.dropout_rate = j.value("dropout_rate", d.dropout_rate);
  c.init_scale = j.value("init_scale", d.init_scale);
}

// How a tensor is initialized and whether weight decay applies to it.
enum class TensorRole : std::uint8_t { embedding, weight, residual_out, bias, gain };

struct TensorInfo {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  TensorRole role = TensorRole::weight;

  std::size_t size() const { return rows * cols; }
  bool decays() const {
    return role == TensorRole::embedding || role == TensorRole::weight ||
           role == TensorRole::residual_out;
  }
};

// Indices into ParamLayout::tensors() for one decoder block.
struct BlockTensors {
  std::size_t ln1_gain, ln1_bias;
  std::size_t qkv_weight, qkv_bias;
  std::size_t attn_out_weight, attn_out_bias;
  std::size_t ln2_gain, ln2_bias;
  std::size_t mlp_in_weight, mlp_in_bias;
  std::size_t mlp_out_weight, mlp_out_bias;
};

// Flat-buffer layout. Matrices are row-major and multiply activations from the
// right (x · W). The token embedding doubles as the output projection.
class ParamLayout {
 public:
  ParamLayout() = default;

  explicit ParamLayout(const ModelConfig& cfg) {
    cfg.validate();
    const auto v = static_cast<std::size_t>(cfg.vocab_size);
    const auto b = static_cast<std::size_t>(cfg.block_size);
    const auto d = static_cast<std::size_t>(cfg.embed_dim);
    const auto h = static_cast<std::size_t>(cfg.hidden_dim());
    token_embedding = add("token_embedding", v, d, TensorRole::embedding);
    position_embedding = add("position_embedding", b, d, TensorRole::embedding);
    for (int l = 0; l < cfg.n_layers; ++l) {
      const std::string p = "blocks." + std::to_string(l) + ".";
      BlockTensors t{};
      t.ln1_gain = add(p + "ln1.gain", 1, d, TensorRole::gain);
      t.ln1_bias = add(p + "ln1.bias", 1, d, TensorRole::bias);
      t.qkv_weight = add(p + "attn.qkv.weight", d, 3 * d, TensorRole::weight);
      t.qkv_bias = add(p + "attn.qkv.bias", 1, 3 * d, TensorRole::bias);
      t.attn_out_weight = add(p + "attn.out.weight", d, d, TensorRole::residual_out);
      t.attn_out_bias = add(p + "attn.out.bias", 1, d, TensorRole::bias);
      t.ln2_gain = add(p + "ln2.gain", 1, d, TensorRole::gain);
      t.ln2_bias = add(p + "ln2.bias", 1, d, TensorRole::bias);
      t.mlp_in_weight = add(p + "mlp.in.weight", d, h, TensorRole::weight);
      t.mlp_in_bias = add(p + "mlp.in.bias", 1, h, TensorRole::bias);
      t.mlp_out_weight = add(p + "mlp.out.weight", h, d, TensorRole::residual_out);
      t.mlp_out_bias = add(p + "mlp.out.bias", 1, d, TensorRole::bias);
      blocks.push_back(t);
    }
    final_gain = add("final_ln.gain", 1, d, TensorRole::gain);
    final_bias = add("final_ln.bias", 1, d, TensorRole::bias);
  }

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  // Buffer length including alignment padding.
  std::size_t total() const { return total_; }
  std::size_t parameter_count() const { return count_; }

  std::size_t token_embedding = 0;
  std::size_t position_embedding = 0;
  std::vector<BlockTensors> blocks;
  std::size_t final_gain = 0;
  std::size_t final_bias = 0;

 private:
  // Offsets are padded so every tensor starts on a 64-byte boundary of an aligned
  // buffer; Eigen's vectorized loops otherwise round differently by address.
  static constexpr std::size_t kAlignElements = 16;

  std::size_t add(std::string name, std::size_t rows, std::size_t cols, TensorRole role) {
    total_ = (total_ + kAlignElements - 1) / kAlignElements * kAlignElements;
    tensors_.push_back({std::move(name), rows, cols, total_, role});
    total_ += rows * cols;
    count_ += rows * cols;
    return tensors_.size() - 1;
  }

  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
  std::size_t count_ = 0;
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// All model weights in one contiguous buffer, addressed through Eigen maps.
// Gradients use the same type.
template <typename Scalar>
class ModelParams {
 public:
  using Matrix = RowMatrix<Scalar>;
  using MatMap = Eigen::Map<Matrix>;
  using ConstMatMap = Eigen::Map<const Matrix>;
  using VecMap = Eigen::Map<RowVector<Scalar>>;
  using ConstVecMap = Eigen::Map<const RowVector<Scalar>>;

  ModelParams() = default;

  explicit ModelParams(const ModelConfig& cfg)
      : config_(cfg), layout_(cfg), data_(layout_.total(), Scalar(0)) {}

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t size() const { return data_.size(); }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }

  MatMap mat(std::size_t t) {
    const TensorInfo& i = layout_.tensors()[t];
    return MatMap(data_.data() + i.offset, static_cast<Eigen::Index>(i.rows),
                  static_cast<Eigen::Index>(i.cols));
  }
  ConstMatMap mat(std::size_t t) const {
    const TensorInfo& i = layout_.tensors()[t];
    return ConstMatMap(data_.data() + i.offset, static_cast<Eigen::Index>(i.rows),
                       static_cast<Eigen::Index>(i.cols));
  }
  VecMap vec(std::size_t t) {
    const TensorInfo& i = layout_.tensors()[t];
    return VecMap(data_.data() + i.offset, static_cast<Eigen::Index>(i.size()));
  }
  ConstVecMap vec(std::size_t t) const {
    const TensorInfo& i = layout_.tensors()[t];
    return ConstVecMap(data_.data() + i.offset, static_cast<Eigen::Index>(i.size()));
  }

  MatMap token_embedding() { return mat(layout_.token_embedding); }
  ConstMatMap token_embedding() const { return mat(layout_.token_embedding); }
  // Tied: the output projection is the token embedding storage itself.
  ConstMatMap output_projection() const { return mat(layout_.token_embedding); }
  MatMap position_embedding() { return mat(layout_.position_embedding); }
  ConstMatMap position_embedding() const { return mat(layout_.position_embedding); }

  void set_zero() { std::fill(data_.begin(), data_.end(), Scalar(0)); }

  ModelParams zeros_like() const {
    ModelParams out;
    out.config_ = config_;
    out.layout_ = layout_;
    out.data_.assign(data_.size(), Scalar(0));
    return out;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out(config_);
    auto dst = out.values();
    for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<Other>(data_[i]);
    return out;
  }

 private:
  ModelConfig config_;
  ParamLayout layout_;
  std::vector<Scalar, Eigen::aligned_allocator<Scalar>> data_;
};

// Embeddings and weights ~ N(0, (0.02 * init_scale)^2); biases and the two
// residual output projections start at zero; layer-norm gains at one.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<Scalar> p(cfg);
  Rng rng(derive_seed(seed, 0x1417));
  const double std_dev = 0.02 * cfg.init_scale;
  for (std::size_t t = 0; t < p.layout().tensors().size(); ++t) {
    const TensorInfo& info = p.layout().tensors()[t];
    auto v = p.vec(t);
    switch (info.role) {
      case TensorRole::embedding:
      case TensorRole::weight:
        for (Eigen::Index i = 0; i < v.size(); ++i) {
          v[i] = static_cast<Scalar>(std_dev * normal01(rng));
        }
        break;
      case TensorRole::gain: v.setOnes(); break;
      case TensorRole::residual_out:
      case TensorRole::bias: v.setZero(); break;
    }
  }
  return p;
}

inline std::size_t parameter_count(const ModelConfig& cfg) { return ParamLayout(cfg).parameter_count(); }

// Row of the shared embedding for a player token; these rows are the player embeddings.
template <typename Scalar>
std::vector<Scalar> embedding_row(const ModelParams<Scalar>& p, const Vocabulary& vocab,
                                  Token token) {
  if (!vocab.in_block(token, Block::player)) {
    throw Error(Errc::domain, "token " + std::to_string(token) + " is not a player token");
  }
  if (token >= p.config().vocab_size) {
    throw Error(Errc::shape, "token outside model vocabulary");
  }
  auto row = p.token_embedding().row(token);
  return std::vector<Scalar>(row.data(), row.data() + row.size());
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_MODEL_HPP_
