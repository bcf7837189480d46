#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gft/eau.hpp"
#include "gft/grc.hpp"
#include "gft/layers.hpp"
#include "gft/tensor.hpp"

namespace gft {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  int num_layers = 0;    // l: encoder and decoder depth
  int max_seq_len = 0;   // n
  int model_dim = 0;     // k
  int ffn_dim = 0;       // f
  int num_heads = 0;     // 0 = pick default for k
  double dropout = 0.0;
  bool use_eau = false;
  bool use_grc = false;
  int src_vocab_size = 0;
  int tgt_vocab_size = 0;
  double label_smoothing = 0.0;
  std::uint64_t seed = 0;

  // Choices the tables are silent about, recorded so runs are reproducible.
  double layer_norm_eps = 1e-5;
  double gate_bias_init = 0.0;
  bool scale_embeddings = true;

  /// Throws ConfigError on any invariant violation; resolves num_heads = 0
  /// to the default for model_dim (8 when 256 <= k, else 4).
  void validate_and_resolve();
};

/// Post-norm encoder sublayers: self-attention then feed-forward, each
/// followed by (optionally gated) residual add and LayerNorm. The EAU, when
/// present, processes the attention output before the residual add.
struct EncoderLayer {
  MultiHeadAttention self_attn;
  std::optional<EvaluatorAdjusterUnit> eau;
  std::optional<GatedResidualConnection> grc1;
  LayerNormLayer norm1;
  FeedForward ffn;
  std::optional<GatedResidualConnection> grc2;
  LayerNormLayer norm2;
};

struct DecoderLayer {
  MultiHeadAttention self_attn;
  std::optional<EvaluatorAdjusterUnit> eau1;
  std::optional<GatedResidualConnection> grc1;
  LayerNormLayer norm1;
  MultiHeadAttention cross_attn;
  std::optional<EvaluatorAdjusterUnit> eau2;
  std::optional<GatedResidualConnection> grc2;
  LayerNormLayer norm2;
  FeedForward ffn;
  std::optional<GatedResidualConnection> grc3;
  LayerNormLayer norm3;
};

/// Masks consumed by one forward pass. All are participation masks
/// (true = the (query, key) pair may attend).
struct ForwardMasks {
  BoolMat enc_self;   // [S_src x S_src]
  BoolMat dec_self;   // [S_tgt x S_tgt], causal
  BoolMat dec_cross;  // [S_tgt x S_src]
};

/// Builds the masks implied by pad positions: source pads are never attended
/// to, decoder self-attention is causal.
ForwardMasks make_masks(const std::vector<int>& src_ids, int tgt_len, int pad_id);

struct NamedParam {
  std::string name;
  Tensor tensor;
};

class TransformerModel {
 public:
  ModelConfig cfg;
  Tensor src_embedding;  // [V_src x k]
  Tensor tgt_embedding;  // [V_tgt x k]
  SinusoidalPositionalEncoding positional;
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  LinearLayer generator;  // [V_tgt x k], biased

  /// Encoder output for a source sequence: [S_src x k].
  Tensor encode(const std::vector<int>& src_ids, const BoolMat& self_keep,
                RngStream* dropout_rng = nullptr) const;

  /// Teacher-forced next-token logits, [S_tgt x V_tgt].
  Tensor decode(const std::vector<int>& tgt_in_ids, const Tensor& enc_out,
                const BoolMat& self_keep, const BoolMat& cross_keep,
                RngStream* dropout_rng = nullptr) const;

  /// Full forward pass over one sequence pair. Pass a dropout stream only
  /// during training; evaluation runs with dropout off.
  Tensor forward(const std::vector<int>& src_ids, const std::vector<int>& tgt_in_ids,
                 const ForwardMasks& masks, RngStream* dropout_rng = nullptr) const;

  /// Greedy decoding from BOS: appends the argmax token until EOS or
  /// max_len tokens. Returns generated ids (EOS included when produced).
  std::vector<int> greedy_decode(const std::vector<int>& src_ids, int max_len, int bos_id,
                                 int eos_id, int pad_id) const;

  /// Every trainable tensor with a stable name, in construction order.
  std::vector<NamedParam> named_parameters() const;
  std::size_t count_params() const;

  /// Test hook: force every gate open so gated residuals reduce to plain
  /// residual adds.
  void set_force_gates_open(bool open);
};

TransformerModel build_model(const ModelConfig& cfg);

}  // namespace gft
