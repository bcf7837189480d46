#pragma once

#include <cstddef>
#include <vector>

#include "gft/ops.hpp"
#include "gft/rng.hpp"
#include "gft/tensor.hpp"

namespace gft {

/// y = x . W^T + b, applied over the last axis.
struct LinearLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  static LinearLayer init(int out, int in, RngStream& rng);
  Tensor forward(const Tensor& x) const;
  int in_features() const { return weight.dim(1); }
  int out_features() const { return weight.dim(0); }
  std::size_t param_count() const { return weight.numel() + bias.numel(); }
};

struct LayerNormLayer {
  Tensor gamma;  // [k]
  Tensor beta;   // [k]
  double epsilon = 1e-5;

  static LayerNormLayer init(int k, double epsilon = 1e-5);
  Tensor forward(const Tensor& x) const;
  std::size_t param_count() const { return gamma.numel() + beta.numel(); }
};

struct MultiHeadAttention {
  LinearLayer wq, wk, wv, wo;
  int num_heads = 1;

  static MultiHeadAttention init(int k, int num_heads, RngStream& rng);

  /// Scaled dot-product attention over num_heads heads. keep marks which
  /// (query, key) pairs may attend (true = allowed). attn_dropout applies to
  /// the attention weights; pass rate 0 / null rng for evaluation.
  Tensor forward(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                 const BoolMat* keep = nullptr, double attn_dropout = 0.0,
                 RngStream* dropout_rng = nullptr) const;
  int model_dim() const { return wq.out_features(); }
  std::size_t param_count() const;
};

struct FeedForward {
  LinearLayer lin1;  // [f x k]
  LinearLayer lin2;  // [k x f]

  static FeedForward init(int k, int f, RngStream& rng);
  Tensor forward(const Tensor& x) const;
  std::size_t param_count() const { return lin1.param_count() + lin2.param_count(); }
};

/// Fixed sin/cos position table; contributes no learnable parameters.
struct SinusoidalPositionalEncoding {
  Tensor table;  // [n_max x k]

  static SinusoidalPositionalEncoding make(int n_max, int k);
  /// First len rows as a fresh constant tensor.
  Tensor prefix(int len) const;
};

/// Mean over non-pad positions of the cross-entropy between the smoothed
/// target distribution ((1-s) on the gold id, s/(V-1) elsewhere) and
/// softmax(logits). Pad positions contribute nothing.
Tensor label_smoothed_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                                    double smoothing, int pad_id);

}  // namespace gft
