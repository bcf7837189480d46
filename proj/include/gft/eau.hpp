#pragma once

#include <cstddef>

#include "gft/rng.hpp"
#include "gft/tensor.hpp"

namespace gft {

/// Evaluator Adjuster Unit. Two branches read the same k-vector x:
/// an evaluation network e = sigmoid(W2 relu(W1 x + b1) + b2) scoring each
/// component, and an adjustment network a = tanh(W3 x + b3). The output is
/// y = x + a (*) e, applied position-wise over [seq x k] activations.
struct EvaluatorAdjusterUnit {
  Tensor w1;  // [k/2 x k]
  Tensor b1;  // [k/2]
  Tensor w2;  // [k x k/2]
  Tensor b2;  // [k]
  Tensor w3;  // [k x k]
  Tensor b3;  // [k]
  int k = 0;

  /// k must be even: the evaluation network halves the dimension.
  static EvaluatorAdjusterUnit init(int k, RngStream& rng);

  Tensor forward(const Tensor& x) const;

  struct Intermediates {
    Tensor h;  // [rows x k/2], relu output
    Tensor e;  // [rows x k], evaluation scores in (0, 1)
    Tensor a;  // [rows x k], adjustments in (-1, 1)
  };
  /// Same computation as forward, exposing the branch activations.
  Intermediates intermediates(const Tensor& x) const;

  std::size_t param_count() const;
};

/// 2k^2 + 5k/2
std::size_t eau_param_count(int k);

}  // namespace gft
