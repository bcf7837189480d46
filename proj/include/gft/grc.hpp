#pragma once

#include <cstddef>

#include "gft/rng.hpp"
#include "gft/tensor.hpp"

namespace gft {

/// Gated residual connection. The residual-stream input r drives a gate
/// g = sigmoid(Wg r + bg) that scales the sublayer output s before the add:
/// y = r + g (*) s. With g == 1 this is the standard residual.
struct GatedResidualConnection {
  Tensor wg;  // [k x k]
  Tensor bg;  // [k]
  int k = 0;
  /// Test hook: forces g == 1 so the standard residual is recovered exactly.
  bool force_open = false;

  static GatedResidualConnection init(int k, RngStream& rng, double gate_bias_init = 0.0);

  /// r and s must both be [rows x k].
  Tensor forward(const Tensor& r, const Tensor& s) const;
  /// The gate values for inspection; same shape as r.
  Tensor gate(const Tensor& r) const;

  std::size_t param_count() const { return wg.numel() + bg.numel(); }
};

/// k^2 + k
std::size_t grc_param_count(int k);

}  // namespace gft
