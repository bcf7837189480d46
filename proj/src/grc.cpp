#include "gft/grc.hpp"

#include <cmath>
#include <string>

#include "gft/ops.hpp"

namespace gft {

GatedResidualConnection GatedResidualConnection::init(int k, RngStream& rng,
                                                      double gate_bias_init) {
  if (k < 1) throw ShapeError("grc: k must be positive, got " + std::to_string(k));
  GatedResidualConnection g;
  g.k = k;
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  g.wg = Tensor::zeros({k, k}, /*requires_grad=*/true);
  for (double& x : g.wg.mutable_data()) x = rng.uniform(-bound, bound);
  g.bg = Tensor::full({k}, gate_bias_init, /*requires_grad=*/true);
  return g;
}

Tensor GatedResidualConnection::gate(const Tensor& r) const {
  if (r.rank() != 2 || r.dim(1) != k) {
    throw ShapeError("grc: input " + shape_str(r.shape()) + " does not match k=" +
                     std::to_string(k));
  }
  return ops::sigmoid(ops::add_bias(ops::matmul_nt(r, wg), bg));
}

Tensor GatedResidualConnection::forward(const Tensor& r, const Tensor& s) const {
  if (r.shape() != s.shape()) {
    throw ShapeError("grc: residual " + shape_str(r.shape()) + " vs sublayer " +
                     shape_str(s.shape()));
  }
  if (force_open) return ops::add(r, s);
  return ops::add(r, ops::mul(gate(r), s));
}

std::size_t grc_param_count(int k) {
  const std::size_t kk = static_cast<std::size_t>(k);
  return kk * kk + kk;
}

}  // namespace gft
