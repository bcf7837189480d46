#include "gft/eau.hpp"

#include <cmath>
#include <string>

#include "gft/ops.hpp"

namespace gft {

namespace {

Tensor uniform_weights(int out, int in, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w = Tensor::zeros({out, in}, /*requires_grad=*/true);
  for (double& x : w.mutable_data()) x = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

EvaluatorAdjusterUnit EvaluatorAdjusterUnit::init(int k, RngStream& rng) {
  if (k < 2 || k % 2 != 0) {
    throw ShapeError("eau: k must be even and >= 2, got " + std::to_string(k));
  }
  EvaluatorAdjusterUnit u;
  u.k = k;
  u.w1 = uniform_weights(k / 2, k, rng);
  u.b1 = Tensor::zeros({k / 2}, /*requires_grad=*/true);
  u.w2 = uniform_weights(k, k / 2, rng);
  u.b2 = Tensor::zeros({k}, /*requires_grad=*/true);
  u.w3 = uniform_weights(k, k, rng);
  u.b3 = Tensor::zeros({k}, /*requires_grad=*/true);
  return u;
}

EvaluatorAdjusterUnit::Intermediates EvaluatorAdjusterUnit::intermediates(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != k) {
    throw ShapeError("eau: input " + shape_str(x.shape()) + " does not match k=" +
                     std::to_string(k));
  }
  Intermediates m;
  m.h = ops::relu(ops::add_bias(ops::matmul_nt(x, w1), b1));
  m.e = ops::sigmoid(ops::add_bias(ops::matmul_nt(m.h, w2), b2));
  m.a = ops::tanh(ops::add_bias(ops::matmul_nt(x, w3), b3));
  return m;
}

Tensor EvaluatorAdjusterUnit::forward(const Tensor& x) const {
  Intermediates m = intermediates(x);
  return ops::add(x, ops::mul(m.a, m.e));
}

std::size_t EvaluatorAdjusterUnit::param_count() const {
  return w1.numel() + b1.numel() + w2.numel() + b2.numel() + w3.numel() + b3.numel();
}

std::size_t eau_param_count(int k) {
  const std::size_t kk = static_cast<std::size_t>(k);
  return 2 * kk * kk + 5 * kk / 2;
}

}  // namespace gft
