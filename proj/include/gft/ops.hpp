#pragma once

#include <vector>

#include "gft/rng.hpp"
#include "gft/tensor.hpp"

namespace gft::ops {

// Elementwise binary ops require identical shapes; the only broadcast in the
// library is add_bias over the last axis.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

/// [R x C] + [C]
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

/// [m x p] . [p x q]
Tensor matmul(const Tensor& a, const Tensor& b);
/// a . b^T without materializing the transpose: [m x p] . [q x p] -> [m x q]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Row-wise softmax with optional participation mask (true = keep).
/// Masked entries are exactly zero in the output.
Tensor softmax_rows(const Tensor& a, const BoolMat* keep = nullptr);

Tensor slice_cols(const Tensor& a, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);

/// Embedding lookup: rows of table selected by id. [V x C], ids -> [N x C]
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

/// Sum of all elements -> scalar.
Tensor sum(const Tensor& a);

/// Inverted dropout. rate 0 returns the input unchanged and consumes no
/// randomness; rng may be null only when rate is 0.
Tensor dropout(const Tensor& a, double rate, RngStream* rng);

void note_relu_input(double x);

/// Min |pre-activation| seen by relu while a guard is alive. The gradient
/// checker uses it to resample probe points that sit on the kink.
class KinkGuard {
 public:
  KinkGuard();
  ~KinkGuard();
  KinkGuard(const KinkGuard&) = delete;
  KinkGuard& operator=(const KinkGuard&) = delete;
  double min_abs() const;

 private:
  KinkGuard* prev_;
  double min_abs_;
  friend void note_relu_input(double);
};

}  // namespace gft::ops
