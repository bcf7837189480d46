#include "gft/ops.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace gft::ops {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

void check_finite(const char* op, const Tensor& t) {
  for (double x : t.data()) {
    if (!std::isfinite(x)) {
      throw ValueError(std::string(op) + ": non-finite result");
    }
  }
}

bool grads_wanted(std::initializer_list<const Tensor*> inputs) {
  if (!active_tape()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Records the node if a tape is active and some input requires grad; the
// backward closure receives the output gradient already accumulated.
void record(std::initializer_list<const Tensor*> inputs, const Tensor& out,
            std::function<void()> backward) {
  if (!grads_wanted(inputs)) return;
  out.impl()->requires_grad = true;
  TapeNode node;
  for (const Tensor* t : inputs) node.inputs.push_back(t->impl());
  node.output = out.impl();
  node.backward = std::move(backward);
  active_tape()->record(std::move(node));
}

// Interprets a tensor as [rows x cols] with cols = last axis.
void as_matrix(const Tensor& t, std::size_t& rows, std::size_t& cols) {
  cols = static_cast<std::size_t>(t.shape().back());
  rows = t.numel() / cols;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
  check_finite("add", out);
  record({&a, &b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
    const auto& g = oi->grad;
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i];
  check_finite("sub", out);
  record({&a, &b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
    const auto& g = oi->grad;
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] -= g[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] * bv[i];
  check_finite("mul", out);
  record({&a, &b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
    const auto& g = oi->grad;
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i] * ai->data[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  const auto& av = a.data();
  auto& ov = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] * c;
  check_finite("scale", out);
  record({&a}, out, [ai = a.impl(), oi = out.impl(), c] {
    if (!ai->requires_grad) return;
    ai->ensure_grad();
    const auto& g = oi->grad;
    for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * c;
  });
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) +
                     " does not match last axis of " + shape_str(x.shape()));
  }
  std::size_t rows, cols;
  as_matrix(x, rows, cols);
  Tensor out = Tensor::zeros(x.shape());
  const auto& xv = x.data();
  const auto& bv = bias.data();
  auto& ov = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * cols;
    for (std::size_t c = 0; c < cols; ++c) ov[base + c] = xv[base + c] + bv[c];
  }
  check_finite("add_bias", out);
  record({&x, &bias}, out,
         [xi = x.impl(), bi = bias.impl(), oi = out.impl(), rows, cols] {
           const auto& g = oi->grad;
           if (xi->requires_grad) {
             xi->ensure_grad();
             for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
           }
           if (bi->requires_grad) {
             bi->ensure_grad();
             for (std::size_t r = 0; r < rows; ++r) {
               const std::size_t base = r * cols;
               for (std::size_t c = 0; c < cols; ++c) bi->grad[c] += g[base + c];
             }
           }
         });
  return out;
}

namespace {

Tensor unary_op(const char* name, const Tensor& a, double (*fwd)(double),
                double (*dydx_from_y)(double)) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  const auto& av = a.data();
  auto& ov = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[i]);
  check_finite(name, out);
  record({&a}, out, [ai = a.impl(), oi = out.impl(), dydx_from_y] {
    if (!ai->requires_grad) return;
    ai->ensure_grad();
    const auto& g = oi->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ai->grad[i] += g[i] * dydx_from_y(oi->data[i]);
    }
  });
  return out;
}

}  // namespace

Tensor relu(const Tensor& a) {
  for (double x : a.data()) note_relu_input(x);
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a,
      [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double y) { return 1.0 - y * y; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = static_cast<std::size_t>(a.dim(0));
  const std::size_t p = static_cast<std::size_t>(a.dim(1));
  const std::size_t q = static_cast<std::size_t>(b.dim(1));
  Tensor out = Tensor::zeros({a.dim(0), b.dim(1)});
  const double* av = a.data().data();
  const double* bv = b.data().data();
  double* ov = out.mutable_data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = ov + i * q;
    for (std::size_t l = 0; l < p; ++l) {
      const double ail = av[i * p + l];
      const double* brow = bv + l * q;
      for (std::size_t j = 0; j < q; ++j) orow[j] += ail * brow[j];
    }
  }
  check_finite("matmul", out);
  record({&a, &b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, p, q] {
    const double* g = oi->grad.data();
    if (ai->requires_grad) {
      ai->ensure_grad();
      // dA = dC . B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < p; ++l) {
          const double* grow = g + i * q;
          const double* brow = bi->data.data() + l * q;
          double acc = 0.0;
          for (std::size_t j = 0; j < q; ++j) acc += grow[j] * brow[j];
          ai->grad[i * p + l] += acc;
        }
      }
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      // dB = A^T . dC
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * q;
        for (std::size_t l = 0; l < p; ++l) {
          const double ail = ai->data[i * p + l];
          double* brow = bi->grad.data() + l * q;
          for (std::size_t j = 0; j < q; ++j) brow[j] += ail * grow[j];
        }
      }
    }
  });
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t m = static_cast<std::size_t>(a.dim(0));
  const std::size_t p = static_cast<std::size_t>(a.dim(1));
  const std::size_t q = static_cast<std::size_t>(b.dim(0));
  Tensor out = Tensor::zeros({a.dim(0), b.dim(0)});
  const double* av = a.data().data();
  const double* bv = b.data().data();
  double* ov = out.mutable_data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = av + i * p;
    double* orow = ov + i * q;
    for (std::size_t j = 0; j < q; ++j) {
      const double* brow = bv + j * p;
      double acc = 0.0;
      for (std::size_t l = 0; l < p; ++l) acc += arow[l] * brow[l];
      orow[j] = acc;
    }
  }
  check_finite("matmul_nt", out);
  record({&a, &b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, p, q] {
    const double* g = oi->grad.data();
    if (ai->requires_grad) {
      ai->ensure_grad();
      // dA = dC . B
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * q;
        double* arow = ai->grad.data() + i * p;
        for (std::size_t j = 0; j < q; ++j) {
          const double gij = grow[j];
          const double* brow = bi->data.data() + j * p;
          for (std::size_t l = 0; l < p; ++l) arow[l] += gij * brow[l];
        }
      }
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      // dB = dC^T . A
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * q;
        const double* arow = ai->data.data() + i * p;
        for (std::size_t j = 0; j < q; ++j) {
          const double gij = grow[j];
          double* brow = bi->grad.data() + j * p;
          for (std::size_t l = 0; l < p; ++l) brow[l] += gij * arow[l];
        }
      }
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: rank-2 tensor required");
  const std::size_t r = static_cast<std::size_t>(a.dim(0));
  const std::size_t c = static_cast<std::size_t>(a.dim(1));
  Tensor out = Tensor::zeros({a.dim(1), a.dim(0)});
  const auto& av = a.data();
  auto& ov = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) ov[j * r + i] = av[i * c + j];
  record({&a}, out, [ai = a.impl(), oi = out.impl(), r, c] {
    if (!ai->requires_grad) return;
    ai->ensure_grad();
    const auto& g = oi->grad;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ai->grad[i * c + j] += g[j * r + i];
  });
  return out;
}

Tensor softmax_rows(const Tensor& a, const BoolMat* keep) {
  if (a.rank() != 2) throw ShapeError("softmax_rows: rank-2 tensor required");
  const int rows = a.dim(0);
  const int cols = a.dim(1);
  if (keep && (keep->rows != rows || keep->cols != cols)) {
    throw ShapeError("softmax_rows: mask shape mismatch");
  }
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.data();
  auto& ov = out.mutable_data();
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c) {
      if (keep && !keep->at(r, c)) continue;
      mx = std::max(mx, av[base + c]);
    }
    if (!std::isfinite(mx)) {
      throw ValueError("softmax_rows: fully masked row " + std::to_string(r));
    }
    double z = 0.0;
    for (int c = 0; c < cols; ++c) {
      if (keep && !keep->at(r, c)) continue;
      const double e = std::exp(av[base + c] - mx);
      ov[base + c] = e;
      z += e;
    }
    for (int c = 0; c < cols; ++c) {
      if (keep && !keep->at(r, c)) {
        ov[base + c] = 0.0;
      } else {
        ov[base + c] /= z;
      }
    }
  }
  check_finite("softmax_rows", out);
  BoolMat mask_copy = keep ? *keep : BoolMat();
  record({&a}, out,
         [ai = a.impl(), oi = out.impl(), rows, cols, mask = std::move(mask_copy),
          masked = keep != nullptr] {
           if (!ai->requires_grad) return;
           ai->ensure_grad();
           const auto& g = oi->grad;
           const auto& y = oi->data;
           for (int r = 0; r < rows; ++r) {
             const std::size_t base = static_cast<std::size_t>(r) * cols;
             double dot = 0.0;
             for (int c = 0; c < cols; ++c) dot += g[base + c] * y[base + c];
             for (int c = 0; c < cols; ++c) {
               if (masked && !mask.at(r, c)) continue;
               ai->grad[base + c] += y[base + c] * (g[base + c] - dot);
             }
           }
         });
  return out;
}

Tensor slice_cols(const Tensor& a, int start, int len) {
  if (a.rank() != 2) throw ShapeError("slice_cols: rank-2 tensor required");
  const int cols = a.dim(1);
  if (start < 0 || len <= 0 || start + len > cols) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of " + std::to_string(cols));
  }
  const std::size_t rows = static_cast<std::size_t>(a.dim(0));
  Tensor out = Tensor::zeros({a.dim(0), len});
  const auto& av = a.data();
  auto& ov = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::memcpy(ov.data() + r * len, av.data() + r * cols + start,
                sizeof(double) * static_cast<std::size_t>(len));
  }
  record({&a}, out, [ai = a.impl(), oi = out.impl(), rows, cols, start, len] {
    if (!ai->requires_grad) return;
    ai->ensure_grad();
    const auto& g = oi->grad;
    for (std::size_t r = 0; r < rows; ++r) {
      for (int c = 0; c < len; ++c) {
        ai->grad[r * cols + start + c] += g[r * len + c];
      }
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int rows = parts[0].dim(0);
  int cols = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows) {
      throw ShapeError("concat_cols: row mismatch");
    }
    cols += p.dim(1);
  }
  Tensor out = Tensor::zeros({rows, cols});
  auto& ov = out.mutable_data();
  int offset = 0;
  for (const Tensor& p : parts) {
    const int pc = p.dim(1);
    const auto& pv = p.data();
    for (int r = 0; r < rows; ++r) {
      std::memcpy(ov.data() + static_cast<std::size_t>(r) * cols + offset,
                  pv.data() + static_cast<std::size_t>(r) * pc,
                  sizeof(double) * static_cast<std::size_t>(pc));
    }
    offset += pc;
  }

  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
  if (active_tape() && any_grad) {
    out.impl()->requires_grad = true;
    TapeNode node;
    for (const Tensor& p : parts) node.inputs.push_back(p.impl());
    node.output = out.impl();
    auto inputs = node.inputs;
    node.backward = [inputs, oi = out.impl(), rows, cols] {
      const auto& g = oi->grad;
      int offset2 = 0;
      for (const auto& pi : inputs) {
        const int pc = pi->shape[1];
        if (pi->requires_grad) {
          pi->ensure_grad();
          for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < pc; ++c) {
              pi->grad[static_cast<std::size_t>(r) * pc + c] +=
                  g[static_cast<std::size_t>(r) * cols + offset2 + c];
            }
          }
        }
        offset2 += pc;
      }
    };
    active_tape()->record(std::move(node));
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw ShapeError("gather_rows: rank-2 table required");
  const int v = table.dim(0);
  const std::size_t cols = static_cast<std::size_t>(table.dim(1));
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ValueError("gather_rows: id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(v) + ")");
    }
  }
  Tensor out = Tensor::zeros({static_cast<int>(ids.size()), table.dim(1)});
  const auto& tv = table.data();
  auto& ov = out.mutable_data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::memcpy(ov.data() + i * cols, tv.data() + static_cast<std::size_t>(ids[i]) * cols,
                sizeof(double) * cols);
  }
  record({&table}, out, [ti = table.impl(), oi = out.impl(), ids, cols] {
    if (!ti->requires_grad) return;
    ti->ensure_grad();
    const auto& g = oi->grad;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      double* trow = ti->grad.data() + static_cast<std::size_t>(ids[i]) * cols;
      const double* grow = g.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) trow[c] += grow[c];
    }
  });
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  Tensor out = Tensor::scalar(acc);
  check_finite("sum", out);
  record({&a}, out, [ai = a.impl(), oi = out.impl()] {
    if (!ai->requires_grad) return;
    ai->ensure_grad();
    const double g = oi->grad[0];
    for (double& x : ai->grad) x += g;
  });
  return out;
}

Tensor dropout(const Tensor& a, double rate, RngStream* rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ValueError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (rate == 0.0) return a;
  if (!rng) throw ValueError("dropout: rng stream required for rate > 0");
  const double keep = 1.0 - rate;
  const double inv = 1.0 / keep;
  const std::size_t n = a.numel();
  std::vector<double> mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng->uniform() < keep ? inv : 0.0;
  }
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.data();
  auto& ov = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] * mask[i];
  record({&a}, out, [ai = a.impl(), oi = out.impl(), mask = std::move(mask)] {
    if (!ai->requires_grad) return;
    ai->ensure_grad();
    const auto& g = oi->grad;
    for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * mask[i];
  });
  return out;
}

namespace {
thread_local KinkGuard* g_kink_guard = nullptr;
}

KinkGuard::KinkGuard() : prev_(g_kink_guard), min_abs_(std::numeric_limits<double>::infinity()) {
  g_kink_guard = this;
}

KinkGuard::~KinkGuard() { g_kink_guard = prev_; }

double KinkGuard::min_abs() const { return min_abs_; }

void note_relu_input(double x) {
  for (KinkGuard* g = g_kink_guard; g; g = g->prev_) {
    g->min_abs_ = std::min(g->min_abs_, std::abs(x));
  }
}

}  // namespace gft::ops
