#include "gft/layers.hpp"

#include <cmath>
#include <string>

namespace gft {

namespace {

Tensor uniform_fan_in(int out, int in, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w = Tensor::zeros({out, in}, /*requires_grad=*/true);
  for (double& x : w.mutable_data()) x = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

LinearLayer LinearLayer::init(int out, int in, RngStream& rng) {
  if (out <= 0 || in <= 0) {
    throw ShapeError("linear: dimensions must be positive, got out=" + std::to_string(out) +
                     " in=" + std::to_string(in));
  }
  LinearLayer layer;
  layer.weight = uniform_fan_in(out, in, rng);
  layer.bias = Tensor::zeros({out}, /*requires_grad=*/true);
  return layer;
}

Tensor LinearLayer::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != weight.dim(1)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  return ops::add_bias(ops::matmul_nt(x, weight), bias);
}

LayerNormLayer LayerNormLayer::init(int k, double epsilon) {
  if (k <= 0) throw ShapeError("layer_norm: k must be positive");
  LayerNormLayer layer;
  layer.gamma = Tensor::full({k}, 1.0, /*requires_grad=*/true);
  layer.beta = Tensor::zeros({k}, /*requires_grad=*/true);
  layer.epsilon = epsilon;
  return layer;
}

Tensor LayerNormLayer::forward(const Tensor& x) const {
  const int k = gamma.dim(0);
  if (x.rank() != 2 || x.dim(1) != k) {
    throw ShapeError("layer_norm: input " + shape_str(x.shape()) + " does not match k=" +
                     std::to_string(k));
  }
  const std::size_t rows = static_cast<std::size_t>(x.dim(0));
  const std::size_t cols = static_cast<std::size_t>(k);
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> inv_std(rows);
  std::vector<double> xhat(rows * cols);
  const auto& xv = x.data();
  const auto& gv = gamma.data();
  const auto& bv = beta.data();
  auto& ov = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xv[base + c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xv[base + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + epsilon);
    inv_std[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (xv[base + c] - mean) * is;
      xhat[base + c] = h;
      ov[base + c] = gv[c] * h + bv[c];
    }
  }

  if (active_tape() && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
    out.impl()->requires_grad = true;
    TapeNode node;
    node.inputs = {x.impl(), gamma.impl(), beta.impl()};
    node.output = out.impl();
    node.backward = [xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl(),
                     inv_std = std::move(inv_std), xhat = std::move(xhat), rows, cols] {
      const auto& g = oi->grad;
      if (gi->requires_grad) {
        gi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            gi->grad[c] += g[r * cols + c] * xhat[r * cols + c];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) bi->grad[c] += g[r * cols + c];
      }
      if (xi->requires_grad) {
        xi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t base = r * cols;
          double mean_dh = 0.0;
          double mean_dh_xhat = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double dh = g[base + c] * gi->data[c];
            mean_dh += dh;
            mean_dh_xhat += dh * xhat[base + c];
          }
          mean_dh /= static_cast<double>(cols);
          mean_dh_xhat /= static_cast<double>(cols);
          for (std::size_t c = 0; c < cols; ++c) {
            const double dh = g[base + c] * gi->data[c];
            xi->grad[base + c] +=
                inv_std[r] * (dh - mean_dh - xhat[base + c] * mean_dh_xhat);
          }
        }
      }
    };
    active_tape()->record(std::move(node));
  }
  return out;
}

MultiHeadAttention MultiHeadAttention::init(int k, int num_heads, RngStream& rng) {
  if (num_heads <= 0 || k % num_heads != 0) {
    throw ShapeError("attention: num_heads " + std::to_string(num_heads) +
                     " must divide model dim " + std::to_string(k));
  }
  MultiHeadAttention mha;
  mha.wq = LinearLayer::init(k, k, rng);
  mha.wk = LinearLayer::init(k, k, rng);
  mha.wv = LinearLayer::init(k, k, rng);
  mha.wo = LinearLayer::init(k, k, rng);
  mha.num_heads = num_heads;
  return mha;
}

std::size_t MultiHeadAttention::param_count() const {
  return wq.param_count() + wk.param_count() + wv.param_count() + wo.param_count();
}

Tensor MultiHeadAttention::forward(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                                   const BoolMat* keep, double attn_dropout,
                                   RngStream* dropout_rng) const {
  const int k = model_dim();
  if (q_in.rank() != 2 || k_in.rank() != 2 || v_in.rank() != 2 || q_in.dim(1) != k ||
      k_in.dim(1) != k || v_in.dim(1) != k) {
    throw ShapeError("attention: inputs must be [seq x " + std::to_string(k) + "]");
  }
  if (k_in.dim(0) != v_in.dim(0)) {
    throw ShapeError("attention: key/value length mismatch");
  }
  if (keep && (keep->rows != q_in.dim(0) || keep->cols != k_in.dim(0))) {
    throw ShapeError("attention: mask must be [seq_q x seq_k]");
  }
  const int d = k / num_heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(d));

  Tensor q = wq.forward(q_in);
  Tensor kk = wk.forward(k_in);
  Tensor v = wv.forward(v_in);

  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    Tensor qh = ops::slice_cols(q, h * d, d);
    Tensor kh = ops::slice_cols(kk, h * d, d);
    Tensor vh = ops::slice_cols(v, h * d, d);
    Tensor scores = ops::scale(ops::matmul_nt(qh, kh), scl);
    Tensor weights = ops::softmax_rows(scores, keep);
    weights = ops::dropout(weights, attn_dropout, dropout_rng);
    heads.push_back(ops::matmul(weights, vh));
  }
  return wo.forward(ops::concat_cols(heads));
}

FeedForward FeedForward::init(int k, int f, RngStream& rng) {
  FeedForward ffn;
  ffn.lin1 = LinearLayer::init(f, k, rng);
  ffn.lin2 = LinearLayer::init(k, f, rng);
  return ffn;
}

Tensor FeedForward::forward(const Tensor& x) const {
  return lin2.forward(ops::relu(lin1.forward(x)));
}

SinusoidalPositionalEncoding SinusoidalPositionalEncoding::make(int n_max, int k) {
  if (n_max <= 0 || k <= 0) throw ShapeError("positional encoding: bad dims");
  SinusoidalPositionalEncoding pe;
  pe.table = Tensor::zeros({n_max, k});
  auto& tv = pe.table.mutable_data();
  for (int pos = 0; pos < n_max; ++pos) {
    for (int i = 0; i < k; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / k);
      const double angle = pos * rate;
      tv[static_cast<std::size_t>(pos) * k + i] = std::sin(angle);
      if (i + 1 < k) tv[static_cast<std::size_t>(pos) * k + i + 1] = std::cos(angle);
    }
  }
  return pe;
}

Tensor SinusoidalPositionalEncoding::prefix(int len) const {
  if (len <= 0 || len > table.dim(0)) {
    throw ShapeError("positional encoding: length " + std::to_string(len) +
                     " exceeds table rows " + std::to_string(table.dim(0)));
  }
  const int k = table.dim(1);
  std::vector<double> rows(table.data().begin(),
                           table.data().begin() + static_cast<std::size_t>(len) * k);
  return Tensor::from({len, k}, std::move(rows));
}

Tensor label_smoothed_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                                    double smoothing, int pad_id) {
  if (logits.rank() != 2) throw ShapeError("loss: logits must be [N x V]");
  const int n = logits.dim(0);
  const int v = logits.dim(1);
  if (static_cast<int>(targets.size()) != n) {
    throw ShapeError("loss: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(n) + " rows");
  }
  if (smoothing < 0.0 || smoothing >= 1.0) {
    throw ValueError("loss: smoothing must be in [0, 1)");
  }
  for (int t : targets) {
    if (t < 0 || t >= v) throw ValueError("loss: target id " + std::to_string(t) + " out of range");
  }

  std::size_t live = 0;
  for (int t : targets) live += (t != pad_id) ? 1 : 0;
  if (live == 0) throw ValueError("loss: batch contains only pad positions");

  const double gold_w = 1.0 - smoothing;
  const double other_w = v > 1 ? smoothing / (v - 1) : 0.0;
  const auto& lv = logits.data();
  std::vector<double> log_probs(static_cast<std::size_t>(n) * v);
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    if (targets[r] == pad_id) continue;
    const std::size_t base = static_cast<std::size_t>(r) * v;
    double mx = lv[base];
    for (int c = 1; c < v; ++c) mx = std::max(mx, lv[base + c]);
    double z = 0.0;
    for (int c = 0; c < v; ++c) z += std::exp(lv[base + c] - mx);
    const double lse = mx + std::log(z);
    double row_loss = 0.0;
    for (int c = 0; c < v; ++c) {
      const double lp = lv[base + c] - lse;
      log_probs[base + c] = lp;
      row_loss -= (c == targets[r] ? gold_w : other_w) * lp;
    }
    total += row_loss;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(live));
  if (!std::isfinite(out.value())) throw ValueError("loss: non-finite result");

  if (active_tape() && logits.requires_grad()) {
    out.impl()->requires_grad = true;
    TapeNode node;
    node.inputs = {logits.impl()};
    node.output = out.impl();
    node.backward = [li = logits.impl(), oi = out.impl(), log_probs = std::move(log_probs),
                     targets, pad_id, gold_w, other_w, n, v, live] {
      if (!li->requires_grad) return;
      li->ensure_grad();
      const double g = oi->grad[0] / static_cast<double>(live);
      for (int r = 0; r < n; ++r) {
        if (targets[r] == pad_id) continue;
        const std::size_t base = static_cast<std::size_t>(r) * v;
        for (int c = 0; c < v; ++c) {
          const double p = c == targets[r] ? gold_w : other_w;
          li->grad[base + c] += g * (std::exp(log_probs[base + c]) - p);
        }
      }
    };
    active_tape()->record(std::move(node));
  }
  return out;
}

}  // namespace gft
