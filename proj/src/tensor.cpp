#include "gft/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace gft {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(shape_numel(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& x : t.mutable_data()) x = value;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) throw ValueError("tensor has no gradient");
  return impl_->grad;
}

std::vector<double>& Tensor::mutable_grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

double Tensor::at(std::initializer_list<int> idx) const {
  const Shape& s = impl_->shape;
  if (idx.size() != s.size()) throw ShapeError("index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (int i : idx) {
    if (i < 0 || i >= s[axis]) throw ShapeError("index out of range");
    flat = flat * static_cast<std::size_t>(s[axis]) + static_cast<std::size_t>(i);
    ++axis;
  }
  return impl_->data[flat];
}

double Tensor::value() const {
  if (numel() != 1) {
    throw ShapeError("value() requires a one-element tensor, got " + shape_str(shape()));
  }
  return impl_->data[0];
}

BoolMat BoolMat::causal(int n) {
  BoolMat m(n, n, false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m.set(i, j, true);
  return m;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw ValueError("backward: loss tensor is undefined");
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  if (nodes_.empty()) throw ValueError("backward: tape is empty");
  if (consumed_) throw ValueError("backward: tape already consumed");
  consumed_ = true;

  loss.impl()->ensure_grad();
  loss.impl()->grad[0] += 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    // Nodes whose output was never used carry no gradient; skip them.
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

Tape* active_tape() { return g_active_tape; }

}  // namespace gft
