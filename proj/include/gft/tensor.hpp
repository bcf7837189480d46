#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gft {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

/// Dense row-major float64 tensor. Data is immutable while ops run over it;
/// only the optimizer (between steps) and checkpoint loading write through
/// mutable_data().
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until backward touches this tensor

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }
  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  const std::vector<double>& data() const { return impl_->data; }
  /// Direct write access for the optimizer, initializers and tests.
  std::vector<double>& mutable_data() { return impl_->data; }

  bool has_grad() const { return !impl_->grad.empty(); }
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad();
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(numel(), 0.0);
  }

  /// Element access for tests and glue code (row-major index list).
  double at(std::initializer_list<int> idx) const;
  /// Value of a one-element tensor.
  double value() const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Boolean matrix used for attention masks. true = entry participates.
struct BoolMat {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> v;

  BoolMat() = default;
  BoolMat(int r, int c, bool fill = false)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill ? 1 : 0) {}

  bool at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * cols + c] != 0;
  }
  void set(int r, int c, bool b) {
    v[static_cast<std::size_t>(r) * cols + c] = b ? 1 : 0;
  }

  static BoolMat causal(int n);  // lower-triangular true
};

/// One recorded operation: inputs, output and the rule that moves the
/// output's gradient onto the inputs.
struct TapeNode {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  std::function<void()> backward;
};

/// Ordered record of the forward computation. Single-threaded; one tape per
/// training step. Ops append nodes only while a tape is active (TapeScope),
/// so forward-only evaluation never pays for recording.
class Tape {
 public:
  void record(TapeNode node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  /// Seeds d(loss)/d(loss)=1 and runs every backward rule in reverse
  /// recording order. Gradients accumulate additively over fan-out.
  void backward(const Tensor& loss);

 private:
  std::vector<TapeNode> nodes_;
  bool consumed_ = false;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

Tape* active_tape();

}  // namespace gft
