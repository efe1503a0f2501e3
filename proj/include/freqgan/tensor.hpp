#pragma once

#include <Eigen/Core>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "freqgan/errors.hpp"

namespace freqgan {

using Array = Eigen::ArrayXd;
using Shape = std::vector<int>;

long shape_size(const Shape& s);
std::string shape_str(const Shape& s);
bool shape_eq(const Shape& a, const Shape& b);

namespace detail {

struct TensorData {
  Shape shape;
  Array value;
  Array grad;  // empty until touched by backward (empty == all zero)
  bool requires_grad = false;
  bool tracked = false;  // produced by a recorded op on some tape

  bool wants_grad() const { return requires_grad || tracked; }
  Array& grad_ref() {
    if (grad.size() != value.size()) grad = Array::Zero(value.size());
    return grad;
  }
};

}  // namespace detail

/// Dense row-major fp64 tensor. Value-semantic handle: copies share storage.
/// Outside any active GradientTape all operations are plain evaluations.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Array values);

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, double value);
  static Tensor scalar(double value) { return full({1}, value); }
  static Tensor from(const Shape& shape, std::vector<double> values);

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  int dim(int i) const { return d_->shape.at(i); }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  long size() const { return d_->value.size(); }

  /// Scalar tensors only.
  double value() const;
  double at(long flat_index) const { return d_->value(flat_index); }

  Array& array() { return d_->value; }
  const Array& array() const { return d_->value; }

  Tensor& set_requires_grad(bool v = true);
  bool requires_grad() const { return d_->requires_grad; }

  /// Gradient of the last backward pass; zeros when unreached.
  Array grad() const;
  void zero_grad();

  detail::TensorData* data() const { return d_.get(); }
  std::shared_ptr<detail::TensorData> handle() const { return d_; }

 private:
  std::shared_ptr<detail::TensorData> d_;
};

/// Ordered record of primitive operations. Alive tapes form a thread-local
/// stack; the innermost one records. Tapes and the tensors touched by their
/// nodes are confined to one thread.
class GradientTape {
 public:
  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  /// Replays the tape in reverse from a scalar root, accumulating into the
  /// grad of every reachable tensor. Call once per tape.
  void backward(const Tensor& root);

  std::size_t node_count() const { return nodes_.size(); }

  static GradientTape* active();

 private:
  friend void detail_record_node(std::function<void()> fn);
  std::vector<std::function<void()>> nodes_;
  bool used_ = false;
};

/// RAII guard that disables recording on the active tape.
class TapePause {
 public:
  TapePause();
  ~TapePause();
  TapePause(const TapePause&) = delete;
  TapePause& operator=(const TapePause&) = delete;
};

namespace detail {

/// True when an active tape exists and any input participates in the graph.
bool recording(std::initializer_list<const Tensor*> inputs);
/// Marks an op output as tracked and appends its backward closure.
void record(const Tensor& out, std::function<void()> backward);
/// Accumulation helper for backward closures.
void accumulate(TensorData* t, const Array& g);

}  // namespace detail

// ---- primitive operations -------------------------------------------------
// Broadcasting is deliberately narrow: same shape, scalar (size-1) operands,
// [B,N]+[N] and [B,C,H,W]+[C] bias addition, and [...,H,W]*[H,W] mask
// multiplication.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor smul(const Tensor& a, double c);
Tensor neg(const Tensor& a);

/// [m,k] x [k,n] -> [m,n]. Rows are computed independently, so a row of the
/// result is bit-identical regardless of the number of other rows.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x [B,Cin,H,W], w [Cout,Cin,kh,kw], zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding);
/// x [B,Cin,H,W], w [Cin,Cout,kh,kw]; output size (H-1)*stride - 2*pad + kh.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int stride,
                        int padding);

Tensor reshape(const Tensor& x, const Shape& shape);
/// Concatenation of the flattened inputs into a 1-D tensor.
Tensor concat(const Tensor& a, const Tensor& b);
/// Row i of a [B,...] tensor as a [...] tensor.
Tensor slice0(const Tensor& x, int i);
/// Single element as a scalar tensor.
Tensor take(const Tensor& x, long flat_index);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean over the leading axis: [B,...] -> [...].
Tensor mean0(const Tensor& x);

Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
/// Pass-through gradient inside [lo, hi], zero outside.
Tensor clamp(const Tensor& x, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return smul(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return smul(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

/// Stacks equal-shape tensors into [N, shape...]. Data assembly only; not
/// recorded on the tape.
Tensor stack0(const std::vector<Tensor>& parts);

}  // namespace freqgan
