#pragma once

// Minimal reverse-mode automatic differentiation over channel-major image
// tensors. A Tape records operations in execution order; backward() walks it
// in reverse. Values are Eigen row-major matrices with one row per channel
// and one column per pixel.

#include <Eigen/Core>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "thermodepth/common.hpp"

namespace thermodepth::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  int c = 1;
  int h = 1;
  int w = 1;

  int plane() const { return h * w; }
  long size() const { return static_cast<long>(c) * h * w; }
  bool operator==(const Shape&) const = default;
};

/// theta / phi / psi of the training algorithm, plus untrained matrices.
enum class ParamGroup { kRefine, kDepth, kRecurrent, kFixed };

std::string_view group_name(ParamGroup g);

template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> dims;  // logical shape, e.g. {cout, cin, k, k}
  Matrix<T> value;        // dims[0] rows, product(dims[1..]) cols
  ParamGroup group = ParamGroup::kDepth;
  bool trainable = true;

  long numel() const { return static_cast<long>(value.size()); }
};

template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, std::vector<int> dims, ParamGroup group, bool trainable = true);

  Parameter<T>& at(std::string_view name);
  const Parameter<T>& at(std::string_view name) const;
  const Parameter<T>* find(std::string_view name) const;
  int index_of(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  long count(ParamGroup group) const;
  long trainable_count() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) {
      auto& q = out.add(p.name, p.dims, p.group, p.trainable);
      q.value = p.value.template cast<U>();
    }
    return out;
  }

  bool operator==(const ParameterSet& o) const;

 private:
  std::vector<Parameter<T>> params_;
  std::map<std::string, int, std::less<>> index_;
};

/// Gradient buffers aligned index-for-index with a ParameterSet.
template <typename T>
struct Gradients {
  std::vector<Matrix<T>> grads;
  std::vector<bool> defined;

  static Gradients zeros_like(const ParameterSet<T>& params);
  void add(const Gradients& o);
  void scale(T s);
  double squared_norm() const;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix<T>& out_grad)>;

  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Matrix<T> value, Shape shape);
  /// Differentiable leaf (e.g. an input image whose gradient is inspected).
  Var leaf(Matrix<T> value, Shape shape);
  /// References a parameter without copying. Fixed parameters never receive
  /// gradient.
  Var param(const ParameterSet<T>& set, std::string_view name);

  Var push(Matrix<T> value, Shape shape, std::initializer_list<Var> inputs, Backward fn);
  Var push(Matrix<T> value, Shape shape, const std::vector<Var>& inputs, Backward fn);

  const Matrix<T>& value(Var v) const;
  const Shape& shape(Var v) const { return nodes_[v.id].shape; }
  bool requires_grad(Var v) const { return v.valid() && nodes_[v.id].requires_grad; }

  bool has_grad(Var v) const { return nodes_[v.id].grad.size() > 0; }
  const Matrix<T>& grad(Var v) const { return nodes_[v.id].grad; }
  /// Adds g into the gradient slot of v (no-op when v needs no gradient).
  void accumulate(Var v, const Matrix<T>& g);
  template <typename Expr>
  void accumulate_expr(Var v, const Expr& g) {
    if (!requires_grad(v)) return;
    auto& n = nodes_[v.id];
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  Matrix<T>& grad_slot(Var v);

  void backward();

  /// Parameter gradients gathered after backward(). Trainable parameters
  /// referenced on this tape are marked defined even when their gradient is
  /// numerically zero.
  void collect(const ParameterSet<T>& set, Gradients<T>& into) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    Matrix<T> value;
    const Matrix<T>* external = nullptr;
    Matrix<T> grad;
    bool requires_grad = false;
    int param_index = -1;
    Backward backward;
  };

  bool record_;
  std::vector<Node> nodes_;
};

// ---- operations -------------------------------------------------------------

/// 2-D convolution, square kernel inferred from weight (cout x cin*k*k),
/// zero padding k/2. bias may be an invalid Var.
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, int stride = 1);

/// Per-channel 3x3 convolution, weight (c x 9), zero padding 1.
template <typename T>
Var depthwise_conv2d(Tape<T>& tape, Var x, Var weight, Var bias, int stride = 1);

template <typename T> Var silu(Tape<T>& tape, Var x);
template <typename T> Var sigmoid(Tape<T>& tape, Var x);
template <typename T> Var tanh(Tape<T>& tape, Var x);
template <typename T> Var add(Tape<T>& tape, Var a, Var b);
template <typename T> Var sub(Tape<T>& tape, Var a, Var b);
template <typename T> Var mul(Tape<T>& tape, Var a, Var b);
/// a * x + b with constant a, b.
template <typename T> Var affine(Tape<T>& tape, Var x, T a, T b);
/// s * x where s is a 1x1 tensor.
template <typename T> Var scale_by(Tape<T>& tape, Var s, Var x);
template <typename T> Var concat_channels(Tape<T>& tape, const std::vector<Var>& parts);
/// Nearest-neighbour 2x upsampling.
template <typename T> Var upsample2x(Tape<T>& tape, Var x);
/// c x (h*w) -> c x 1.
template <typename T> Var global_avg_pool(Tape<T>& tape, Var x);
/// w (out x in) * v (in x 1) [+ b].
template <typename T> Var dense(Tape<T>& tape, Var w, Var v, Var b);
/// grid (c x hw) + v (c x 1) broadcast over pixels.
template <typename T> Var broadcast_add(Tape<T>& tape, Var grid, Var v);
/// v (c x 1) broadcast to a c x h x w grid.
template <typename T> Var broadcast(Tape<T>& tape, Var v, Shape shape);
/// Zeroes a tensor's value while keeping its shape; no gradient flows.
template <typename T> Var zeros_like(Tape<T>& tape, Var x);

}  // namespace thermodepth::nn
