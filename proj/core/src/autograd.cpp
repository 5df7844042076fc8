#include "thermodepth/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace thermodepth::nn {

std::string_view group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kRefine: return "theta";
    case ParamGroup::kDepth: return "phi";
    case ParamGroup::kRecurrent: return "psi";
    case ParamGroup::kFixed: return "fixed";
  }
  return "?";
}

// ---- ParameterSet -----------------------------------------------------------

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, std::vector<int> dims, ParamGroup group, bool trainable) {
  if (index_.count(name)) throw Error(Errc::kInvalidArgument, "duplicate parameter " + name);
  if (dims.empty()) throw Error(Errc::kInvalidArgument, "parameter " + name + " has no dims");
  long cols = 1;
  for (std::size_t i = 1; i < dims.size(); ++i) cols *= dims[i];
  Parameter<T> p;
  p.name = name;
  p.dims = std::move(dims);
  p.value = Matrix<T>::Zero(p.dims[0], cols);
  p.group = group;
  p.trainable = trainable && group != ParamGroup::kFixed;
  index_.emplace(name, static_cast<int>(params_.size()));
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename T>
Parameter<T>& ParameterSet<T>::at(std::string_view name) {
  return params_[index_of(name)];
}

template <typename T>
const Parameter<T>& ParameterSet<T>::at(std::string_view name) const {
  return params_[index_of(name)];
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

template <typename T>
int ParameterSet<T>::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(Errc::kMissingTensor, "no parameter named " + std::string(name));
  return it->second;
}

template <typename T>
long ParameterSet<T>::count(ParamGroup group) const {
  long n = 0;
  for (const auto& p : params_) {
    if (p.group == group) n += p.numel();
  }
  return n;
}

template <typename T>
long ParameterSet<T>::trainable_count() const {
  long n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.numel();
  }
  return n;
}

template <typename T>
bool ParameterSet<T>::operator==(const ParameterSet& o) const {
  if (params_.size() != o.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = o.params_[i];
    if (a.name != b.name || a.dims != b.dims || a.group != b.group || a.trainable != b.trainable) return false;
    if (a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) return false;
    if (a.value.size() &&
        std::memcmp(a.value.data(), b.value.data(), sizeof(T) * static_cast<std::size_t>(a.value.size())) != 0) {
      return false;
    }
  }
  return true;
}

// ---- Gradients --------------------------------------------------------------

template <typename T>
Gradients<T> Gradients<T>::zeros_like(const ParameterSet<T>& params) {
  Gradients g;
  g.grads.reserve(params.size());
  for (const auto& p : params) g.grads.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
  g.defined.assign(params.size(), false);
  return g;
}

template <typename T>
void Gradients<T>::add(const Gradients& o) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    grads[i] += o.grads[i];
    defined[i] = defined[i] || o.defined[i];
  }
}

template <typename T>
void Gradients<T>::scale(T s) {
  for (auto& g : grads) g *= s;
}

template <typename T>
double Gradients<T>::squared_norm() const {
  double s = 0.0;
  for (const auto& g : grads) s += static_cast<double>(g.squaredNorm());
  return s;
}

// ---- Tape -------------------------------------------------------------------

template <typename T>
Var Tape<T>::constant(Matrix<T> value, Shape shape) {
  Node n;
  n.shape = shape;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::leaf(Matrix<T> value, Shape shape) {
  Var v = constant(std::move(value), shape);
  nodes_[v.id].requires_grad = record_;
  return v;
}

template <typename T>
Var Tape<T>::param(const ParameterSet<T>& set, std::string_view name) {
  const int idx = set.index_of(name);
  const auto& p = set[idx];
  Node n;
  n.shape = Shape{static_cast<int>(p.value.rows()), 1, static_cast<int>(p.value.cols())};
  n.external = &p.value;
  n.requires_grad = record_ && p.trainable;
  n.param_index = idx;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::push(Matrix<T> value, Shape shape, const std::vector<Var>& inputs, Backward fn) {
  Node n;
  n.shape = shape;
  n.value = std::move(value);
  if (record_) {
    for (Var in : inputs) {
      if (requires_grad(in)) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::push(Matrix<T> value, Shape shape, std::initializer_list<Var> inputs, Backward fn) {
  return push(std::move(value), shape, std::vector<Var>(inputs), std::move(fn));
}

template <typename T>
const Matrix<T>& Tape<T>::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.value;
}

template <typename T>
void Tape<T>::accumulate(Var v, const Matrix<T>& g) {
  accumulate_expr(v, g);
}

template <typename T>
Matrix<T>& Tape<T>::grad_slot(Var v) {
  auto& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad = Matrix<T>::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

template <typename T>
void Tape<T>::backward() {
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
    // Intermediate gradients are no longer needed once propagated.
    if (n.param_index < 0) {
      n.grad = Matrix<T>();
      n.backward = nullptr;
    }
  }
}

template <typename T>
void Tape<T>::collect(const ParameterSet<T>& set, Gradients<T>& into) const {
  for (const Node& n : nodes_) {
    if (n.param_index < 0 || !n.requires_grad) continue;
    into.defined[n.param_index] = true;
    if (n.grad.size() > 0) into.grads[n.param_index] += n.grad;
  }
  (void)set;
}

// ---- helpers ----------------------------------------------------------------

namespace {

// Output positions o in [lo, hi) whose input index o * stride + k - pad lies
// inside [0, n).
inline void valid_range(int n, int k, int pad, int stride, int out, int& lo, int& hi) {
  const int first = pad - k;  // o * stride >= first
  lo = first > 0 ? (first + stride - 1) / stride : 0;
  const int last = n - 1 + pad - k;  // o * stride <= last
  hi = last < 0 ? 0 : std::min(out, last / stride + 1);
  if (hi < lo) hi = lo;
}

template <typename T>
void im2col(const Matrix<T>& x, const Shape& s, int k, int stride, int ho, int wo, Matrix<T>& col) {
  const int pad = k / 2;
  col.resize(static_cast<long>(s.c) * k * k, static_cast<long>(ho) * wo);
  for (int c = 0; c < s.c; ++c) {
    const T* src = x.data() + static_cast<long>(c) * s.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col.data() + ((static_cast<long>(c) * k + ky) * k + kx) * col.cols();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          T* row = dst + static_cast<long>(oy) * wo;
          if (iy < 0 || iy >= s.h) {
            std::fill(row, row + wo, T(0));
            continue;
          }
          const T* line = src + static_cast<long>(iy) * s.w + kx - pad;
          int lo, hi;
          valid_range(s.w, kx, pad, stride, wo, lo, hi);
          std::fill(row, row + lo, T(0));
          if (stride == 1) {
            std::copy(line + lo, line + hi, row + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) row[ox] = line[ox * stride];
          }
          std::fill(row + hi, row + wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im(const Matrix<T>& col, const Shape& s, int k, int stride, int ho, int wo, Matrix<T>& dx) {
  const int pad = k / 2;
  for (int c = 0; c < s.c; ++c) {
    T* dst = dx.data() + static_cast<long>(c) * s.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col.data() + ((static_cast<long>(c) * k + ky) * k + kx) * col.cols();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= s.h) continue;
          const T* row = src + static_cast<long>(oy) * wo;
          T* line = dst + static_cast<long>(iy) * s.w + kx - pad;
          int lo, hi;
          valid_range(s.w, kx, pad, stride, wo, lo, hi);
          for (int ox = lo; ox < hi; ++ox) line[ox * stride] += row[ox];
        }
      }
    }
  }
}

inline int out_size(int n, int stride) { return (n + stride - 1) / stride; }

}  // namespace

// ---- operations -------------------------------------------------------------

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, int stride) {
  const Shape s = tape.shape(x);
  const Matrix<T>& w = tape.value(weight);
  const long kk = w.cols() / s.c;
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(kk))));
  if (static_cast<long>(k) * k * s.c != w.cols()) {
    throw Error(Errc::kSizeMismatch, "conv2d: weight columns " + std::to_string(w.cols()) +
                                         " incompatible with " + std::to_string(s.c) + " input channels");
  }
  const int ho = out_size(s.h, stride);
  const int wo = out_size(s.w, stride);
  const Shape os{static_cast<int>(w.rows()), ho, wo};

  const bool pointwise = (k == 1 && stride == 1);
  Matrix<T> col;
  if (!pointwise) im2col(tape.value(x), s, k, stride, ho, wo, col);
  const Matrix<T>& cref = pointwise ? tape.value(x) : col;

  Matrix<T> out(os.c, os.plane());
  out.noalias() = w * cref;
  if (bias.valid()) out.colwise() += tape.value(bias).col(0);

  return tape.push(std::move(out), os, {x, weight, bias},
                   [x, weight, bias, s, k, stride, ho, wo, pointwise, col = std::move(col)](Tape<T>& t, const Matrix<T>& g) {
                     const Matrix<T>& cr = pointwise ? t.value(x) : col;
                     if (t.requires_grad(weight)) t.accumulate_expr(weight, g * cr.transpose());
                     if (bias.valid() && t.requires_grad(bias)) t.accumulate_expr(bias, g.rowwise().sum());
                     if (t.requires_grad(x)) {
                       if (pointwise) {
                         t.accumulate_expr(x, t.value(weight).transpose() * g);
                       } else {
                         Matrix<T> dcol = t.value(weight).transpose() * g;
                         Matrix<T>& dx = t.grad_slot(x);
                         col2im(dcol, s, k, stride, ho, wo, dx);
                       }
                     }
                   });
}

template <typename T>
Var depthwise_conv2d(Tape<T>& tape, Var x, Var weight, Var bias, int stride) {
  const Shape s = tape.shape(x);
  const Matrix<T>& w = tape.value(weight);
  if (w.rows() != s.c || w.cols() != 9) {
    throw Error(Errc::kSizeMismatch, "depthwise_conv2d: weight must be channels x 9");
  }
  const int ho = out_size(s.h, stride);
  const int wo = out_size(s.w, stride);
  const Shape os{s.c, ho, wo};
  const Matrix<T>& xv = tape.value(x);
  Matrix<T> out = Matrix<T>::Zero(s.c, os.plane());
  for (int c = 0; c < s.c; ++c) {
    const T* src = xv.data() + static_cast<long>(c) * s.plane();
    T* dst = out.data() + static_cast<long>(c) * os.plane();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T wk = w(c, ky * 3 + kx);
        int lo, hi;
        valid_range(s.w, kx, 1, stride, wo, lo, hi);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= s.h) continue;
          const T* line = src + iy * s.w + kx - 1;
          T* o = dst + oy * wo;
          for (int ox = lo; ox < hi; ++ox) o[ox] += wk * line[ox * stride];
        }
      }
    }
  }
  if (bias.valid()) out.colwise() += tape.value(bias).col(0);

  return tape.push(std::move(out), os, {x, weight, bias}, [x, weight, bias, s, stride, ho, wo](Tape<T>& t, const Matrix<T>& g) {
    const Matrix<T>& xv = t.value(x);
    const Matrix<T>& w = t.value(weight);
    const bool need_w = t.requires_grad(weight);
    const bool need_x = t.requires_grad(x);
    Matrix<T> dw = Matrix<T>::Zero(s.c, 9);
    Matrix<T>* dx = need_x ? &t.grad_slot(x) : nullptr;
    for (int c = 0; c < s.c; ++c) {
      const T* src = xv.data() + static_cast<long>(c) * s.plane();
      const T* gc = g.data() + static_cast<long>(c) * ho * wo;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T wk = w(c, ky * 3 + kx);
          int lo, hi;
          valid_range(s.w, kx, 1, stride, wo, lo, hi);
          T acc = 0;
          T* dxc = dx ? dx->data() + static_cast<long>(c) * s.plane() : nullptr;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= s.h) continue;
            const T* line = src + iy * s.w + kx - 1;
            const T* go = gc + oy * wo;
            for (int ox = lo; ox < hi; ++ox) acc += go[ox] * line[ox * stride];
            if (dxc) {
              T* dline = dxc + iy * s.w + kx - 1;
              for (int ox = lo; ox < hi; ++ox) dline[ox * stride] += wk * go[ox];
            }
          }
          dw(c, ky * 3 + kx) = acc;
        }
      }
    }
    if (need_w) t.accumulate_expr(weight, dw);
    if (bias.valid() && t.requires_grad(bias)) t.accumulate_expr(bias, g.rowwise().sum());
  });
}

template <typename T>
Var silu(Tape<T>& tape, Var x) {
  const Matrix<T>& v = tape.value(x);
  Matrix<T> sig = (T(1) + (-v.array()).exp()).inverse().matrix();
  Matrix<T> out = (v.array() * sig.array()).matrix();
  return tape.push(std::move(out), tape.shape(x), {x}, [x, sig = std::move(sig)](Tape<T>& t, const Matrix<T>& g) {
    const auto& v = t.value(x).array();
    t.accumulate_expr(x, (g.array() * sig.array() * (T(1) + v * (T(1) - sig.array()))).matrix());
  });
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  Matrix<T> out = (T(1) + (-tape.value(x).array()).exp()).inverse().matrix();
  const Var self{static_cast<int>(tape.size())};
  return tape.push(std::move(out), tape.shape(x), {x}, [x, self](Tape<T>& t, const Matrix<T>& g) {
    const auto& s = t.value(self).array();
    t.accumulate_expr(x, (g.array() * s * (T(1) - s)).matrix());
  });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
  Matrix<T> out = tape.value(x).array().tanh().matrix();
  const Var self{static_cast<int>(tape.size())};
  return tape.push(std::move(out), tape.shape(x), {x}, [x, self](Tape<T>& t, const Matrix<T>& g) {
    const auto& s = t.value(self).array();
    t.accumulate_expr(x, (g.array() * (T(1) - s * s)).matrix());
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  if (tape.shape(a) != tape.shape(b)) throw Error(Errc::kSizeMismatch, "add: shape mismatch");
  Matrix<T> out = tape.value(a) + tape.value(b);
  return tape.push(std::move(out), tape.shape(a), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    t.accumulate_expr(a, g);
    t.accumulate_expr(b, g);
  });
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  if (tape.shape(a) != tape.shape(b)) throw Error(Errc::kSizeMismatch, "sub: shape mismatch");
  Matrix<T> out = tape.value(a) - tape.value(b);
  return tape.push(std::move(out), tape.shape(a), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    t.accumulate_expr(a, g);
    if (t.requires_grad(b)) t.accumulate_expr(b, (-g).eval());
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  if (tape.shape(a) != tape.shape(b)) throw Error(Errc::kSizeMismatch, "mul: shape mismatch");
  Matrix<T> out = (tape.value(a).array() * tape.value(b).array()).matrix();
  return tape.push(std::move(out), tape.shape(a), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.requires_grad(a)) t.accumulate_expr(a, (g.array() * t.value(b).array()).matrix());
    if (t.requires_grad(b)) t.accumulate_expr(b, (g.array() * t.value(a).array()).matrix());
  });
}

template <typename T>
Var affine(Tape<T>& tape, Var x, T a, T b) {
  Matrix<T> out = (tape.value(x).array() * a + b).matrix();
  return tape.push(std::move(out), tape.shape(x), {x}, [x, a](Tape<T>& t, const Matrix<T>& g) {
    t.accumulate_expr(x, (g * a).eval());
  });
}

template <typename T>
Var scale_by(Tape<T>& tape, Var s, Var x) {
  const T sv = tape.value(s)(0, 0);
  Matrix<T> out = tape.value(x) * sv;
  return tape.push(std::move(out), tape.shape(x), {s, x}, [s, x](Tape<T>& t, const Matrix<T>& g) {
    if (t.requires_grad(s)) {
      Matrix<T> gs(1, 1);
      gs(0, 0) = (g.array() * t.value(x).array()).sum();
      t.accumulate_expr(s, gs);
    }
    if (t.requires_grad(x)) t.accumulate_expr(x, (g * t.value(s)(0, 0)).eval());
  });
}

template <typename T>
Var concat_channels(Tape<T>& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(Errc::kInvalidArgument, "concat_channels: no inputs");
  const Shape s0 = tape.shape(parts.front());
  int c = 0;
  for (Var p : parts) {
    const Shape s = tape.shape(p);
    if (s.h != s0.h || s.w != s0.w) throw Error(Errc::kSizeMismatch, "concat_channels: spatial mismatch");
    c += s.c;
  }
  Matrix<T> out(c, s0.plane());
  int row = 0;
  std::vector<int> offsets;
  for (Var p : parts) {
    offsets.push_back(row);
    const int pc = tape.shape(p).c;
    out.middleRows(row, pc) = tape.value(p);
    row += pc;
  }
  return tape.push(std::move(out), Shape{c, s0.h, s0.w}, parts, [parts, offsets](Tape<T>& t, const Matrix<T>& g) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (t.requires_grad(parts[i])) t.accumulate_expr(parts[i], g.middleRows(offsets[i], t.shape(parts[i]).c).eval());
    }
  });
}

template <typename T>
Var upsample2x(Tape<T>& tape, Var x) {
  const Shape s = tape.shape(x);
  const Shape os{s.c, s.h * 2, s.w * 2};
  const Matrix<T>& v = tape.value(x);
  Matrix<T> out(s.c, os.plane());
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) out(c, y * os.w + xx) = v(c, (y / 2) * s.w + xx / 2);
    }
  }
  return tape.push(std::move(out), os, {x}, [x, s, os](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T>& dx = t.grad_slot(x);
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx) dx(c, (y / 2) * s.w + xx / 2) += g(c, y * os.w + xx);
      }
    }
  });
}

template <typename T>
Var global_avg_pool(Tape<T>& tape, Var x) {
  const Shape s = tape.shape(x);
  Matrix<T> out = tape.value(x).rowwise().mean();
  return tape.push(std::move(out), Shape{s.c, 1, 1}, {x}, [x, s](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T> dx = g.col(0).replicate(1, s.plane()) / static_cast<T>(s.plane());
    t.accumulate_expr(x, dx);
  });
}

template <typename T>
Var dense(Tape<T>& tape, Var w, Var v, Var b) {
  const Matrix<T>& wv = tape.value(w);
  const Matrix<T>& vv = tape.value(v);
  if (wv.cols() != vv.size()) {
    throw Error(Errc::kSizeMismatch, "dense: weight expects " + std::to_string(wv.cols()) + " inputs, got " +
                                         std::to_string(vv.size()));
  }
  Matrix<T> vin = Eigen::Map<const Matrix<T>>(vv.data(), vv.size(), 1);
  Matrix<T> out = wv * vin;
  if (b.valid()) out += tape.value(b);
  return tape.push(std::move(out), Shape{static_cast<int>(wv.rows()), 1, 1}, {w, v, b},
                   [w, v, b](Tape<T>& t, const Matrix<T>& g) {
                     const Matrix<T>& vv = t.value(v);
                     Matrix<T> vin = Eigen::Map<const Matrix<T>>(vv.data(), vv.size(), 1);
                     if (t.requires_grad(w)) t.accumulate_expr(w, (g * vin.transpose()).eval());
                     if (b.valid() && t.requires_grad(b)) t.accumulate_expr(b, g);
                     if (t.requires_grad(v)) {
                       Matrix<T> dv = t.value(w).transpose() * g;
                       t.accumulate_expr(v, Eigen::Map<const Matrix<T>>(dv.data(), vv.rows(), vv.cols()).eval());
                     }
                   });
}

template <typename T>
Var broadcast_add(Tape<T>& tape, Var grid, Var v) {
  const Shape s = tape.shape(grid);
  const Matrix<T>& vv = tape.value(v);
  if (vv.size() != s.c) throw Error(Errc::kSizeMismatch, "broadcast_add: vector length != channels");
  Matrix<T> out = tape.value(grid);
  out.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(vv.data(), vv.size());
  return tape.push(std::move(out), s, {grid, v}, [grid, v](Tape<T>& t, const Matrix<T>& g) {
    t.accumulate_expr(grid, g);
    if (t.requires_grad(v)) {
      Matrix<T> dv = g.rowwise().sum();
      const auto& vv = t.value(v);
      t.accumulate_expr(v, Eigen::Map<const Matrix<T>>(dv.data(), vv.rows(), vv.cols()).eval());
    }
  });
}

template <typename T>
Var broadcast(Tape<T>& tape, Var v, Shape shape) {
  const Matrix<T>& vv = tape.value(v);
  if (vv.size() != shape.c) throw Error(Errc::kSizeMismatch, "broadcast: vector length != channels");
  Matrix<T> out(shape.c, shape.plane());
  out.colwise() = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(vv.data(), vv.size());
  return tape.push(std::move(out), shape, {v}, [v](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T> dv = g.rowwise().sum();
    const auto& vv = t.value(v);
    t.accumulate_expr(v, Eigen::Map<const Matrix<T>>(dv.data(), vv.rows(), vv.cols()).eval());
  });
}

template <typename T>
Var zeros_like(Tape<T>& tape, Var x) {
  const auto& v = tape.value(x);
  return tape.constant(Matrix<T>::Zero(v.rows(), v.cols()), tape.shape(x));
}

#define THERMODEPTH_INSTANTIATE(T)                                              \
  template class ParameterSet<T>;                                               \
  template struct Gradients<T>;                                                 \
  template class Tape<T>;                                                       \
  template Var conv2d<T>(Tape<T>&, Var, Var, Var, int);                         \
  template Var depthwise_conv2d<T>(Tape<T>&, Var, Var, Var, int);               \
  template Var silu<T>(Tape<T>&, Var);                                          \
  template Var sigmoid<T>(Tape<T>&, Var);                                       \
  template Var tanh<T>(Tape<T>&, Var);                                          \
  template Var add<T>(Tape<T>&, Var, Var);                                      \
  template Var sub<T>(Tape<T>&, Var, Var);                                      \
  template Var mul<T>(Tape<T>&, Var, Var);                                      \
  template Var affine<T>(Tape<T>&, Var, T, T);                                  \
  template Var scale_by<T>(Tape<T>&, Var, Var);                                 \
  template Var concat_channels<T>(Tape<T>&, const std::vector<Var>&);           \
  template Var upsample2x<T>(Tape<T>&, Var);                                    \
  template Var global_avg_pool<T>(Tape<T>&, Var);                               \
  template Var dense<T>(Tape<T>&, Var, Var, Var);                               \
  template Var broadcast_add<T>(Tape<T>&, Var, Var);                            \
  template Var broadcast<T>(Tape<T>&, Var, Shape);                              \
  template Var zeros_like<T>(Tape<T>&, Var);

THERMODEPTH_INSTANTIATE(float)
THERMODEPTH_INSTANTIATE(double)

}  // namespace thermodepth::nn
