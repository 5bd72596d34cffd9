#pragma once

// Differentiable operations: convolution, transposed convolution,
// activations, channel concatenation and losses.
//
// Convolutions lower to im2col + GEMM (Eigen). Weight layouts follow the
// usual conventions: conv (Cout, Cin, k, k), transposed conv (Cin, Cout, k, k),
// bias (1, Cout, 1, 1).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/nn/tensor.hpp"

namespace autocomp::nn {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Sliding-window geometry of a convolution from an input grid to an output grid.
struct ConvGeometry {
  int channels = 0;
  int in_h = 0;
  int in_w = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int out_h = 0;
  int out_w = 0;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(channels) * kernel * kernel; }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(out_h) * out_w; }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

inline int conv_output_size(int in, int kernel, int stride, int pad) {
  const int span = in + 2 * pad - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

namespace detail {

template <class T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const Eigen::Index cols = g.cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* dst = col + ((static_cast<Eigen::Index>(c) * g.kernel + ky) * g.kernel + kx) * cols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* row = dst + static_cast<Eigen::Index>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* src = x + (static_cast<Eigen::Index>(c) * g.in_h + iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            row[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : T(0);
          }
        }
      }
}

// Scatter-add inverse of im2col.
template <class T>
void col2im(const T* col, const ConvGeometry& g, T* x) {
  const Eigen::Index cols = g.cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* srcrow = col + ((static_cast<Eigen::Index>(c) * g.kernel + ky) * g.kernel + kx) * cols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* src = srcrow + static_cast<Eigen::Index>(oy) * g.out_w;
          T* dst = x + (static_cast<Eigen::Index>(c) * g.in_h + iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
}

template <class T>
bool tracks(const Tape<T>* tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (tape == nullptr) return false;
  for (const auto* t : inputs)
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  return false;
}

}  // namespace detail

// Cross-correlation with zero padding. `bias` may be an undefined tensor.
template <class T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (stride < 1 || pad < 0) throw DataError("conv2d needs stride >= 1 and pad >= 0");
  if (ws.c != xs.c || ws.h != ws.w)
    throw DataError("conv2d weight " + ws.str() + " does not match input " + xs.str());
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(ws.n))
    throw DataError("conv2d bias length does not match output channels");
  const int out_h = conv_output_size(xs.h, ws.h, stride, pad);
  const int out_w = conv_output_size(xs.w, ws.w, stride, pad);
  if (out_h < 1 || out_w < 1) throw DataError("conv2d input " + xs.str() + " too small for kernel");

  const ConvGeometry g{xs.c, xs.h, xs.w, ws.h, stride, pad, out_h, out_w};
  const Eigen::Index K = g.rows();
  const Eigen::Index P = g.cols();
  const int cout = ws.n;
  Tensor<T> out(Shape{xs.n, cout, out_h, out_w});

  const bool track = detail::tracks(tape, {&x, &weight, &bias});
  const bool keep_cols = track && weight.requires_grad() && !g.is_pointwise();
  auto cols = std::make_shared<std::vector<T>>();
  if (!g.is_pointwise()) cols->resize(static_cast<std::size_t>(K * P) * (keep_cols ? xs.n : 1));

  ConstMatrixMap<T> wmat(weight.data().data(), cout, K);
  for (int n = 0; n < xs.n; ++n) {
    const T* xn = x.data().data() + static_cast<std::size_t>(n) * xs.c * xs.plane();
    const T* colp = xn;
    if (!g.is_pointwise()) {
      T* dst = cols->data() + (keep_cols ? static_cast<std::size_t>(n) * K * P : 0);
      detail::im2col(xn, g, dst);
      colp = dst;
    }
    MatrixMap<T> on(out.data().data() + static_cast<std::size_t>(n) * cout * P, cout, P);
    on.noalias() = wmat * ConstMatrixMap<T>(colp, K, P);
    if (bias.defined())
      for (int co = 0; co < cout; ++co) on.row(co).array() += bias.data()[static_cast<std::size_t>(co)];
  }

  if (track) {
    auto xn_ = x.node();
    auto wn_ = weight.node();
    auto bn_ = bias.defined() ? bias.node() : nullptr;
    auto on_ = out.node();
    out.node()->requires_grad = true;
    tape->record([xn_, wn_, bn_, on_, cols, g, K, P, cout, keep_cols]() {
      if (on_->grad.empty()) return;
      const int batch = on_->shape.n;
      ConstMatrixMap<T> wmat(wn_->value.data(), cout, K);
      std::vector<T> dcol;
      if (xn_->requires_grad && !g.is_pointwise()) dcol.resize(static_cast<std::size_t>(K * P));
      std::vector<T> scratch;
      for (int n = 0; n < batch; ++n) {
        ConstMatrixMap<T> dout(on_->grad.data() + static_cast<std::size_t>(n) * cout * P, cout, P);
        const T* xnp = xn_->value.data() + static_cast<std::size_t>(n) * g.channels * g.in_h * g.in_w;
        if (wn_->requires_grad) {
          const T* colp = xnp;
          if (!g.is_pointwise()) colp = cols->data() + static_cast<std::size_t>(n) * K * P;
          MatrixMap<T> dw(wn_->ensure_grad().data(), cout, K);
          dw.noalias() += dout * ConstMatrixMap<T>(colp, K, P).transpose();
        }
        if (bn_ && bn_->requires_grad) {
          auto& db = bn_->ensure_grad();
          // plain loop: Eigen's vectorized sum peels to the first aligned
          // address, which makes the rounding depend on where the buffer lives
          for (int co = 0; co < cout; ++co) {
            T s = 0;
            const T* row = on_->grad.data() + (static_cast<std::size_t>(n) * cout + co) * P;
            for (Eigen::Index i = 0; i < P; ++i) s += row[i];
            db[static_cast<std::size_t>(co)] += s;
          }
        }
        if (xn_->requires_grad) {
          T* dx = xn_->ensure_grad().data() + static_cast<std::size_t>(n) * g.channels * g.in_h * g.in_w;
          if (g.is_pointwise()) {
            MatrixMap<T>(dx, K, P).noalias() += wmat.transpose() * dout;
          } else {
            MatrixMap<T>(dcol.data(), K, P).noalias() = wmat.transpose() * dout;
            detail::col2im(dcol.data(), g, dx);
          }
        }
      }
    });
  }
  return out;
}

// Transposed convolution (gradient of conv2d w.r.t. its input).
// Output size: (in - 1) * stride - 2 * pad + kernel.
template <class T>
Tensor<T> conv_transpose2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (stride < 1 || pad < 0) throw DataError("conv_transpose2d needs stride >= 1 and pad >= 0");
  if (ws.n != xs.c || ws.h != ws.w)
    throw DataError("conv_transpose2d weight " + ws.str() + " does not match input " + xs.str());
  const int cout = ws.c;
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(cout))
    throw DataError("conv_transpose2d bias length does not match output channels");
  const int k = ws.h;
  const int out_h = (xs.h - 1) * stride - 2 * pad + k;
  const int out_w = (xs.w - 1) * stride - 2 * pad + k;
  if (out_h < 1 || out_w < 1) throw DataError("conv_transpose2d produces an empty output");

  // Geometry of the equivalent forward convolution (output grid -> input grid).
  const ConvGeometry g{cout, out_h, out_w, k, stride, pad, xs.h, xs.w};
  const Eigen::Index K = g.rows();
  const Eigen::Index P = g.cols();
  const int cin = xs.c;
  Tensor<T> out(Shape{xs.n, cout, out_h, out_w});
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;

  ConstMatrixMap<T> wmat(weight.data().data(), cin, K);
  std::vector<T> col(static_cast<std::size_t>(K * P));
  for (int n = 0; n < xs.n; ++n) {
    ConstMatrixMap<T> xn(x.data().data() + static_cast<std::size_t>(n) * cin * P, cin, P);
    MatrixMap<T>(col.data(), K, P).noalias() = wmat.transpose() * xn;
    T* on = out.data().data() + static_cast<std::size_t>(n) * cout * out_plane;
    detail::col2im(col.data(), g, on);
    if (bias.defined())
      for (int co = 0; co < cout; ++co) {
        const T b = bias.data()[static_cast<std::size_t>(co)];
        T* plane = on + static_cast<std::size_t>(co) * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) plane[i] += b;
      }
  }

  if (detail::tracks(tape, {&x, &weight, &bias})) {
    auto xn_ = x.node();
    auto wn_ = weight.node();
    auto bn_ = bias.defined() ? bias.node() : nullptr;
    auto on_ = out.node();
    out.node()->requires_grad = true;
    tape->record([xn_, wn_, bn_, on_, g, K, P, cin, cout, out_plane]() {
      if (on_->grad.empty()) return;
      const int batch = on_->shape.n;
      ConstMatrixMap<T> wmat(wn_->value.data(), cin, K);
      std::vector<T> dcol(static_cast<std::size_t>(K * P));
      for (int n = 0; n < batch; ++n) {
        const T* dout = on_->grad.data() + static_cast<std::size_t>(n) * cout * out_plane;
        detail::im2col(dout, g, dcol.data());
        ConstMatrixMap<T> dcm(dcol.data(), K, P);
        if (xn_->requires_grad) {
          MatrixMap<T> dx(xn_->ensure_grad().data() + static_cast<std::size_t>(n) * cin * P, cin, P);
          dx.noalias() += wmat * dcm;
        }
        if (wn_->requires_grad) {
          ConstMatrixMap<T> xm(xn_->value.data() + static_cast<std::size_t>(n) * cin * P, cin, P);
          MatrixMap<T> dw(wn_->ensure_grad().data(), cin, K);
          dw.noalias() += xm * dcm.transpose();
        }
        if (bn_ && bn_->requires_grad) {
          auto& db = bn_->ensure_grad();
          for (int co = 0; co < cout; ++co) {
            T s = 0;
            const T* plane = dout + static_cast<std::size_t>(co) * out_plane;
            for (std::size_t i = 0; i < out_plane; ++i) s += plane[i];
            db[static_cast<std::size_t>(co)] += s;
          }
        }
      }
    });
  }
  return out;
}

namespace detail {

// Elementwise unary op with derivative expressed through (input, output).
template <class T, class Fwd, class Deriv>
Tensor<T> unary(Tape<T>* tape, const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  Tensor<T> out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = fwd(in[i]);
  if (tracks(tape, {&x})) {
    auto xn_ = x.node();
    auto on_ = out.node();
    out.node()->requires_grad = true;
    tape->record([xn_, on_, deriv]() {
      if (on_->grad.empty()) return;
      auto& dx = xn_->ensure_grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += on_->grad[i] * deriv(xn_->value[i], on_->value[i]);
    });
  }
  return out;
}

}  // namespace detail

// When set, non-smooth ops append their branch choice per element (ReLU
// active, L1 sign). grad_check compares these patterns between x+h and x-h to
// spot central differences that straddle a kink.
struct KinkRecorder {
  std::vector<std::int8_t> pattern;
};

inline thread_local KinkRecorder* kink_recorder = nullptr;

template <class T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& x) {
  if (kink_recorder != nullptr)
    for (const T v : x.data()) kink_recorder->pattern.push_back(v > T(0) ? 1 : 0);
  return detail::unary(
      tape, x, [](T v) { return v > T(0) ? v : T(0); }, [](T in, T) { return in > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
  return detail::unary(
      tape, x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T out) { return out * (T(1) - out); });
}

template <class T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T factor) {
  return detail::unary(
      tape, x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <class T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) throw DataError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (detail::tracks(tape, {&a, &b})) {
    auto an_ = a.node();
    auto bn_ = b.node();
    auto on_ = out.node();
    out.node()->requires_grad = true;
    tape->record([an_, bn_, on_]() {
      if (on_->grad.empty()) return;
      for (auto* n : {an_.get(), bn_.get()}) {
        if (!n->requires_grad) continue;
        auto& g = n->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += on_->grad[i];
      }
    });
  }
  return out;
}

// Concatenation along the channel axis.
template <class T>
Tensor<T> concat_channels(Tape<T>* tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DataError("concat_channels needs at least one tensor");
  const Shape first = parts.front().shape();
  int channels = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w)
      throw DataError("concat_channels: spatial/batch mismatch " + s.str() + " vs " + first.str());
    channels += s.c;
  }
  const std::size_t plane = first.plane();
  Tensor<T> out(Shape{first.n, channels, first.h, first.w});
  for (int n = 0; n < first.n; ++n) {
    T* dst = out.data().data() + static_cast<std::size_t>(n) * channels * plane;
    for (const auto& p : parts) {
      const std::size_t len = static_cast<std::size_t>(p.shape().c) * plane;
      const T* src = p.data().data() + static_cast<std::size_t>(n) * len;
      dst = std::copy(src, src + len, dst);
    }
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (tape != nullptr && any) {
    std::vector<std::shared_ptr<Node<T>>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    auto on_ = out.node();
    out.node()->requires_grad = true;
    tape->record([nodes, on_, plane, channels]() {
      if (on_->grad.empty()) return;
      const int batch = on_->shape.n;
      for (int n = 0; n < batch; ++n) {
        const T* src = on_->grad.data() + static_cast<std::size_t>(n) * channels * plane;
        for (const auto& node : nodes) {
          const std::size_t len = static_cast<std::size_t>(node->shape.c) * plane;
          if (node->requires_grad) {
            T* dst = node->ensure_grad().data() + static_cast<std::size_t>(n) * len;
            for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
          }
          src += len;
        }
      }
    });
  }
  return out;
}

namespace detail {

template <class T>
void check_loss_shapes(const Tensor<T>& pred, const Tensor<T>& target, const char* name) {
  if (!(pred.shape() == target.shape()))
    throw DataError(std::string(name) + ": shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
  if (pred.numel() == 0) throw DataError(std::string(name) + ": empty input");
}

// Scalar loss from per-element value and d(value)/d(pred); the mean is taken.
// The target receives the negated derivative when it requires gradients,
// which holds for the symmetric-difference losses that use this helper.
template <class T, class Value, class Deriv>
Tensor<T> mean_loss(Tape<T>* tape, const Tensor<T>& pred, const Tensor<T>& target, Value value, Deriv deriv,
                    bool target_symmetric) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) acc += static_cast<double>(value(pred.data()[i], target.data()[i]));
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc / static_cast<double>(pred.numel())));
  if (tracks(tape, {&pred, &target})) {
    auto pn_ = pred.node();
    auto tn_ = target.node();
    auto on_ = out.node();
    out.node()->requires_grad = true;
    tape->record([pn_, tn_, on_, deriv, target_symmetric]() {
      if (on_->grad.empty()) return;
      const T g = on_->grad[0] / static_cast<T>(pn_->value.size());
      if (pn_->requires_grad) {
        auto& dp = pn_->ensure_grad();
        for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += g * deriv(pn_->value[i], tn_->value[i]);
      }
      if (tn_->requires_grad && target_symmetric) {
        auto& dt = tn_->ensure_grad();
        for (std::size_t i = 0; i < dt.size(); ++i) dt[i] -= g * deriv(pn_->value[i], tn_->value[i]);
      }
    });
  }
  return out;
}

}  // namespace detail

// mean |pred - target|; subgradient 0 at ties.
template <class T>
Tensor<T> l1_loss(Tape<T>* tape, const Tensor<T>& pred, const Tensor<T>& target) {
  detail::check_loss_shapes(pred, target, "l1_loss");
  if (kink_recorder != nullptr)
    for (std::size_t i = 0; i < pred.numel(); ++i) {
      const T d = pred.data()[i] - target.data()[i];
      kink_recorder->pattern.push_back(d > T(0) ? 1 : (d < T(0) ? -1 : 0));
    }
  return detail::mean_loss(
      tape, pred, target, [](T p, T t) { return std::abs(p - t); },
      [](T p, T t) { return p > t ? T(1) : (p < t ? T(-1) : T(0)); }, true);
}

// mean (pred - target)^2
template <class T>
Tensor<T> mse_loss(Tape<T>* tape, const Tensor<T>& pred, const Tensor<T>& target) {
  detail::check_loss_shapes(pred, target, "mse_loss");
  return detail::mean_loss(
      tape, pred, target, [](T p, T t) { return (p - t) * (p - t); }, [](T p, T t) { return T(2) * (p - t); }, true);
}

inline constexpr double kCrossEntropyEpsilon = 1e-7;

// Binary cross-entropy of probabilities against a target mask, mean over
// elements. Probabilities are clamped to [eps, 1 - eps]; clamped elements
// pass no gradient.
template <class T>
Tensor<T> cross_entropy(Tape<T>* tape, const Tensor<T>& pred_prob, const Tensor<T>& target) {
  detail::check_loss_shapes(pred_prob, target, "cross_entropy");
  const T eps = static_cast<T>(kCrossEntropyEpsilon);
  return detail::mean_loss(
      tape, pred_prob, target,
      [eps](T p, T t) {
        const T q = std::clamp(p, eps, T(1) - eps);
        return -(t * std::log(q) + (T(1) - t) * std::log(T(1) - q));
      },
      [eps](T p, T t) {
        if (p < eps || p > T(1) - eps) return T(0);
        return -t / p + (T(1) - t) / (T(1) - p);
      },
      false);
}

}  // namespace autocomp::nn
