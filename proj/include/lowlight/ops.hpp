#ifndef LOWLIGHT_OPS_HPP
#define LOWLIGHT_OPS_HPP

// Convolution, pooling, softmax and linear primitives with their backward
// passes. Convolutions are correlations (the kernel is not flipped), zero
// padded, channel-first.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lowlight/tensor.hpp"

namespace lowlight {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, ConvGeometry g,
                                   const std::string& what, const std::string& axis) {
  if (g.stride == 0) throw ParameterError(what + ": stride must be positive");
  const std::size_t padded = in + 2 * g.padding;
  if (padded < k) {
    throw DimensionError(what + ": kernel " + std::to_string(k) + " exceeds padded extent " +
                         std::to_string(padded) + " on axis '" + axis + "'");
  }
  return (padded - k) / g.stride + 1;
}

namespace detail {

// Output index range [lo, hi) whose source position o*stride + k - pad lies in [0, n).
struct TapRange {
  std::size_t lo = 0, hi = 0;
};

inline TapRange tap_range(std::size_t out_n, std::size_t n, std::size_t k, ConvGeometry g) {
  const long s = static_cast<long>(g.stride);
  const long shift = static_cast<long>(k) - static_cast<long>(g.padding);
  // smallest o with o*s + shift >= 0
  long lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
  // largest o with o*s + shift <= n - 1
  const long top = static_cast<long>(n) - 1 - shift;
  long hi = top < 0 ? 0 : top / s + 1;
  hi = std::min<long>(hi, static_cast<long>(out_n));
  if (lo > hi) lo = hi;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Adds scale * X[tap] into out for one kernel tap. Padding contributes nothing.
inline void accumulate_tap(const double* src, std::size_t h, std::size_t w, double* out,
                           std::size_t oh, std::size_t ow, std::size_t ky, std::size_t kx,
                           ConvGeometry g, double scale) {
  const TapRange ry = tap_range(oh, h, ky, g), rx = tap_range(ow, w, kx, g);
  for (std::size_t y = ry.lo; y < ry.hi; ++y) {
    const double* row = src + (y * g.stride + ky - g.padding) * w;
    double* orow = out + y * ow;
    if (g.stride == 1) {
      for (std::size_t x = rx.lo; x < rx.hi; ++x) orow[x] += scale * row[x + kx - g.padding];
    } else {
      for (std::size_t x = rx.lo; x < rx.hi; ++x) orow[x] += scale * row[x * g.stride + kx - g.padding];
    }
  }
}

// Transpose of accumulate_tap: scatters scale * dOut back into dSrc.
inline void scatter_tap(double* dsrc, std::size_t h, std::size_t w, const double* dout,
                        std::size_t oh, std::size_t ow, std::size_t ky, std::size_t kx,
                        ConvGeometry g, double scale) {
  const TapRange ry = tap_range(oh, h, ky, g), rx = tap_range(ow, w, kx, g);
  for (std::size_t y = ry.lo; y < ry.hi; ++y) {
    double* row = dsrc + (y * g.stride + ky - g.padding) * w;
    const double* orow = dout + y * ow;
    for (std::size_t x = rx.lo; x < rx.hi; ++x) row[x * g.stride + kx - g.padding] += scale * orow[x];
  }
}

// Sum over output positions of dOut * X[tap].
inline double correlate_tap(const double* src, std::size_t h, std::size_t w, const double* dout,
                            std::size_t oh, std::size_t ow, std::size_t ky, std::size_t kx,
                            ConvGeometry g) {
  const TapRange ry = tap_range(oh, h, ky, g), rx = tap_range(ow, w, kx, g);
  double acc = 0.0;
  for (std::size_t y = ry.lo; y < ry.hi; ++y) {
    const double* row = src + (y * g.stride + ky - g.padding) * w;
    const double* orow = dout + y * ow;
    for (std::size_t x = rx.lo; x < rx.hi; ++x) acc += orow[x] * row[x * g.stride + kx - g.padding];
  }
  return acc;
}

}  // namespace detail

/// Multi-channel 2-D correlation: Y[o][y][x] = sum_{i,h,t} W[o][i][h][t] * Xpad[i][y*s+h][x*s+t].
inline Tensor conv2d(const Tensor& input, const ConvWeights& weights, ConvGeometry g = {}) {
  require_rank(input, 3, "conv2d input");
  require_axis(weights.in_channels(), input.dim(0), "conv2d", "in_channels");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t kh = weights.kh(), kw = weights.kw();
  const std::size_t oh = conv_out_extent(h, kh, g, "conv2d", "height");
  const std::size_t ow = conv_out_extent(w, kw, g, "conv2d", "width");
  Tensor out(Shape{weights.out_channels(), oh, ow});
  for (std::size_t o = 0; o < weights.out_channels(); ++o) {
    double* dst = out.data() + o * oh * ow;
    for (std::size_t i = 0; i < c_in; ++i) {
      const double* src = input.data() + i * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx)
          detail::accumulate_tap(src, h, w, dst, oh, ow, ky, kx, g, weights(o, i, ky, kx));
    }
  }
  return out;
}

struct Conv2dGrads {
  Tensor d_input;
  ConvWeights d_weights;
};

inline Conv2dGrads conv2d_backward(const Tensor& input, const ConvWeights& weights,
                                   const Tensor& d_out, ConvGeometry g = {}) {
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t kh = weights.kh(), kw = weights.kw();
  const std::size_t oh = conv_out_extent(h, kh, g, "conv2d_backward", "height");
  const std::size_t ow = conv_out_extent(w, kw, g, "conv2d_backward", "width");
  d_out.require_same_shape(Tensor(Shape{weights.out_channels(), oh, ow}), "conv2d_backward d_out");
  Conv2dGrads grads{Tensor(input.dims()),
                    ConvWeights(weights.out_channels(), c_in, kh, kw)};
  for (std::size_t o = 0; o < weights.out_channels(); ++o) {
    const double* dy = d_out.data() + o * oh * ow;
    for (std::size_t i = 0; i < c_in; ++i) {
      const double* src = input.data() + i * h * w;
      double* dsrc = grads.d_input.data() + i * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx) {
          detail::scatter_tap(dsrc, h, w, dy, oh, ow, ky, kx, g, weights(o, i, ky, kx));
          grads.d_weights(o, i, ky, kx) = detail::correlate_tap(src, h, w, dy, oh, ow, ky, kx, g);
        }
    }
  }
  return grads;
}

/// Per-channel correlation; kernels is C x kh x kw. No cross-channel mixing.
inline Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernels, ConvGeometry g = {}) {
  require_rank(input, 3, "depthwise_conv2d input");
  require_rank(kernels, 3, "depthwise_conv2d kernels");
  require_axis(kernels.dim(0), input.dim(0), "depthwise_conv2d", "channels");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t kh = kernels.dim(1), kw = kernels.dim(2);
  const std::size_t oh = conv_out_extent(h, kh, g, "depthwise_conv2d", "height");
  const std::size_t ow = conv_out_extent(w, kw, g, "depthwise_conv2d", "width");
  Tensor out(Shape{c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = input.data() + ch * h * w;
    double* dst = out.data() + ch * oh * ow;
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx)
        detail::accumulate_tap(src, h, w, dst, oh, ow, ky, kx, g, kernels(ch, ky, kx));
  }
  return out;
}

struct DepthwiseGrads {
  Tensor d_input;
  Tensor d_kernels;
};

inline DepthwiseGrads depthwise_conv2d_backward(const Tensor& input, const Tensor& kernels,
                                                const Tensor& d_out, ConvGeometry g = {}) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t kh = kernels.dim(1), kw = kernels.dim(2);
  const std::size_t oh = conv_out_extent(h, kh, g, "depthwise_conv2d_backward", "height");
  const std::size_t ow = conv_out_extent(w, kw, g, "depthwise_conv2d_backward", "width");
  d_out.require_same_shape(Tensor(Shape{c, oh, ow}), "depthwise_conv2d_backward d_out");
  DepthwiseGrads grads{Tensor(input.dims()), Tensor(kernels.dims())};
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = input.data() + ch * h * w;
    double* dsrc = grads.d_input.data() + ch * h * w;
    const double* dy = d_out.data() + ch * oh * ow;
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx) {
        detail::scatter_tap(dsrc, h, w, dy, oh, ow, ky, kx, g, kernels(ch, ky, kx));
        grads.d_kernels(ch, ky, kx) = detail::correlate_tap(src, h, w, dy, oh, ow, ky, kx, g);
      }
  }
  return grads;
}

/// Mean over the spatial extent of each channel.
inline Tensor global_avg_pool(const Tensor& input) {
  if (input.rank() != 3) {
    throw DimensionError("global_avg_pool: expected C x H x W, got " + shape_string(input.dims()));
  }
  const std::size_t c = input.dim(0), hw = input.dim(1) * input.dim(2);
  Tensor out(Shape{c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    const double* src = input.data() + ch * hw;
    for (std::size_t k = 0; k < hw; ++k) acc += src[k];
    out[ch] = acc / static_cast<double>(hw);
  }
  return out;
}

inline Tensor global_avg_pool_backward(const Shape& input_dims, const Tensor& d_out) {
  Tensor d_in(input_dims);
  const std::size_t hw = input_dims[1] * input_dims[2];
  for (std::size_t ch = 0; ch < input_dims[0]; ++ch) {
    const double g = d_out[ch] / static_cast<double>(hw);
    std::fill_n(d_in.data() + ch * hw, hw, g);
  }
  return d_in;
}

namespace detail {
struct AxisLayout {
  std::size_t outer = 1, extent = 1, inner = 1;
};
inline AxisLayout axis_layout(const Shape& dims, std::size_t axis) {
  if (axis >= dims.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_string(dims));
  }
  AxisLayout l;
  for (std::size_t a = 0; a < axis; ++a) l.outer *= dims[a];
  l.extent = dims[axis];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) l.inner *= dims[a];
  return l;
}
}  // namespace detail

/// Softmax along `axis`, evaluated with max subtraction.
inline Tensor softmax(const Tensor& v, std::size_t axis = 0) {
  const auto l = detail::axis_layout(v.dims(), axis);
  Tensor out(v.dims());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.extent; ++k) m = std::max(m, v[base + k * l.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < l.extent; ++k) {
        const double e = std::exp(v[base + k * l.inner] - m);
        out[base + k * l.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < l.extent; ++k) out[base + k * l.inner] /= z;
    }
  return out;
}

/// Vector-Jacobian product of softmax given its output: dz = p * (dp - <p, dp>).
inline Tensor softmax_backward(const Tensor& probs, const Tensor& d_probs, std::size_t axis = 0) {
  probs.require_same_shape(d_probs, "softmax_backward");
  const auto l = detail::axis_layout(probs.dims(), axis);
  Tensor out(probs.dims());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double dot = 0.0;
      for (std::size_t k = 0; k < l.extent; ++k)
        dot += probs[base + k * l.inner] * d_probs[base + k * l.inner];
      for (std::size_t k = 0; k < l.extent; ++k) {
        const std::size_t idx = base + k * l.inner;
        out[idx] = probs[idx] * (d_probs[idx] - dot);
      }
    }
  return out;
}

/// out = W * in + b, with W of shape M x N.
inline Tensor fully_connected(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require_rank(input, 1, "fully_connected input");
  require_rank(weights, 2, "fully_connected weights");
  require_rank(bias, 1, "fully_connected bias");
  require_axis(weights.dim(1), input.dim(0), "fully_connected", "in_features");
  require_axis(bias.dim(0), weights.dim(0), "fully_connected", "out_features");
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  Tensor out(Shape{m});
  for (std::size_t r = 0; r < m; ++r) {
    double acc = bias[r];
    for (std::size_t c = 0; c < n; ++c) acc += weights(r, c) * input[c];
    out[r] = acc;
  }
  return out;
}

struct LinearGrads {
  Tensor d_input;
  Tensor d_weights;
  Tensor d_bias;
};

inline LinearGrads fully_connected_backward(const Tensor& input, const Tensor& weights,
                                            const Tensor& d_out) {
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  require_axis(d_out.dim(0), m, "fully_connected_backward", "out_features");
  LinearGrads g{Tensor(Shape{n}), Tensor(Shape{m, n}), d_out};
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      g.d_input[c] += weights(r, c) * d_out[r];
      g.d_weights(r, c) = d_out[r] * input[c];
    }
  return g;
}

inline Tensor relu(Tensor t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
  return t;
}

inline Tensor relu_backward(const Tensor& input, Tensor d_out) {
  input.require_same_shape(d_out, "relu_backward");
  for (std::size_t i = 0; i < input.size(); ++i)
    if (input[i] <= 0.0) d_out[i] = 0.0;
  return d_out;
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Mean cross-entropy of softmax(logits) against `label`, and its logit gradient.
struct CrossEntropy {
  double loss = 0.0;
  Tensor d_logits;
};

inline CrossEntropy cross_entropy(const Tensor& logits, std::size_t label) {
  require_rank(logits, 1, "cross_entropy logits");
  if (label >= logits.dim(0)) {
    throw DataError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                    std::to_string(logits.dim(0)) + " classes");
  }
  Tensor p = softmax(logits);
  CrossEntropy ce;
  ce.loss = -std::log(std::max(p[label], std::numeric_limits<double>::min()));
  p[label] -= 1.0;
  ce.d_logits = std::move(p);
  return ce;
}

/// Central-difference gradient of a scalar function.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& fn, const Tensor& at,
                               double eps = 1e-5) {
  if (!(eps > 0.0)) throw ParameterError("finite_diff_grad: eps must be positive");
  Tensor x = at;
  Tensor grad(at.dims());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = fn(x);
    x[i] = orig - eps;
    const double fm = fn(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b, "relative_error");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

/// p <- p - lr * g for every (param, grad) pair.
inline void sgd_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                     double lr) {
  if (!(lr >= 0.0)) throw ParameterError("sgd_step: learning rate must be non-negative");
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_step: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " grads");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k]->require_same_shape(*grads[k], "sgd_step");
    auto p = params[k]->values();
    auto g = grads[k]->values();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  }
}

}  // namespace lowlight

#endif  // LOWLIGHT_OPS_HPP
