#ifndef LOWLIGHT_SCB_HPP
#define LOWLIGHT_SCB_HPP

// Smooth-oriented convolutional block.
//
// Training path:  Y = conv3x3(X, w3) + sconv(conv1x1(X, w1), softmax(logits))
// Inference path: Y = conv3x3(X, w3 + w1 (x) softmax(logits))
//
// Both 3x3 stages use stride 1 and zero padding 1, so the two paths agree
// exactly in exact arithmetic. No bias terms.

#include <cmath>
#include <cstddef>
#include <string>

#include "lowlight/ops.hpp"
#include "lowlight/random.hpp"
#include "lowlight/tensor.hpp"

namespace lowlight {

enum class SmoothInit { mean, gaussian };

inline constexpr ConvGeometry kSame3x3{1, 1};

struct ScbParams {
  ConvWeights w3;      // C2 x C1 x 3 x 3
  ConvWeights w1;      // C2 x C1 x 1 x 1
  Tensor sconv_logits;  // C2 x 3 x 3
  SmoothInit init_kind = SmoothInit::mean;

  std::size_t in_channels() const { return w3.in_channels(); }
  std::size_t out_channels() const { return w3.out_channels(); }

  /// He-initialized convolutions and smooth logits set from `init`.
  static ScbParams init(std::size_t c_in, std::size_t c_out, Rng& rng,
                        SmoothInit init = SmoothInit::mean);
};

/// Logits whose softmax is the normalized 3x3 Gaussian with sigma 1.
inline Tensor gaussian_init_logits() {
  Tensor l(Shape{3, 3});
  double z = 0.0;
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) z += std::exp(-((p - 1) * (p - 1) + (q - 1) * (q - 1)) / 2.0);
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q)
      l(p, q) = -((p - 1) * (p - 1) + (q - 1) * (q - 1)) / 2.0 - std::log(z);
  return l;
}

inline ScbParams ScbParams::init(std::size_t c_in, std::size_t c_out, Rng& rng, SmoothInit init) {
  ScbParams p;
  p.init_kind = init;
  p.w3 = ConvWeights(c_out, c_in, 3, 3);
  p.w1 = ConvWeights(c_out, c_in, 1, 1);
  const double s3 = std::sqrt(2.0 / (9.0 * c_in)), s1 = std::sqrt(2.0 / c_in);
  for (double& v : p.w3.tensor().values()) v = rng.normal(0.0, s3);
  for (double& v : p.w1.tensor().values()) v = rng.normal(0.0, s1);
  p.sconv_logits = Tensor(Shape{c_out, 3, 3});
  if (init == SmoothInit::gaussian) {
    const Tensor g = gaussian_init_logits();
    for (std::size_t o = 0; o < c_out; ++o)
      for (std::size_t k = 0; k < 9; ++k) p.sconv_logits[o * 9 + k] = g[k];
  }
  return p;
}

inline void validate(const ScbParams& p) {
  require_axis(p.w3.kh(), 3, "SCB w3", "kh");
  require_axis(p.w3.kw(), 3, "SCB w3", "kw");
  require_axis(p.w1.kh(), 1, "SCB w1", "kh");
  require_axis(p.w1.kw(), 1, "SCB w1", "kw");
  require_axis(p.w1.out_channels(), p.w3.out_channels(), "SCB w1", "out_channels");
  require_axis(p.w1.in_channels(), p.w3.in_channels(), "SCB w1", "in_channels");
  require_rank(p.sconv_logits, 3, "SCB sconv_logits");
  require_axis(p.sconv_logits.dim(0), p.w3.out_channels(), "SCB sconv_logits", "channels");
  require_axis(p.sconv_logits.dim(1), 3, "SCB sconv_logits", "kh");
  require_axis(p.sconv_logits.dim(2), 3, "SCB sconv_logits", "kw");
}

/// Per-channel softmax over the 9 taps: positive kernels that sum to 1.
inline Tensor sconv_kernel(const Tensor& logits) {
  require_rank(logits, 3, "sconv_kernel");
  return softmax(logits.reshaped({logits.dim(0), logits.dim(1) * logits.dim(2)}), 1)
      .reshaped(logits.dims());
}

struct FoldedConv {
  ConvWeights w_folded;
};

/// w'[i][j][h][t] = w3[i][j][h][t] + w1[i][j] * softmax(logits)[i][h][t].
inline FoldedConv fold(const ScbParams& params) {
  validate(params);
  const Tensor k = sconv_kernel(params.sconv_logits);
  FoldedConv f{params.w3};
  for (std::size_t i = 0; i < params.out_channels(); ++i)
    for (std::size_t j = 0; j < params.in_channels(); ++j)
      for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t t = 0; t < 3; ++t) f.w_folded(i, j, h, t) += params.w1(i, j, 0, 0) * k(i, h, t);
  return f;
}

struct ScbCache {
  ScbParams params;
  Tensor input;
  Tensor branch;  // conv1x1 output, C2 x H x W
  Tensor kernel;  // softmax(logits)
  bool valid = false;
};

struct ScbForward {
  Tensor y;
  ScbCache cache;
};

inline ScbForward scb_forward_train(const Tensor& x, const ScbParams& params) {
  validate(params);
  require_rank(x, 3, "scb_forward_train input");
  require_axis(x.dim(0), params.in_channels(), "scb_forward_train", "channels");
  ScbForward out;
  out.cache.params = params;
  out.cache.input = x;
  out.cache.kernel = sconv_kernel(params.sconv_logits);
  out.cache.branch = conv2d(x, params.w1);
  out.y = conv2d(x, params.w3, kSame3x3);
  out.y += depthwise_conv2d(out.cache.branch, out.cache.kernel, kSame3x3);
  out.cache.valid = true;
  return out;
}

inline Tensor scb_forward_infer(const Tensor& x, const FoldedConv& folded) {
  require_axis(folded.w_folded.kh(), 3, "scb_forward_infer", "kh");
  require_axis(folded.w_folded.kw(), 3, "scb_forward_infer", "kw");
  return conv2d(x, folded.w_folded, kSame3x3);
}

struct ScbGrads {
  Tensor d_input;
  ConvWeights d_w3;
  ConvWeights d_w1;
  Tensor d_logits;
};

/// Gradients of scb_forward_train. The cache is consumed.
inline ScbGrads scb_backward(ScbCache& cache, const Tensor& d_y) {
  if (!cache.valid) throw UsageError("scb_backward: cache is empty or already consumed");
  const ScbParams& p = cache.params;
  auto main = conv2d_backward(cache.input, p.w3, d_y, kSame3x3);
  auto smooth = depthwise_conv2d_backward(cache.branch, cache.kernel, d_y, kSame3x3);
  auto point = conv2d_backward(cache.input, p.w1, smooth.d_input);
  const std::size_t c2 = p.out_channels();
  const Tensor d_logits =
      softmax_backward(cache.kernel.reshaped({c2, 9}), smooth.d_kernels.reshaped({c2, 9}), 1);
  cache.valid = false;
  return {main.d_input + point.d_input, std::move(main.d_weights), std::move(point.d_weights),
          d_logits.reshaped({c2, 3, 3})};
}

}  // namespace lowlight

#endif  // LOWLIGHT_SCB_HPP
