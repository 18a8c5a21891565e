#ifndef LOWLIGHT_ISP_HPP
#define LOWLIGHT_ISP_HPP

// Invertible camera ISP: white balance -> color correction -> gamma -> tone
// curve (process) and its inverse (unprocess), RGGB mosaic/demosaic and
// bit-depth quantization. Images are 3 x H x W tensors in [0, 1].

#include <array>
#include <cfenv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "lowlight/tensor.hpp"

namespace lowlight {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline constexpr Mat3 kIdentity3 = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

enum class ToneCurve { none, smoothstep };

inline std::string to_string(ToneCurve t) { return t == ToneCurve::none ? "none" : "smoothstep"; }

inline ToneCurve tone_curve_from_string(const std::string& s) {
  if (s == "none") return ToneCurve::none;
  if (s == "smoothstep") return ToneCurve::smoothstep;
  throw ParameterError("unknown tone curve '" + s + "'");
}

struct IspParams {
  std::array<double, 3> wb_gains{2.0, 1.0, 1.6};
  Mat3 ccm = kIdentity3;
  double gamma = 1.0 / 2.2;
  ToneCurve tone_curve = ToneCurve::none;

  /// Unit gains, identity CCM, gamma 1 and no tone curve.
  static IspParams identity() { return {{1.0, 1.0, 1.0}, kIdentity3, 1.0, ToneCurve::none}; }
};

struct SrgbImage {
  Tensor pixels;  // 3 x H x W
  int source_bit_depth = 8;
};

struct RawRgbImage {
  Tensor pixels;  // 3 x H x W, linear
  int bit_depth = 14;
  double clip_fraction = 0.0;  // share of values clipped by the producing stage
};

/// RGGB Bayer plane.
struct BayerImage {
  Tensor plane;  // H x W, both even
};

inline double determinant(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline Mat3 inverse(const Mat3& m) {
  const double det = determinant(m);
  double scale = 0.0;
  for (const auto& row : m)
    for (double v : row) scale = std::max(scale, std::abs(v));
  if (!std::isfinite(det) || std::abs(det) <= 1e-12 * scale * scale * scale) {
    throw ParameterError("ccm is singular (det = " + std::to_string(det) + ")");
  }
  Mat3 inv;
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

inline void validate(const IspParams& p) {
  for (int c = 0; c < 3; ++c) {
    if (!(p.wb_gains[c] > 0.0) || !std::isfinite(p.wb_gains[c])) {
      throw ParameterError("wb_gains[" + std::to_string(c) + "] must be positive and finite");
    }
  }
  if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) throw ParameterError("gamma must be positive");
  for (int r = 0; r < 3; ++r) {
    const double s = p.ccm[r][0] + p.ccm[r][1] + p.ccm[r][2];
    if (!std::isfinite(s) || std::abs(s - 1.0) > 1e-6) {
      throw ParameterError("ccm row " + std::to_string(r) + " sums to " + std::to_string(s) +
                           ", expected 1");
    }
  }
  (void)inverse(p.ccm);
}

inline void require_image3(const Tensor& t, const std::string& what) {
  require_rank(t, 3, what);
  require_axis(t.dim(0), 3, what, "channels");
}

/// Elementwise x^gamma on [0, 1].
inline Tensor gamma_correct(const Tensor& img, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("gamma must be positive");
  Tensor out(img.dims());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("gamma_correct: value " + std::to_string(v) + " outside [0,1] at index " +
                        std::to_string(i));
    }
    out[i] = std::pow(v, gamma);
  }
  return out;
}

inline double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

/// Inverse of smoothstep on [0, 1] by bisection to 1e-12.
inline double smoothstep_inverse(double y) {
  if (y <= 0.0) return 0.0;
  if (y >= 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (smoothstep(mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

struct ClipCounter {
  std::size_t clipped = 0;
  std::size_t total = 0;
  double operator()(double v) {
    ++total;
    if (v < 0.0) {
      ++clipped;
      return 0.0;
    }
    if (v > 1.0) {
      ++clipped;
      return 1.0;
    }
    return v;
  }
  double fraction() const { return total ? static_cast<double>(clipped) / total : 0.0; }
};

inline std::array<double, 3> apply(const Mat3& m, const std::array<double, 3>& v) {
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return r;
}

}  // namespace detail

/// sRGB -> linear RAW-RGB: inverse tone curve, inverse gamma, CCM^-1, divide by WB gains.
inline RawRgbImage unprocess(const SrgbImage& img, const IspParams& isp, int bit_depth = 14) {
  validate(isp);
  require_image3(img.pixels, "unprocess");
  const Mat3 inv_ccm = inverse(isp.ccm);
  const std::size_t hw = img.pixels.dim(1) * img.pixels.dim(2);
  RawRgbImage out{Tensor(img.pixels.dims()), bit_depth, 0.0};
  detail::ClipCounter clip;
  for (std::size_t k = 0; k < hw; ++k) {
    std::array<double, 3> v{};
    for (int c = 0; c < 3; ++c) {
      double x = img.pixels[c * hw + k];
      if (!(x >= 0.0 && x <= 1.0)) {
        throw DomainError("unprocess: sRGB value outside [0,1]");
      }
      if (isp.tone_curve == ToneCurve::smoothstep) x = smoothstep_inverse(x);
      v[c] = std::pow(x, 1.0 / isp.gamma);
    }
    v = detail::apply(inv_ccm, v);
    for (int c = 0; c < 3; ++c) out.pixels[c * hw + k] = clip(v[c] / isp.wb_gains[c]);
  }
  out.clip_fraction = clip.fraction();
  return out;
}

/// Linear RAW-RGB -> sRGB: WB gains, CCM, gamma, tone curve; clipped to [0, 1] at each stage.
inline SrgbImage process(const RawRgbImage& raw, const IspParams& isp) {
  validate(isp);
  require_image3(raw.pixels, "process");
  const std::size_t hw = raw.pixels.dim(1) * raw.pixels.dim(2);
  SrgbImage out{Tensor(raw.pixels.dims()), 8};
  detail::ClipCounter clip;
  for (std::size_t k = 0; k < hw; ++k) {
    std::array<double, 3> v{};
    for (int c = 0; c < 3; ++c) v[c] = clip(raw.pixels[c * hw + k] * isp.wb_gains[c]);
    v = detail::apply(isp.ccm, v);
    for (int c = 0; c < 3; ++c) {
      double x = std::pow(clip(v[c]), isp.gamma);
      if (isp.tone_curve == ToneCurve::smoothstep) x = smoothstep(x);
      out.pixels[c * hw + k] = clip(x);
    }
  }
  return out;
}

/// RGGB sampling of a 3-channel image.
inline BayerImage mosaic(const RawRgbImage& raw) {
  require_image3(raw.pixels, "mosaic");
  const std::size_t h = raw.pixels.dim(1), w = raw.pixels.dim(2);
  if (h % 2) throw DimensionError("mosaic: axis 'height' is odd (" + std::to_string(h) + ")");
  if (w % 2) throw DimensionError("mosaic: axis 'width' is odd (" + std::to_string(w) + ")");
  BayerImage b{Tensor(Shape{h, w})};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t c = (y % 2 == 0 && x % 2 == 0) ? 0 : (y % 2 == 1 && x % 2 == 1) ? 2 : 1;
      b.plane(y, x) = raw.pixels(c, y, x);
    }
  return b;
}

/// Half-resolution RAW-RGB: R = top-left, B = bottom-right, G = mean of the two greens.
inline RawRgbImage demosaic_avg(const BayerImage& bayer, int bit_depth = 14) {
  require_rank(bayer.plane, 2, "demosaic_avg");
  const std::size_t h = bayer.plane.dim(0), w = bayer.plane.dim(1);
  if (h % 2) throw DimensionError("demosaic_avg: axis 'height' is odd (" + std::to_string(h) + ")");
  if (w % 2) throw DimensionError("demosaic_avg: axis 'width' is odd (" + std::to_string(w) + ")");
  RawRgbImage out{Tensor(Shape{3, h / 2, w / 2}), bit_depth, 0.0};
  for (std::size_t y = 0; y < h / 2; ++y)
    for (std::size_t x = 0; x < w / 2; ++x) {
      out.pixels(0, y, x) = bayer.plane(2 * y, 2 * x);
      out.pixels(1, y, x) = 0.5 * (bayer.plane(2 * y, 2 * x + 1) + bayer.plane(2 * y + 1, 2 * x));
      out.pixels(2, y, x) = bayer.plane(2 * y + 1, 2 * x + 1);
    }
  return out;
}

/// round(v * (2^bits - 1)) / (2^bits - 1) with ties to even. Accepts 1..31 bits.
inline double quantize_value(double v, int bits) {
  if (bits < 1 || bits > 31) throw ParameterError("quantize: bits must be in [1, 31]");
  const double levels = std::ldexp(1.0, bits) - 1.0;
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double q = std::nearbyint(v * levels) / levels;
  std::fesetround(saved);
  return q;
}

inline bool is_supported_bit_depth(int bits) {
  return bits == 8 || bits == 10 || bits == 12 || bits == 14;
}

/// Quantizes to a RAW bit depth in {8, 10, 12, 14}.
inline RawRgbImage quantize(const RawRgbImage& raw, int bits) {
  if (!is_supported_bit_depth(bits)) {
    throw ParameterError("quantize: unsupported bit depth " + std::to_string(bits) +
                         " (expected 8, 10, 12 or 14)");
  }
  RawRgbImage out{Tensor(raw.pixels.dims()), bits, raw.clip_fraction};
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) out.pixels[i] = quantize_value(raw.pixels[i], bits);
  return out;
}

/// Peak signal-to-noise ratio for signals in [0, 1]; +inf when identical.
inline double psnr(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace lowlight

#endif  // LOWLIGHT_ISP_HPP
