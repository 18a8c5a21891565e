#ifndef LOWLIGHT_AWD_HPP
#define LOWLIGHT_AWD_HPP

// Low-pass downsampling of C x H x W feature maps.
//
// All downsamplers share one window geometry: output (i, j) reads the k x k
// window whose rows are i*s - o .. i*s - o + k - 1 with o = (k - 1) / 2
// (integer division), and likewise for columns. Out-of-range rows/columns are
// reflected (no edge repeat), so H' = ceil(H / s) for any k. The window tap at
// (o, o) is the anchor sample X[c][i*s][j*s] used by strided downsampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lowlight/ops.hpp"
#include "lowlight/random.hpp"
#include "lowlight/tensor.hpp"

namespace lowlight {

/// Mirror index into [0, n) without repeating the edge sample.
inline std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * static_cast<long>(n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<long>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

struct Window {
  std::size_t k = 3;
  std::size_t stride = 2;

  std::size_t offset() const { return (k - 1) / 2; }
  std::size_t taps() const { return k * k; }
  std::size_t out_extent(std::size_t n) const { return (n + stride - 1) / stride; }

  /// Source row (or column) of window position p for output index i.
  std::size_t source(std::size_t i, std::size_t p, std::size_t n) const {
    return reflect_index(static_cast<long>(i * stride + p) - static_cast<long>(offset()), n);
  }

  void check(std::size_t h, std::size_t w, const std::string& what) const {
    if (k == 0) throw ParameterError(what + ": kernel size must be positive");
    if (stride == 0) throw ParameterError(what + ": stride must be positive");
    if (k > h) {
      throw DimensionError(what + ": kernel " + std::to_string(k) + " exceeds axis 'height' (" +
                           std::to_string(h) + ")");
    }
    if (k > w) {
      throw DimensionError(what + ": kernel " + std::to_string(k) + " exceeds axis 'width' (" +
                           std::to_string(w) + ")");
    }
  }
};

namespace detail {

// Flat source offsets (within one channel plane) of the window at (i, j).
inline void window_offsets(const Window& win, std::size_t i, std::size_t j, std::size_t h,
                           std::size_t w, std::vector<std::size_t>& offs) {
  offs.resize(win.taps());
  for (std::size_t p = 0; p < win.k; ++p) {
    const std::size_t row = win.source(i, p, h) * w;
    for (std::size_t q = 0; q < win.k; ++q) offs[p * win.k + q] = row + win.source(j, q, w);
  }
}

// Window offsets for every output location, (i * W' + j) * k^2 + tap.
inline std::vector<std::size_t> window_table(const Window& win, std::size_t h, std::size_t w) {
  const std::size_t oh = win.out_extent(h), ow = win.out_extent(w), taps = win.taps();
  std::vector<std::size_t> table(oh * ow * taps), offs;
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      window_offsets(win, i, j, h, w, offs);
      std::copy(offs.begin(), offs.end(), table.begin() + (i * ow + j) * taps);
    }
  return table;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fixed filters

enum class FilterTag { strided, mean, gaussian, bilateral };

inline std::string to_string(FilterTag t) {
  switch (t) {
    case FilterTag::strided: return "strided";
    case FilterTag::mean: return "mean";
    case FilterTag::gaussian: return "gaussian";
    case FilterTag::bilateral: return "bilateral";
  }
  return "?";
}

struct FixedFilterKind {
  FilterTag tag = FilterTag::mean;
  std::size_t kernel_size = 3;
  std::size_t stride = 2;
  double sigma = 1.0;    // spatial sigma (gaussian, bilateral)
  double sigma_r = 0.1;  // bilateral range sigma, relative to the window's value range

  static FixedFilterKind strided(std::size_t stride = 2) { return {FilterTag::strided, 1, stride}; }
  static FixedFilterKind mean(std::size_t k, std::size_t stride = 2) {
    return {FilterTag::mean, k, stride};
  }
  static FixedFilterKind gaussian(std::size_t k, double sigma, std::size_t stride = 2) {
    return {FilterTag::gaussian, k, stride, sigma};
  }
  static FixedFilterKind bilateral(std::size_t k, double sigma_s, double sigma_r,
                                   std::size_t stride = 2) {
    return {FilterTag::bilateral, k, stride, sigma_s, sigma_r};
  }
};

inline void validate(const FixedFilterKind& kind) {
  if (kind.tag != FilterTag::strided && kind.kernel_size < 2) {
    throw ParameterError(to_string(kind.tag) + " filter needs kernel_size >= 2");
  }
  if ((kind.tag == FilterTag::gaussian || kind.tag == FilterTag::bilateral) &&
      !(kind.sigma > 0.0 && std::isfinite(kind.sigma))) {
    throw ParameterError(to_string(kind.tag) + " filter needs sigma > 0");
  }
  if (kind.tag == FilterTag::bilateral && !(kind.sigma_r > 0.0 && std::isfinite(kind.sigma_r))) {
    throw ParameterError("bilateral filter needs sigma_r > 0");
  }
  if (kind.stride == 0) throw ParameterError("stride must be positive");
}

/// Normalized k x k spatial Gaussian centred on the window's geometric centre.
inline std::vector<double> gaussian_taps(std::size_t k, double sigma) {
  std::vector<double> g(k * k);
  const double c = 0.5 * static_cast<double>(k - 1);
  double z = 0.0;
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t q = 0; q < k; ++q) {
      const double dy = static_cast<double>(p) - c, dx = static_cast<double>(q) - c;
      g[p * k + q] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      z += g[p * k + q];
    }
  for (double& v : g) v /= z;
  return g;
}

inline Tensor downsample_fixed(const Tensor& x, const FixedFilterKind& kind) {
  validate(kind);
  require_rank(x, 3, "downsample_fixed");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Window win{kind.tag == FilterTag::strided ? 1 : kind.kernel_size, kind.stride};
  win.check(h, w, "downsample_fixed");
  const std::size_t oh = win.out_extent(h), ow = win.out_extent(w), taps = win.taps();
  const std::size_t anchor = win.offset() * win.k + win.offset();

  std::vector<double> spatial;
  if (kind.tag == FilterTag::mean) spatial.assign(taps, 1.0 / static_cast<double>(taps));
  if (kind.tag == FilterTag::gaussian || kind.tag == FilterTag::bilateral) {
    spatial = gaussian_taps(win.k, kind.sigma);
  }

  Tensor y(Shape{c, oh, ow});
  std::vector<std::size_t> offs;
  std::vector<double> wts(taps);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      detail::window_offsets(win, i, j, h, w, offs);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* plane = x.data() + ch * h * w;
        double acc = 0.0;
        if (kind.tag == FilterTag::strided) {
          acc = plane[offs[anchor]];
        } else if (kind.tag != FilterTag::bilateral) {
          for (std::size_t m = 0; m < taps; ++m) acc += spatial[m] * plane[offs[m]];
        } else {
          double lo = std::numeric_limits<double>::infinity(), hi = -lo;
          for (std::size_t m = 0; m < taps; ++m) {
            lo = std::min(lo, plane[offs[m]]);
            hi = std::max(hi, plane[offs[m]]);
          }
          const double range = hi - lo;
          const double centre = plane[offs[anchor]];
          double z = 0.0;
          for (std::size_t m = 0; m < taps; ++m) {
            double r = 1.0;
            if (range > 0.0) {
              const double d = (plane[offs[m]] - centre) / (range * kind.sigma_r);
              r = std::exp(-0.5 * d * d);
            }
            wts[m] = spatial[m] * r;
            z += wts[m];
          }
          for (std::size_t m = 0; m < taps; ++m) acc += wts[m] / z * plane[offs[m]];
        }
        y(ch, i, j) = acc;
      }
    }
  return y;
}

// ---------------------------------------------------------------------------
// Spatial-variant filter: one softmax kernel per location, shared by channels.

/// Logit generator: `weights` is a k^2 x C x k x k correlation over the window,
/// `bias` (optional, length k^2) is added to every location's logits.
struct SpatialVariantGenerator {
  ConvWeights weights;
  Tensor bias;
  std::size_t kernel_size = 3;
  std::size_t stride = 2;
};

inline Tensor spatial_variant_downsample(const Tensor& x, const SpatialVariantGenerator& gen) {
  require_rank(x, 3, "spatial_variant_downsample");
  const Window win{gen.kernel_size, gen.stride};
  const std::size_t taps = win.taps();
  if (gen.weights.out_channels() != taps) {
    throw ParameterError("spatial_variant_downsample: logit generator emits " +
                         std::to_string(gen.weights.out_channels()) + " channels, expected " +
                         std::to_string(taps));
  }
  if (gen.weights.kh() != win.k || gen.weights.kw() != win.k) {
    throw ParameterError("spatial_variant_downsample: generator kernel must be k x k");
  }
  require_axis(gen.weights.in_channels(), x.dim(0), "spatial_variant_downsample", "channels");
  if (!gen.bias.empty()) require_axis(gen.bias.size(), taps, "spatial_variant_downsample", "bias");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  win.check(h, w, "spatial_variant_downsample");
  const std::size_t oh = win.out_extent(h), ow = win.out_extent(w);

  Tensor y(Shape{c, oh, ow});
  std::vector<std::size_t> offs;
  Tensor logits(Shape{taps});
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      detail::window_offsets(win, i, j, h, w, offs);
      for (std::size_t m = 0; m < taps; ++m) {
        double v = gen.bias.empty() ? 0.0 : gen.bias[m];
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double* plane = x.data() + ch * h * w;
          for (std::size_t n = 0; n < taps; ++n)
            v += gen.weights(m, ch, n / win.k, n % win.k) * plane[offs[n]];
        }
        logits[m] = v;
      }
      const Tensor wts = softmax(logits);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* plane = x.data() + ch * h * w;
        double acc = 0.0;
        for (std::size_t m = 0; m < taps; ++m) acc += wts[m] * plane[offs[m]];
        y(ch, i, j) = acc;
      }
    }
  return y;
}

// ---------------------------------------------------------------------------
// Adaptive weighted downsampling

/// Learnable AWD parameters for C channels.
///
/// Local branch: a depthwise correlation with k^2 filters per channel over the
/// sampling window (grouped layout [C*k^2][1][k][k], filter c*k^2 + m gives
/// logit m of channel c). Global branch: per-channel temperature
/// T = softplus(fc2 * relu(fc1 * GAP(X) + b1) + b2).
struct AwdParams {
  std::size_t kernel_size = 3;
  std::size_t stride = 2;
  std::size_t reduction = 4;
  ConvWeights local_logit_weights;
  Tensor temp_fc1;  // (C/r) x C
  Tensor temp_b1;   // C/r
  Tensor temp_fc2;  // C x (C/r)
  Tensor temp_b2;   // C

  std::size_t channels() const { return temp_fc2.dim(0); }
  std::size_t hidden() const { return temp_fc1.dim(0); }

  /// Small random local logits (near-mean filters) and temperatures near 1.
  static AwdParams init(std::size_t channels, std::size_t k, std::size_t reduction, Rng& rng,
                        double logit_scale = 0.1) {
    if (reduction == 0 || channels % reduction != 0) {
      throw ParameterError("AWD: reduction ratio " + std::to_string(reduction) +
                           " must divide channel count " + std::to_string(channels));
    }
    AwdParams p;
    p.kernel_size = k;
    p.reduction = reduction;
    const std::size_t taps = k * k, hid = channels / reduction;
    p.local_logit_weights = ConvWeights(channels * taps, 1, k, k);
    for (double& v : p.local_logit_weights.tensor().values()) v = rng.normal(0.0, logit_scale);
    p.temp_fc1 = Tensor(Shape{hid, channels});
    p.temp_b1 = Tensor(Shape{hid});
    p.temp_fc2 = Tensor(Shape{channels, hid});
    p.temp_b2 = Tensor(Shape{channels}, std::log(std::exp(1.0) - 1.0));  // softplus(b2) = 1
    for (double& v : p.temp_fc1.values()) v = rng.normal(0.0, std::sqrt(2.0 / channels));
    for (double& v : p.temp_fc2.values()) v = rng.normal(0.0, 0.1 / std::sqrt(double(hid)));
    return p;
  }
};

inline void validate(const AwdParams& p) {
  const std::size_t k = p.kernel_size;
  if (k < 2 || k > 5) throw ParameterError("AWD: kernel_size must be in {2,3,4,5}");
  if (p.stride == 0) throw ParameterError("AWD: stride must be positive");
  require_rank(p.temp_fc2, 2, "AWD temp_fc2");
  require_rank(p.temp_fc1, 2, "AWD temp_fc1");
  const std::size_t c = p.temp_fc2.dim(0);
  if (p.reduction == 0 || c % p.reduction != 0) {
    throw ParameterError("AWD: reduction ratio " + std::to_string(p.reduction) +
                         " must divide channel count " + std::to_string(c));
  }
  const std::size_t hid = c / p.reduction;
  require_axis(p.temp_fc1.dim(0), hid, "AWD temp_fc1", "rows");
  require_axis(p.temp_fc1.dim(1), c, "AWD temp_fc1", "cols");
  require_axis(p.temp_fc2.dim(1), hid, "AWD temp_fc2", "cols");
  require_axis(p.temp_b1.size(), hid, "AWD temp_b1", "length");
  require_axis(p.temp_b2.size(), c, "AWD temp_b2", "length");
  const auto& lw = p.local_logit_weights;
  require_axis(lw.out_channels(), c * k * k, "AWD local_logit_weights", "out_channels");
  require_axis(lw.in_channels(), 1, "AWD local_logit_weights", "in_channels");
  require_axis(lw.kh(), k, "AWD local_logit_weights", "kh");
  require_axis(lw.kw(), k, "AWD local_logit_weights", "kw");
}

/// Filter weights W[c][i][j][m]; every k^2 slice is a probability vector.
struct AwdWeights {
  Tensor w;  // C x H' x W' x k^2
};

/// Per-location softmax of logits * temperature; logits is C x H' x W' x k^2.
inline AwdWeights awd_weights_from_logits(const Tensor& logits, const Tensor& temperature) {
  require_rank(logits, 4, "awd_weights_from_logits");
  require_axis(temperature.size(), logits.dim(0), "awd_weights_from_logits", "channels");
  Tensor z = logits;
  const std::size_t per_channel = logits.size() / logits.dim(0);
  for (std::size_t c = 0; c < logits.dim(0); ++c)
    for (std::size_t k = 0; k < per_channel; ++k) z[c * per_channel + k] *= temperature[c];
  return {softmax(z, 3)};
}

struct AwdCache {
  AwdParams params;
  Tensor input;
  Tensor pooled;       // C
  Tensor hidden_pre;   // C/r, fc1 output before relu
  Tensor hidden;       // C/r
  Tensor temp_pre;     // C, before softplus
  Tensor temperature;  // C
  Tensor logits;       // C x H' x W' x k^2 (local logits V)
  Tensor weights;      // C x H' x W' x k^2
  bool valid = false;
};

struct AwdForward {
  Tensor y;
  AwdWeights weights;
  AwdCache cache;
};

inline AwdForward awd_forward(const Tensor& x, const AwdParams& params) {
  validate(params);
  require_rank(x, 3, "awd_forward input");
  require_axis(x.dim(0), params.channels(), "awd_forward", "channels");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Window win{params.kernel_size, params.stride};
  win.check(h, w, "awd_forward");
  const std::size_t oh = win.out_extent(h), ow = win.out_extent(w), taps = win.taps();

  AwdCache cache;
  cache.params = params;
  cache.input = x;
  cache.pooled = global_avg_pool(x);
  cache.hidden_pre = fully_connected(cache.pooled, params.temp_fc1, params.temp_b1);
  cache.hidden = relu(cache.hidden_pre);
  cache.temp_pre = fully_connected(cache.hidden, params.temp_fc2, params.temp_b2);
  cache.temperature = Tensor(Shape{c});
  for (std::size_t ch = 0; ch < c; ++ch) cache.temperature[ch] = softplus(cache.temp_pre[ch]);

  cache.logits = Tensor(Shape{c, oh, ow, taps});
  const double* phi = params.local_logit_weights.tensor().data();
  const std::vector<std::size_t> table = detail::window_table(win, h, w);
  std::vector<double> buf(taps);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      const std::size_t* offs = table.data() + (i * ow + j) * taps;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* plane = x.data() + ch * h * w;
        for (std::size_t n = 0; n < taps; ++n) buf[n] = plane[offs[n]];
        double* v = &cache.logits(ch, i, j, 0);
        for (std::size_t m = 0; m < taps; ++m) {
          const double* f = phi + (ch * taps + m) * taps;
          double acc = 0.0;
          for (std::size_t n = 0; n < taps; ++n) acc += f[n] * buf[n];
          v[m] = acc;
        }
      }
    }

  AwdWeights weights = awd_weights_from_logits(cache.logits, cache.temperature);
  cache.weights = weights.w;

  Tensor y(Shape{c, oh, ow});
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      const std::size_t* offs = table.data() + (i * ow + j) * taps;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* plane = x.data() + ch * h * w;
        const double* wt = &cache.weights(ch, i, j, 0);
        double acc = 0.0;
        for (std::size_t m = 0; m < taps; ++m) acc += wt[m] * plane[offs[m]];
        y(ch, i, j) = acc;
      }
    }
  cache.valid = true;
  return {std::move(y), std::move(weights), std::move(cache)};
}

struct AwdGrads {
  Tensor d_input;
  ConvWeights d_local_logit_weights;
  Tensor d_temp_fc1;
  Tensor d_temp_b1;
  Tensor d_temp_fc2;
  Tensor d_temp_b2;
};

/// Gradients of awd_forward. The cache is consumed; a second call throws UsageError.
inline AwdGrads awd_backward(AwdCache& cache, const Tensor& d_y) {
  if (!cache.valid) throw UsageError("awd_backward: cache is empty or already consumed");
  const AwdParams& params = cache.params;
  const Tensor& x = cache.input;
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Window win{params.kernel_size, params.stride};
  const std::size_t oh = win.out_extent(h), ow = win.out_extent(w), taps = win.taps();
  d_y.require_same_shape(Tensor(Shape{c, oh, ow}), "awd_backward d_y");

  AwdGrads g;
  g.d_input = Tensor(x.dims());
  g.d_local_logit_weights = ConvWeights(c * taps, 1, win.k, win.k);
  Tensor d_temperature(Shape{c});

  const double* phi = params.local_logit_weights.tensor().data();
  double* d_phi = g.d_local_logit_weights.tensor().data();
  const std::vector<std::size_t> table = detail::window_table(win, h, w);
  std::vector<double> buf(taps), d_buf(taps), d_w(taps), d_v(taps);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      const std::size_t* offs = table.data() + (i * ow + j) * taps;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double dy = d_y(ch, i, j);
        if (dy == 0.0) continue;
        const double* plane = x.data() + ch * h * w;
        double* d_plane = g.d_input.data() + ch * h * w;
        const double* wt = &cache.weights(ch, i, j, 0);
        const double* v = &cache.logits(ch, i, j, 0);
        const double t = cache.temperature[ch];
        for (std::size_t n = 0; n < taps; ++n) {
          buf[n] = plane[offs[n]];
          d_buf[n] = dy * wt[n];
          d_w[n] = dy * buf[n];
        }
        double dot = 0.0;
        for (std::size_t m = 0; m < taps; ++m) dot += wt[m] * d_w[m];
        double d_t = 0.0;
        for (std::size_t m = 0; m < taps; ++m) {
          const double d_z = wt[m] * (d_w[m] - dot);
          d_v[m] = d_z * t;
          d_t += d_z * v[m];
        }
        d_temperature[ch] += d_t;
        for (std::size_t m = 0; m < taps; ++m) {
          const double* f = phi + (ch * taps + m) * taps;
          double* df = d_phi + (ch * taps + m) * taps;
          for (std::size_t n = 0; n < taps; ++n) {
            df[n] += d_v[m] * buf[n];
            d_buf[n] += d_v[m] * f[n];
          }
        }
        for (std::size_t n = 0; n < taps; ++n) d_plane[offs[n]] += d_buf[n];
      }
    }

  // Temperature path: softplus -> fc2 -> relu -> fc1 -> global pooling.
  Tensor d_temp_pre(Shape{c});
  for (std::size_t ch = 0; ch < c; ++ch) d_temp_pre[ch] = d_temperature[ch] * sigmoid(cache.temp_pre[ch]);
  auto fc2 = fully_connected_backward(cache.hidden, params.temp_fc2, d_temp_pre);
  const Tensor d_hidden_pre = relu_backward(cache.hidden_pre, fc2.d_input);
  auto fc1 = fully_connected_backward(cache.pooled, params.temp_fc1, d_hidden_pre);
  g.d_input += global_avg_pool_backward(x.dims(), fc1.d_input);
  g.d_temp_fc1 = std::move(fc1.d_weights);
  g.d_temp_b1 = std::move(fc1.d_bias);
  g.d_temp_fc2 = std::move(fc2.d_weights);
  g.d_temp_b2 = std::move(fc2.d_bias);
  cache.valid = false;
  return g;
}

/// Standard deviation of each location's k^2 weights, averaged over channels (H' x W').
inline Tensor weight_std_map(const AwdWeights& weights) {
  const Tensor& w = weights.w;
  require_rank(w, 4, "weight_std_map");
  const std::size_t c = w.dim(0), oh = w.dim(1), ow = w.dim(2), taps = w.dim(3);
  Tensor out(Shape{oh, ow});
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* s = w.data() + ((ch * oh + i) * ow + j) * taps;
        double mean = 0.0;
        for (std::size_t m = 0; m < taps; ++m) mean += s[m];
        mean /= static_cast<double>(taps);
        double var = 0.0;
        for (std::size_t m = 0; m < taps; ++m) var += (s[m] - mean) * (s[m] - mean);
        acc += std::sqrt(var / static_cast<double>(taps));
      }
      out(i, j) = acc / static_cast<double>(c);
    }
  return out;
}

/// Largest possible weight_std_map value for k^2 taps (a one-hot kernel).
inline double max_weight_std(std::size_t taps) {
  const double n = static_cast<double>(taps);
  return std::sqrt((1.0 - 1.0 / n) * (1.0 - 1.0 / n) + (n - 1.0) / (n * n)) / std::sqrt(n);
}

}  // namespace lowlight

#endif  // LOWLIGHT_AWD_HPP
