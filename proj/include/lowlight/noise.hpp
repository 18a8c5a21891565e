#ifndef LOWLIGHT_NOISE_HPP
#define LOWLIGHT_NOISE_HPP

// Physics-based low-light noise synthesis on demosaicked RAW-RGB in the
// normalized [0, 1] domain. Parameters are given in digital numbers (DN) of
// an `adc_bits` converter and rescaled by the white level 2^adc_bits - 1.

#include <cmath>
#include <cstdint>
#include <string>

#include "lowlight/isp.hpp"
#include "lowlight/random.hpp"

namespace lowlight {

enum class ReadNoiseKind { gaussian };

struct NoiseParams {
  double system_gain_K = 2.0;  // DN per photoelectron; 0 disables shot noise
  double read_sigma = 4.0;     // DN
  double row_sigma = 1.0;      // DN
  int adc_bits = 14;
  double low_light_factor = 50.0;
  std::uint64_t seed = 0;
  bool quantization_noise = true;  // uniform ADC rounding error of one DN step
  ReadNoiseKind read_kind = ReadNoiseKind::gaussian;

  double white_level() const { return std::ldexp(1.0, adc_bits) - 1.0; }
  double gain_normalized() const { return system_gain_K / white_level(); }
  double read_sigma_normalized() const { return read_sigma / white_level(); }
  double row_sigma_normalized() const { return row_sigma / white_level(); }
  double quant_step() const { return 1.0 / white_level(); }

  /// Every noise source switched off.
  static NoiseParams none(double factor = 1.0) {
    NoiseParams p;
    p.system_gain_K = 0.0;
    p.read_sigma = 0.0;
    p.row_sigma = 0.0;
    p.quantization_noise = false;
    p.low_light_factor = factor;
    return p;
  }
};

inline void validate(const NoiseParams& p) {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(p.system_gain_K)) throw ParameterError("system_gain_K must be finite and >= 0");
  if (!finite_nonneg(p.read_sigma)) throw ParameterError("read_sigma must be finite and >= 0");
  if (!finite_nonneg(p.row_sigma)) throw ParameterError("row_sigma must be finite and >= 0");
  if (p.adc_bits < 1 || p.adc_bits > 52) throw ParameterError("adc_bits must be in [1, 52]");
  if (!std::isfinite(p.low_light_factor) || p.low_light_factor < 1.0) {
    throw ParameterError("low_light_factor must be finite and >= 1");
  }
}

/// Divides by the low-light factor (shorter exposure).
inline RawRgbImage darken(const RawRgbImage& raw, double factor) {
  if (!std::isfinite(factor) || factor < 1.0) {
    throw ParameterError("darken: factor must be >= 1, got " + std::to_string(factor));
  }
  RawRgbImage out = raw;
  for (double& v : out.pixels.values()) v /= factor;
  return out;
}

/// Digital gain, clipped to [0, 1].
inline RawRgbImage amplify(const RawRgbImage& raw, double factor) {
  if (!std::isfinite(factor) || !(factor > 0.0)) {
    throw ParameterError("amplify: factor must be positive, got " + std::to_string(factor));
  }
  RawRgbImage out = raw;
  std::size_t clipped = 0;
  for (double& v : out.pixels.values()) {
    v *= factor;
    if (v > 1.0 || v < 0.0) {
      v = v > 1.0 ? 1.0 : 0.0;
      ++clipped;
    }
  }
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(out.pixels.size());
  return out;
}

enum class Clip { on, off };

/// Adds shot (Poisson), read (Gaussian), row banding (one Gaussian per row and
/// channel) and ADC quantization (uniform) noise. The generator is keyed by
/// (params.seed, image_id), so distinct images can be processed concurrently
/// with reproducible results.
inline RawRgbImage inject_noise(const RawRgbImage& clean, const NoiseParams& params,
                                std::uint64_t image_id = 0, Clip clip = Clip::on) {
  validate(params);
  require_image3(clean.pixels, "inject_noise");
  Rng rng(params.seed, image_id);
  const double gain = params.gain_normalized();
  const double read = params.read_sigma_normalized();
  const double row = params.row_sigma_normalized();
  const double q = params.quant_step();
  const std::size_t channels = clean.pixels.dim(0), h = clean.pixels.dim(1), w = clean.pixels.dim(2);

  RawRgbImage out{Tensor(clean.pixels.dims()), clean.bit_depth, 0.0};
  std::size_t clipped = 0;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < h; ++y) {
      const double banding = row > 0.0 ? rng.normal(0.0, row) : 0.0;
      for (std::size_t x = 0; x < w; ++x) {
        const double v = clean.pixels(c, y, x);
        double n = v;
        if (gain > 0.0) {
          const double photons = std::max(v, 0.0) / gain;
          n = gain * static_cast<double>(rng.poisson(photons));
        }
        if (read > 0.0) n += rng.normal(0.0, read);
        n += banding;
        if (params.quantization_noise) n += q * (rng.uniform() - 0.5);
        if (clip == Clip::on && (n < 0.0 || n > 1.0)) {
          n = n < 0.0 ? 0.0 : 1.0;
          ++clipped;
        }
        out.pixels(c, y, x) = n;
      }
    }
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(out.pixels.size());
  return out;
}

struct LowLightPair {
  RawRgbImage clean;
  RawRgbImage noisy;
};

/// x = unprocess(srgb); x' = amplify(inject_noise(darken(x, f)), f).
inline LowLightPair synthesize_lowlight(const SrgbImage& srgb, const IspParams& isp,
                                        const NoiseParams& noise, std::uint64_t image_id = 0) {
  validate(noise);
  LowLightPair pair;
  pair.clean = unprocess(srgb, isp);
  const double f = noise.low_light_factor;
  pair.noisy = amplify(inject_noise(darken(pair.clean, f), noise, image_id), f);
  pair.noisy.bit_depth = pair.clean.bit_depth;
  return pair;
}

}  // namespace lowlight

#endif  // LOWLIGHT_NOISE_HPP
