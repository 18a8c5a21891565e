#include <gtest/gtest.h>

#include "lowlight/isp.hpp"
#include "lowlight/noise.hpp"
#include "test_support.hpp"

using namespace lowlight;
using namespace lowlight::testing;

namespace {

// 0.25^(1/2.2) evaluated with 40 significant digits.
constexpr double kQuarterGamma = 0.5325205447199813390952962976991022450462;

IspParams tinted_isp(ToneCurve tone) {
  IspParams p;
  p.wb_gains = {2.0, 1.0, 1.6};
  p.ccm = {{{1.3, -0.2, -0.1}, {-0.15, 1.25, -0.1}, {-0.05, -0.25, 1.3}}};
  p.tone_curve = tone;
  return p;
}

// sRGB image obtained by processing a RAW image that stays inside [0, 1] at every stage.
SrgbImage non_clipping_srgb(const IspParams& isp, Rng& rng) {
  RawRgbImage raw{uniform_tensor({3, 12, 10}, rng, 0.15, 0.4), 14, 0.0};
  return process(raw, isp);
}

}  // namespace

TEST(Gamma, HighPrecisionValueAndFixedPoints) {
  const Tensor img(Shape{3, 1, 1}, std::vector<double>{0.0, 0.25, 1.0});
  const Tensor out = gamma_correct(img, 1.0 / 2.2);
  EXPECT_EQ(out[0], 0.0);
  EXPECT_NEAR(out[1], kQuarterGamma, 1e-15);
  EXPECT_EQ(out[2], 1.0);
  EXPECT_THROW(gamma_correct(Tensor(Shape{1}, 1.5), 0.5), DomainError);
  EXPECT_THROW(gamma_correct(Tensor(Shape{1}, -0.1), 0.5), DomainError);
}

TEST(Gamma, InversePairWithin1e12) {
  Rng rng(1);
  const Tensor x = uniform_tensor({1000}, rng);
  EXPECT_LT(max_abs_diff(gamma_correct(gamma_correct(x, 1.0 / 2.2), 2.2), x), 1e-12);
}

TEST(Gamma, StrictlyMonotone) {
  Tensor x(Shape{101});
  for (std::size_t i = 0; i <= 100; ++i) x[i] = i / 100.0;
  for (double g : {0.2, 1.0 / 2.2, 1.0, 3.0}) {
    const Tensor y = gamma_correct(x, g);
    for (std::size_t i = 1; i <= 100; ++i) EXPECT_GT(y[i], y[i - 1]);
  }
}

TEST(Isp, ValidationRejectsBadParameters) {
  IspParams p;
  EXPECT_NO_THROW(validate(p));
  p.wb_gains[1] = 0.0;
  EXPECT_THROW(validate(p), ParameterError);
  p = IspParams{};
  p.ccm[0][0] = 2.0;  // row no longer sums to 1
  EXPECT_THROW(validate(p), ParameterError);
  p = IspParams{};
  p.ccm = {{{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}, {0.0, 0.0, 1.0}}};  // singular
  EXPECT_THROW(validate(p), ParameterError);
  p = IspParams{};
  p.gamma = 0.0;
  EXPECT_THROW(validate(p), ParameterError);
}

TEST(Isp, MatrixInverse) {
  const Mat3 m = tinted_isp(ToneCurve::none).ccm;
  const Mat3 inv = inverse(m);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += m[i][k] * inv[k][j];
      EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-14);
    }
}

TEST(Isp, IdentityPipelineIsIdentity) {
  Rng rng(2);
  const SrgbImage img{uniform_tensor({3, 5, 4}, rng), 8};
  const RawRgbImage raw = unprocess(img, IspParams::identity());
  EXPECT_LT(max_abs_diff(raw.pixels, img.pixels), 1e-15);
  EXPECT_LT(max_abs_diff(process(raw, IspParams::identity()).pixels, img.pixels), 1e-15);
}

TEST(Isp, WhiteBalanceDivision) {
  IspParams p = IspParams::identity();
  p.wb_gains = {2.0, 1.0, 1.5};
  const SrgbImage img{Tensor(Shape{3, 1, 1}, std::vector<double>{0.2, 0.2, 0.3}), 8};
  const RawRgbImage raw = unprocess(img, p);
  EXPECT_NEAR(raw.pixels[0], 0.1, 1e-15);
  EXPECT_NEAR(raw.pixels[1], 0.2, 1e-15);
  EXPECT_NEAR(raw.pixels[2], 0.2, 1e-15);
}

TEST(Isp, ProcessGrayQuarter) {
  IspParams p = IspParams::identity();
  p.gamma = 1.0 / 2.2;
  const RawRgbImage raw{Tensor(Shape{3, 2, 2}, 0.25), 14, 0.0};
  const SrgbImage out = process(raw, p);
  for (double v : out.pixels.values()) EXPECT_NEAR(v, kQuarterGamma, 1e-15);
}

TEST(Isp, RoundTripPsnr) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const IspParams none = tinted_isp(ToneCurve::none);
    const SrgbImage a = non_clipping_srgb(none, rng);
    EXPECT_GE(psnr(process(unprocess(a, none), none).pixels, a.pixels), 60.0);
    const IspParams smooth = tinted_isp(ToneCurve::smoothstep);
    const SrgbImage b = non_clipping_srgb(smooth, rng);
    EXPECT_GE(psnr(process(unprocess(b, smooth), smooth).pixels, b.pixels), 40.0);
  }
}

TEST(Isp, ClipFractionReported) {
  IspParams p = IspParams::identity();
  p.wb_gains = {0.5, 1.0, 1.0};  // unprocess doubles red
  const SrgbImage img{Tensor(Shape{3, 1, 2}, std::vector<double>{0.8, 0.2, 0.5, 0.5, 0.5, 0.5}), 8};
  const RawRgbImage raw = unprocess(img, p);
  EXPECT_EQ(raw.pixels[0], 1.0);
  EXPECT_NEAR(raw.clip_fraction, 1.0 / 6.0, 1e-15);
}

TEST(Isp, SmoothstepInverse) {
  for (double y = 0.0; y <= 1.0; y += 0.01) EXPECT_NEAR(smoothstep(smoothstep_inverse(y)), y, 1e-11);
}

TEST(Bayer, RggbLayoutAndDemosaic) {
  Tensor px(Shape{3, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    px[i] = 1.0;
    px[4 + i] = 2.0;
    px[8 + i] = 3.0;
  }
  const BayerImage b = mosaic(RawRgbImage{px, 14, 0.0});
  EXPECT_EQ(b.plane(0, 0), 1.0);
  EXPECT_EQ(b.plane(0, 1), 2.0);
  EXPECT_EQ(b.plane(1, 0), 2.0);
  EXPECT_EQ(b.plane(1, 1), 3.0);

  const BayerImage block{Tensor(Shape{2, 2}, std::vector<double>{1, 2, 4, 3})};
  const RawRgbImage rgb = demosaic_avg(block);
  EXPECT_EQ(rgb.pixels(0, 0, 0), 1.0);
  EXPECT_EQ(rgb.pixels(1, 0, 0), 3.0);
  EXPECT_EQ(rgb.pixels(2, 0, 0), 3.0);
}

TEST(Bayer, DemosaicMatchesBlockLoop) {
  Rng rng(4);
  const BayerImage b{uniform_tensor({6, 8}, rng)};
  const RawRgbImage rgb = demosaic_avg(b);
  ASSERT_EQ(rgb.pixels.dims(), (Shape{3, 3, 4}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(rgb.pixels(0, i, j), b.plane(2 * i, 2 * j));
      EXPECT_EQ(rgb.pixels(1, i, j), 0.5 * (b.plane(2 * i, 2 * j + 1) + b.plane(2 * i + 1, 2 * j)));
      EXPECT_EQ(rgb.pixels(2, i, j), b.plane(2 * i + 1, 2 * j + 1));
    }
}

TEST(Bayer, OddExtentsRejected) {
  EXPECT_THROW(mosaic(RawRgbImage{Tensor(Shape{3, 3, 2}), 14, 0.0}), DimensionError);
  EXPECT_THROW(demosaic_avg(BayerImage{Tensor(Shape{2, 5})}), DimensionError);
}

TEST(Quantize, GridTiesAndErrorBound) {
  EXPECT_EQ(quantize_value(1.0, 8), 1.0);
  EXPECT_EQ(quantize_value(0.5, 1), 0.0);  // half to even
  EXPECT_THROW(quantize(RawRgbImage{Tensor(Shape{3, 1, 1}), 14, 0.0}, 9), ParameterError);
  Rng rng(5);
  for (int bits : {8, 10, 12, 14}) {
    const double lsb = 1.0 / (std::ldexp(1.0, bits) - 1.0);
    double worst = 0.0;
    for (int i = 0; i < 250000; ++i) {
      const double v = rng.uniform();
      worst = std::max(worst, std::abs(quantize_value(v, bits) - v));
    }
    EXPECT_LE(worst, 0.5 * lsb * (1.0 + 1e-12));
  }
}

TEST(Quantize, IdempotentAndPsnrOrdering) {
  Rng rng(6);
  const RawRgbImage raw{uniform_tensor({3, 64, 64}, rng), 14, 0.0};
  double previous = 0.0;
  for (int bits : {8, 10, 12, 14}) {
    const RawRgbImage q = quantize(raw, bits);
    EXPECT_EQ(q.bit_depth, bits);
    EXPECT_TRUE(quantize(q, bits).pixels == q.pixels);
    const double p = psnr(q.pixels, raw.pixels);
    EXPECT_GT(p, previous);
    previous = p;
  }
  // Already on the 14-bit grid: lossless.
  EXPECT_TRUE(std::isinf(psnr(quantize(quantize(raw, 14), 14).pixels, quantize(raw, 14).pixels)));
}

TEST(Quantize, EightBitUniformFormula) {
  // Uniform rounding error on a grid of step 1/255 has variance step^2/12.
  Rng rng(7);
  const RawRgbImage raw{uniform_tensor({3, 600, 600}, rng), 14, 0.0};
  const double expected = 10.0 * std::log10(12.0 * 255.0 * 255.0);
  EXPECT_NEAR(expected, 58.92, 0.01);
  EXPECT_NEAR(psnr(quantize(raw, 8).pixels, raw.pixels), expected, 0.5);
}

// ---------------------------------------------------------------------------

TEST(Noise, DarkenAmplify) {
  const RawRgbImage half{Tensor(Shape{3, 1, 1}, 0.5), 14, 0.0};
  EXPECT_DOUBLE_EQ(darken(half, 50.0).pixels[0], 0.01);
  EXPECT_DOUBLE_EQ(amplify(RawRgbImage{Tensor(Shape{3, 1, 1}, 0.01), 14, 0.0}, 50.0).pixels[0], 0.5);
  EXPECT_TRUE(darken(half, 1.0).pixels == half.pixels);
  EXPECT_THROW(darken(half, 0.5), ParameterError);
  EXPECT_THROW(amplify(half, 0.0), ParameterError);
  const RawRgbImage amp = amplify(half, 4.0);
  EXPECT_EQ(amp.pixels[0], 1.0);
  EXPECT_EQ(amp.clip_fraction, 1.0);
  Rng rng(8);
  const RawRgbImage x{uniform_tensor({3, 8, 8}, rng, 0.0, 0.02), 14, 0.0};
  EXPECT_LT(max_abs_diff(amplify(darken(x, 50.0), 50.0).pixels, x.pixels), 1e-12);
}

TEST(Noise, ValidationRejectsBadParameters) {
  NoiseParams p;
  p.read_sigma = -1.0;
  EXPECT_THROW(validate(p), ParameterError);
  p = NoiseParams{};
  p.low_light_factor = std::nan("");
  EXPECT_THROW(validate(p), ParameterError);
  p = NoiseParams{};
  p.system_gain_K = std::numeric_limits<double>::infinity();
  EXPECT_THROW(validate(p), ParameterError);
}

TEST(Noise, DeterministicPerSeedAndImage) {
  Rng rng(9);
  const RawRgbImage x{uniform_tensor({3, 16, 16}, rng, 0.0, 0.1), 14, 0.0};
  NoiseParams p;
  p.seed = 77;
  EXPECT_TRUE(inject_noise(x, p, 3).pixels == inject_noise(x, p, 3).pixels);
  EXPECT_FALSE(inject_noise(x, p, 3).pixels == inject_noise(x, p, 4).pixels);
  NoiseParams q = p;
  q.seed = 78;
  EXPECT_FALSE(inject_noise(x, p, 3).pixels == inject_noise(x, q, 3).pixels);
}

TEST(Noise, VanishingShotNoise) {
  Rng rng(10);
  const RawRgbImage x{uniform_tensor({3, 16, 16}, rng, 0.1, 0.9), 14, 0.0};
  NoiseParams p = NoiseParams::none();
  p.system_gain_K = 1e-9;
  p.adc_bits = 52;
  EXPECT_LT(max_abs_diff(inject_noise(x, p).pixels, x.pixels), 1e-6);
}

TEST(Noise, DegeneratePipelineIsIdentity) {
  Rng rng(11);
  const SrgbImage img{uniform_tensor({3, 8, 8}, rng), 8};
  const LowLightPair pair = synthesize_lowlight(img, IspParams{}, NoiseParams::none(1.0));
  EXPECT_TRUE(pair.noisy.pixels == pair.clean.pixels);
}

TEST(Noise, ShotVarianceToMeanRatio) {
  NoiseParams p = NoiseParams::none();
  p.system_gain_K = 2.0;
  const double mean = 0.3;
  const RawRgbImage x{Tensor(Shape{3, 1000, 334}, mean), 14, 0.0};
  const Tensor n = inject_noise(x, p, 0, Clip::off).pixels;
  double s = 0.0, s2 = 0.0;
  for (double v : n.values()) {
    s += v;
    s2 += v * v;
  }
  const double m = s / n.size(), var = s2 / n.size() - m * m;
  EXPECT_NEAR(var / m / p.gain_normalized(), 1.0, 0.05);
}

TEST(Noise, ReadPlusRowVariance) {
  NoiseParams p = NoiseParams::none();
  p.read_sigma = 4.0;
  p.row_sigma = 3.0;
  // Many short rows so the per-row banding term is well sampled.
  const RawRgbImage x{Tensor(Shape{3, 33334, 10}), 14, 0.0};
  const Tensor n = inject_noise(x, p, 0, Clip::off).pixels;
  double s = 0.0, s2 = 0.0;
  for (double v : n.values()) {
    s += v;
    s2 += v * v;
  }
  const double m = s / n.size(), var = s2 / n.size() - m * m;
  const double want = std::pow(p.read_sigma_normalized(), 2) + std::pow(p.row_sigma_normalized(), 2);
  EXPECT_NEAR(var / want, 1.0, 0.05);
}

TEST(Noise, PoissonCrossoverKeepsMoments) {
  NoiseParams p = NoiseParams::none();
  p.system_gain_K = 1e-5;  // means straddle the 1e4 crossover
  const double wl = p.white_level();
  for (double photons : {0.9e4, 1.1e4}) {
    const double v = photons * p.system_gain_K / wl;
    const RawRgbImage x{Tensor(Shape{3, 400, 500}, v), 14, 0.0};
    const Tensor n = inject_noise(x, p, 0, Clip::off).pixels;
    double s = 0.0, s2 = 0.0;
    for (double u : n.values()) {
      s += u;
      s2 += u * u;
    }
    const double m = s / n.size(), var = s2 / n.size() - m * m;
    EXPECT_NEAR(m / v, 1.0, 1e-3);
    EXPECT_NEAR(var / (v * p.gain_normalized()), 1.0, 0.05);
  }
}

TEST(Noise, RowBandingCorrelation) {
  NoiseParams p = NoiseParams::none();
  p.read_sigma = 2.0;
  p.row_sigma = 3.0;
  const std::size_t rows = 100000, cols = 10;
  const RawRgbImage x{Tensor(Shape{3, rows, cols}), 14, 0.0};
  const Tensor n = inject_noise(x, p, 5, Clip::off).pixels;
  double within = 0.0, across = 0.0;
  for (std::size_t r = 0; r + 1 < rows; ++r) {
    within += n(0, r, 0) * n(0, r, 1);
    across += n(0, r, 0) * n(0, r + 1, 0);
  }
  within /= rows - 1;
  across /= rows - 1;
  const double row_var = std::pow(p.row_sigma_normalized(), 2);
  const double total = row_var + std::pow(p.read_sigma_normalized(), 2);
  // Standard error of a product-moment estimate is about total / sqrt(n).
  const double se = total / std::sqrt(double(rows));
  EXPECT_NEAR(within, row_var, 5.0 * se);
  EXPECT_NEAR(across, 0.0, 5.0 * se);
}

TEST(Noise, DisturbanceGrowsWithFactor) {
  Rng rng(12);
  const SrgbImage img{uniform_tensor({3, 32, 32}, rng, 0.1, 0.9), 8};
  double previous = 0.0;
  for (double f : {10.0, 20.0, 50.0, 100.0}) {
    NoiseParams p;
    p.low_light_factor = f;
    const LowLightPair pair = synthesize_lowlight(img, IspParams{}, p);
    double mad = 0.0;
    for (std::size_t i = 0; i < pair.clean.pixels.size(); ++i) {
      mad += std::abs(pair.noisy.pixels[i] - pair.clean.pixels[i]);
    }
    EXPECT_GT(mad, previous);
    previous = mad;
  }
}

TEST(Noise, MeanDownsampleReducesVariance) {
  // 3x3 box average of iid noise keeps 1/9 of the variance.
  NoiseParams p = NoiseParams::none();
  p.read_sigma = 50.0;
  const RawRgbImage x{Tensor(Shape{3, 600, 600}), 14, 0.0};
  const Tensor n = inject_noise(x, p, 0, Clip::off).pixels;
  double s2 = 0.0, b2 = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < 600; i += 2)
    for (std::size_t j = 1; j + 1 < 600; j += 2) {
      double acc = 0.0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) acc += n(0, i + di, j + dj);
      b2 += (acc / 9.0) * (acc / 9.0);
      ++count;
    }
  for (double v : n.values()) s2 += v * v;
  EXPECT_NEAR((b2 / count) / (s2 / n.size()), 1.0 / 9.0, 0.1 / 9.0);
}
