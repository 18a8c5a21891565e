#ifndef LOWLIGHT_SWEEP_HPP
#define LOWLIGHT_SWEEP_HPP

// Downsampler sweep: fixed, spatial-variant and adaptive filters compared by
// the feature disturbance they leave in a fixed random probe network.

#include <string>
#include <vector>

#include "lowlight/awd.hpp"
#include "lowlight/dsl.hpp"

namespace lowlight {

struct SweepConfig {
  std::size_t probe_width = 8;
  std::size_t reduction = 4;
  double gaussian_sigma = 1.0;
  double bilateral_sigma_r = 0.1;
  double logit_scale = 1.0;  // spread of random spatial-variant / AWD logit weights
  std::vector<std::size_t> kernels{2, 3, 4, 5};
};

struct SweepFilter {
  std::string name;
  std::size_t kernel = 1;
  Downsampler down;
};

inline SpatialVariantGenerator random_spatial_variant(std::size_t channels, std::size_t k,
                                                      double scale, Rng& rng) {
  SpatialVariantGenerator gen{ConvWeights(k * k, channels, k, k), Tensor(), k, 2};
  for (double& v : gen.weights.tensor().values()) v = rng.normal(0.0, scale);
  return gen;
}

/// Table-1 style filter set for feature maps with `channels` channels.
/// `learned` adds the spatial-variant and AWD filters with seeded random parameters.
inline std::vector<SweepFilter> make_filter_set(std::size_t channels, const SweepConfig& cfg,
                                                std::uint64_t seed, bool learned = true) {
  std::vector<SweepFilter> set;
  set.push_back({"strided", 1, [](const Tensor& x) {
                   return downsample_fixed(x, FixedFilterKind::strided());
                 }});
  Rng rng(seed, 0x7377656570ULL);
  for (std::size_t k : cfg.kernels) {
    const auto mean = FixedFilterKind::mean(k);
    const auto gauss = FixedFilterKind::gaussian(k, cfg.gaussian_sigma);
    const auto bilat = FixedFilterKind::bilateral(k, cfg.gaussian_sigma, cfg.bilateral_sigma_r);
    set.push_back({"mean", k, [mean](const Tensor& x) { return downsample_fixed(x, mean); }});
    set.push_back({"gaussian", k, [gauss](const Tensor& x) { return downsample_fixed(x, gauss); }});
    set.push_back({"bilateral", k, [bilat](const Tensor& x) { return downsample_fixed(x, bilat); }});
    if (!learned) continue;
    const auto gen = random_spatial_variant(channels, k, cfg.logit_scale, rng);
    set.push_back({"spatial_variant", k,
                   [gen](const Tensor& x) { return spatial_variant_downsample(x, gen); }});
    const std::size_t r = channels % cfg.reduction == 0 ? cfg.reduction : 1;
    const AwdParams awd = AwdParams::init(channels, k, r, rng, cfg.logit_scale);
    set.push_back({"awd", k, [awd](const Tensor& x) { return awd_forward(x, awd).y; }});
  }
  return set;
}

struct SweepRow {
  std::string filter;
  std::size_t kernel = 1;
  double disturbance = 0.0;
};

/// Disturbance between probe features of a clean/noisy pair for every filter in the set.
inline std::vector<SweepRow> disturbance_sweep(const Tensor& clean, const Tensor& noisy,
                                               const ProbeNet& probe,
                                               const std::vector<SweepFilter>& filters) {
  clean.require_same_shape(noisy, "disturbance_sweep");
  std::vector<SweepRow> rows;
  for (const auto& f : filters) {
    rows.push_back({f.name, f.kernel,
                    disturbance(probe.features(clean, f.down), probe.features(noisy, f.down))});
  }
  return rows;
}

}  // namespace lowlight

#endif  // LOWLIGHT_SWEEP_HPP
