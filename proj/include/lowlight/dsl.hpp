#ifndef LOWLIGHT_DSL_HPP
#define LOWLIGHT_DSL_HPP

// Feature disturbance, the paired clean/noisy training loss and a toy-scale
// trainer:
//
//   D(x, x')  = sum_i || f_i(x) - f_i(x') ||^2
//   L         = CE(net(x), y) + alpha * CE(net(x'), y) + beta * D(x, x')
//
// Both feature paths receive the disturbance gradient.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "lowlight/awd.hpp"
#include "lowlight/noise.hpp"
#include "lowlight/ops.hpp"
#include "lowlight/scb.hpp"

namespace lowlight {

/// Sum over stages of squared L2 distances between paired feature tensors.
inline double disturbance(std::span<const Tensor> clean, std::span<const Tensor> noisy) {
  if (clean.size() != noisy.size()) {
    throw DimensionError("disturbance: " + std::to_string(clean.size()) + " clean stages vs " +
                         std::to_string(noisy.size()) + " noisy stages");
  }
  double d = 0.0;
  for (std::size_t s = 0; s < clean.size(); ++s) {
    clean[s].require_same_shape(noisy[s], ("disturbance stage " + std::to_string(s)).c_str());
    for (std::size_t i = 0; i < clean[s].size(); ++i) {
      const double e = clean[s][i] - noisy[s][i];
      d += e * e;
    }
  }
  return d;
}

inline double disturbance(const std::vector<Tensor>& clean, const std::vector<Tensor>& noisy) {
  return disturbance(std::span<const Tensor>(clean), std::span<const Tensor>(noisy));
}

// ---------------------------------------------------------------------------
// Paired data

/// B paired samples: clean and noisy are B x 3 x H x W and pixel-aligned.
struct PairBatch {
  Tensor clean;
  Tensor noisy;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }

  Tensor clean_at(std::size_t b) const { return slice(clean, b); }
  Tensor noisy_at(std::size_t b) const { return slice(noisy, b); }

  static Tensor slice(const Tensor& t, std::size_t b) {
    const std::size_t n = t.size() / t.dim(0);
    Shape dims(t.dims().begin() + 1, t.dims().end());
    return Tensor(dims, std::vector<double>(t.data() + b * n, t.data() + (b + 1) * n));
  }
};

enum class ShapeKind : std::size_t { circle = 0, square = 1, triangle = 2, cross = 3 };

/// Colored shape on a textured background, sRGB in [0, 1].
inline SrgbImage render_shape(ShapeKind kind, std::size_t size, Rng& rng) {
  SrgbImage img{Tensor(Shape{3, size, size}), 8};
  // The shape is always brighter than the background.
  std::array<double, 3> bg{}, fg{};
  for (auto& v : bg) v = rng.uniform(0.1, 0.4);
  for (auto& v : fg) v = rng.uniform(0.6, 0.95);
  const double fx = rng.uniform(0.1, 0.4), fy = rng.uniform(0.1, 0.4);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amp = rng.uniform(0.02, 0.06);

  const double n = static_cast<double>(size);
  const double radius = rng.uniform(0.22, 0.32) * n;
  const double cx = rng.uniform(radius + 1.0, n - radius - 1.0);
  const double cy = rng.uniform(radius + 1.0, n - radius - 1.0);
  const double bar = 0.35 * radius;

  auto inside = [&](double px, double py) {
    const double dx = px - cx, dy = py - cy;
    switch (kind) {
      case ShapeKind::circle: return dx * dx + dy * dy <= radius * radius;
      case ShapeKind::square: return std::abs(dx) <= 0.85 * radius && std::abs(dy) <= 0.85 * radius;
      case ShapeKind::triangle: {
        // Upward triangle with apex at (cx, cy - r) and base at cy + r.
        if (dy > radius || dy < -radius) return false;
        const double half_width = radius * (dy + radius) / (2.0 * radius);
        return std::abs(dx) <= half_width;
      }
      case ShapeKind::cross:
        return (std::abs(dx) <= bar && std::abs(dy) <= radius) ||
               (std::abs(dy) <= bar && std::abs(dx) <= radius);
    }
    return false;
  };

  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      const double tex = amp * std::sin(fx * px + fy * py * 1.3 + phase);
      const bool in = inside(px, py);
      for (int c = 0; c < 3; ++c) {
        const double v = in ? fg[c] : bg[c] + tex;
        img.pixels(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  return img;
}

struct ShapesDatasetConfig {
  std::size_t count = 1000;
  std::size_t image_size = 32;
  std::size_t num_classes = 4;
  std::uint64_t seed = 0;
  IspParams isp;
  NoiseParams noise;
};

/// Paired clean/noisy RAW-RGB shapes, labels balanced round-robin over classes.
inline PairBatch make_shapes_dataset(const ShapesDatasetConfig& cfg) {
  if (cfg.count == 0) throw DataError("shapes dataset: count must be positive");
  if (cfg.num_classes < 1 || cfg.num_classes > 4) {
    throw ParameterError("shapes dataset: num_classes must be in [1, 4]");
  }
  const std::size_t s = cfg.image_size, per = 3 * s * s;
  PairBatch batch{Tensor(Shape{cfg.count, 3, s, s}), Tensor(Shape{cfg.count, 3, s, s}), {}};
  batch.labels.resize(cfg.count);
  NoiseParams noise = cfg.noise;
  noise.seed = derive_seed(cfg.seed, 0x6e6f697365ULL);
  for (std::size_t b = 0; b < cfg.count; ++b) {
    Rng rng(cfg.seed, b);
    const std::size_t label = b % cfg.num_classes;
    const SrgbImage img = render_shape(static_cast<ShapeKind>(label), s, rng);
    const LowLightPair pair = synthesize_lowlight(img, cfg.isp, noise, b);
    std::copy_n(pair.clean.pixels.data(), per, batch.clean.data() + b * per);
    std::copy_n(pair.noisy.pixels.data(), per, batch.noisy.data() + b * per);
    batch.labels[b] = label;
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Toy network: SCB(3->8) -> relu -> AWD -> SCB(8->16) -> relu -> AWD -> GAP -> FC

struct ToyNet {
  ScbParams scb1;
  AwdParams awd1;
  ScbParams scb2;
  AwdParams awd2;
  Tensor fc_w;  // classes x 16
  Tensor fc_b;  // classes
  // Fixed per-channel input standardization (not trained).
  std::array<double, 3> input_mean{0.0, 0.0, 0.0};
  std::array<double, 3> input_std{1.0, 1.0, 1.0};

  static constexpr std::size_t kStages = 2;

  /// Sets the input standardization from per-channel statistics of `images` (B x 3 x H x W).
  void fit_input_normalization(const Tensor& images) {
    const std::size_t b = images.dim(0), hw = images.dim(2) * images.dim(3);
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t n = 0; n < b; ++n) {
        const double* p = images.data() + (n * 3 + c) * hw;
        for (std::size_t k = 0; k < hw; ++k) {
          s += p[k];
          s2 += p[k] * p[k];
        }
      }
      const double count = static_cast<double>(b * hw);
      const double mean = s / count;
      input_mean[c] = mean;
      input_std[c] = std::max(std::sqrt(std::max(s2 / count - mean * mean, 0.0)), 1e-6);
    }
  }

  Tensor normalize_input(const Tensor& x) const {
    require_rank(x, 3, "ToyNet input");
    require_axis(x.dim(0), 3, "ToyNet input", "channels");
    Tensor out = x;
    const std::size_t hw = x.dim(1) * x.dim(2);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < hw; ++k)
        out[c * hw + k] = (x[c * hw + k] - input_mean[c]) / input_std[c];
    return out;
  }

  static ToyNet init(std::size_t num_classes, std::uint64_t seed,
                     SmoothInit smooth = SmoothInit::mean, std::size_t awd_kernel = 3,
                     std::size_t reduction = 4) {
    Rng rng(seed, 0x746f796e6574ULL);
    ToyNet net;
    net.scb1 = ScbParams::init(3, 8, rng, smooth);
    net.awd1 = AwdParams::init(8, awd_kernel, reduction, rng);
    net.scb2 = ScbParams::init(8, 16, rng, smooth);
    net.awd2 = AwdParams::init(16, awd_kernel, reduction, rng);
    net.fc_w = Tensor(Shape{num_classes, 16});
    net.fc_b = Tensor(Shape{num_classes});
    for (double& v : net.fc_w.values()) v = rng.normal(0.0, std::sqrt(1.0 / 16.0));
    return net;
  }

  std::size_t num_classes() const { return fc_w.dim(0); }

  /// Every learnable tensor, in a fixed order shared with gradient containers.
  std::vector<Tensor*> parameters() {
    return {&scb1.w3.tensor(),
            &scb1.w1.tensor(),
            &scb1.sconv_logits,
            &awd1.local_logit_weights.tensor(),
            &awd1.temp_fc1,
            &awd1.temp_b1,
            &awd1.temp_fc2,
            &awd1.temp_b2,
            &scb2.w3.tensor(),
            &scb2.w1.tensor(),
            &scb2.sconv_logits,
            &awd2.local_logit_weights.tensor(),
            &awd2.temp_fc1,
            &awd2.temp_b1,
            &awd2.temp_fc2,
            &awd2.temp_b2,
            &fc_w,
            &fc_b};
  }

  /// Same structure with every tensor zeroed.
  ToyNet zeros_like() const {
    ToyNet z = *this;
    for (Tensor* t : z.parameters()) t->fill(0.0);
    return z;
  }
};

struct ToyForward {
  Tensor logits;
  std::array<Tensor, ToyNet::kStages> stages;  // AWD outputs
  ScbCache scb1, scb2;
  AwdCache awd1, awd2;
  Tensor pre1, pre2;  // SCB outputs before relu
  Tensor pooled;
};

inline ToyForward toy_forward(const ToyNet& net, const Tensor& x) {
  ToyForward f;
  auto s1 = scb_forward_train(net.normalize_input(x), net.scb1);
  f.scb1 = std::move(s1.cache);
  f.pre1 = std::move(s1.y);
  auto a1 = awd_forward(relu(f.pre1), net.awd1);
  f.awd1 = std::move(a1.cache);
  f.stages[0] = std::move(a1.y);
  auto s2 = scb_forward_train(f.stages[0], net.scb2);
  f.scb2 = std::move(s2.cache);
  f.pre2 = std::move(s2.y);
  auto a2 = awd_forward(relu(f.pre2), net.awd2);
  f.awd2 = std::move(a2.cache);
  f.stages[1] = std::move(a2.y);
  f.pooled = global_avg_pool(f.stages[1]);
  f.logits = fully_connected(f.pooled, net.fc_w, net.fc_b);
  return f;
}

/// Inference-only features (no caches kept beyond the call).
inline std::vector<Tensor> toy_features(const ToyNet& net, const Tensor& x) {
  ToyForward f = toy_forward(net, x);
  return {std::move(f.stages[0]), std::move(f.stages[1])};
}

/// Accumulates parameter gradients into `grads`. `d_stages` may hold empty
/// tensors for stages with no direct gradient.
inline void toy_backward(const ToyNet& net, ToyForward& f, const Tensor& d_logits,
                         const std::array<Tensor, ToyNet::kStages>& d_stages, ToyNet& grads,
                         Tensor* d_input = nullptr) {
  auto fc = fully_connected_backward(f.pooled, net.fc_w, d_logits);
  grads.fc_w += fc.d_weights;
  grads.fc_b += fc.d_bias;
  Tensor d_f2 = global_avg_pool_backward(f.stages[1].dims(), fc.d_input);
  if (!d_stages[1].empty()) d_f2 += d_stages[1];

  auto a2 = awd_backward(f.awd2, d_f2);
  grads.awd2.local_logit_weights.tensor() += a2.d_local_logit_weights.tensor();
  grads.awd2.temp_fc1 += a2.d_temp_fc1;
  grads.awd2.temp_b1 += a2.d_temp_b1;
  grads.awd2.temp_fc2 += a2.d_temp_fc2;
  grads.awd2.temp_b2 += a2.d_temp_b2;
  auto s2 = scb_backward(f.scb2, relu_backward(f.pre2, std::move(a2.d_input)));
  grads.scb2.w3.tensor() += s2.d_w3.tensor();
  grads.scb2.w1.tensor() += s2.d_w1.tensor();
  grads.scb2.sconv_logits += s2.d_logits;

  Tensor d_f1 = std::move(s2.d_input);
  if (!d_stages[0].empty()) d_f1 += d_stages[0];
  auto a1 = awd_backward(f.awd1, d_f1);
  grads.awd1.local_logit_weights.tensor() += a1.d_local_logit_weights.tensor();
  grads.awd1.temp_fc1 += a1.d_temp_fc1;
  grads.awd1.temp_b1 += a1.d_temp_b1;
  grads.awd1.temp_fc2 += a1.d_temp_fc2;
  grads.awd1.temp_b2 += a1.d_temp_b2;
  auto s1 = scb_backward(f.scb1, relu_backward(f.pre1, std::move(a1.d_input)));
  grads.scb1.w3.tensor() += s1.d_w3.tensor();
  grads.scb1.w1.tensor() += s1.d_w1.tensor();
  grads.scb1.sconv_logits += s1.d_logits;
  if (d_input) {
    const std::size_t hw = s1.d_input.dim(1) * s1.d_input.dim(2);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < hw; ++k) s1.d_input[c * hw + k] /= net.input_std[c];
    *d_input = std::move(s1.d_input);
  }
}

inline std::size_t argmax(const Tensor& v) {
  return static_cast<std::size_t>(std::max_element(v.values().begin(), v.values().end()) -
                                  v.values().begin());
}

// ---------------------------------------------------------------------------
// Loss and training

struct DslConfig {
  double alpha = 1.0;
  double beta = 0.01;
  std::vector<std::size_t> stage_ids{0, 1};
  std::size_t epochs = 8;
  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  double grad_clip = 5.0;  // global gradient-norm limit per step; 0 disables
};

inline void validate(const DslConfig& cfg) {
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) throw ParameterError("alpha must be >= 0");
  if (!(cfg.beta >= 0.0) || !std::isfinite(cfg.beta)) throw ParameterError("beta must be >= 0");
  if (cfg.stage_ids.empty()) throw ParameterError("stage_ids must not be empty");
  for (std::size_t s : cfg.stage_ids) {
    if (s >= ToyNet::kStages) {
      throw ParameterError("stage id " + std::to_string(s) + " out of range (net has " +
                           std::to_string(ToyNet::kStages) + " stages)");
    }
  }
  if (cfg.batch_size == 0) throw ParameterError("batch_size must be positive");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ParameterError("learning_rate must be positive");
  }
  if (!(cfg.grad_clip >= 0.0) || !std::isfinite(cfg.grad_clip)) {
    throw ParameterError("grad_clip must be >= 0");
  }
}

inline std::vector<Tensor> select_stages(const std::array<Tensor, ToyNet::kStages>& stages,
                                         const std::vector<std::size_t>& ids) {
  std::vector<Tensor> out;
  out.reserve(ids.size());
  for (std::size_t s : ids) out.push_back(stages[s]);
  return out;
}

struct DslLoss {
  double loss = 0.0;  // mean over the batch
  double ce_clean = 0.0;
  double ce_noisy = 0.0;
  double disturbance = 0.0;
  ToyNet grads;
};

/// Mean composite loss over `indices` of `batch` (all samples when empty) and its gradient.
inline DslLoss dsl_loss(const ToyNet& net, const PairBatch& batch, const DslConfig& cfg,
                        std::span<const std::size_t> indices = {}) {
  validate(cfg);
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(batch.size());
    for (std::size_t b = 0; b < all.size(); ++b) all[b] = b;
    indices = all;
  }
  if (indices.empty()) throw DataError("dsl_loss: empty batch");
  for (std::size_t b : indices) {
    if (batch.labels[b] >= net.num_classes()) {
      throw DataError("dsl_loss: label " + std::to_string(batch.labels[b]) + " out of range for " +
                      std::to_string(net.num_classes()) + " classes");
    }
  }
  const double inv_b = 1.0 / static_cast<double>(indices.size());
  DslLoss out;
  out.grads = net.zeros_like();
  for (std::size_t b : indices) {
    ToyForward fc = toy_forward(net, batch.clean_at(b));
    ToyForward fn = toy_forward(net, batch.noisy_at(b));
    auto ce_c = cross_entropy(fc.logits, batch.labels[b]);
    auto ce_n = cross_entropy(fn.logits, batch.labels[b]);
    std::array<Tensor, ToyNet::kStages> d_clean, d_noisy;
    double dist = 0.0;
    for (std::size_t s : cfg.stage_ids) {
      Tensor diff = fc.stages[s] - fn.stages[s];
      dist += sum_squares(diff);
      if (cfg.beta != 0.0) {
        diff *= 2.0 * cfg.beta * inv_b;
        if (d_clean[s].empty()) {
          d_clean[s] = diff;
          d_noisy[s] = diff * -1.0;
        } else {
          d_clean[s] += diff;
          d_noisy[s] -= diff;
        }
      }
    }
    out.ce_clean += ce_c.loss * inv_b;
    out.ce_noisy += ce_n.loss * inv_b;
    out.disturbance += dist * inv_b;
    toy_backward(net, fc, ce_c.d_logits * inv_b, d_clean, out.grads);
    toy_backward(net, fn, ce_n.d_logits * (cfg.alpha * inv_b), d_noisy, out.grads);
  }
  out.loss = out.ce_clean + cfg.alpha * out.ce_noisy + cfg.beta * out.disturbance;
  return out;
}

/// Forward-only value of the composite loss; equals dsl_loss(...).loss.
inline double dsl_loss_value(const ToyNet& net, const PairBatch& batch, const DslConfig& cfg) {
  validate(cfg);
  if (batch.size() == 0) throw DataError("dsl_loss_value: empty batch");
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch.labels[b] >= net.num_classes()) throw DataError("dsl_loss_value: label out of range");
    const ToyForward fc = toy_forward(net, batch.clean_at(b));
    const ToyForward fn = toy_forward(net, batch.noisy_at(b));
    double dist = 0.0;
    for (std::size_t s : cfg.stage_ids) dist += sum_squares(fc.stages[s] - fn.stages[s]);
    total += cross_entropy(fc.logits, batch.labels[b]).loss +
             cfg.alpha * cross_entropy(fn.logits, batch.labels[b]).loss + cfg.beta * dist;
  }
  return total / static_cast<double>(batch.size());
}

/// Mean disturbance of `net` over the pairs, at `stage_ids`.
inline double eval_disturbance(const ToyNet& net, const PairBatch& pairs,
                               const std::vector<std::size_t>& stage_ids = {0, 1}) {
  if (pairs.size() == 0) throw DataError("eval_disturbance: empty pair stream");
  double acc = 0.0;
  for (std::size_t b = 0; b < pairs.size(); ++b) {
    const ToyForward fc = toy_forward(net, pairs.clean_at(b));
    const ToyForward fn = toy_forward(net, pairs.noisy_at(b));
    acc += disturbance(select_stages(fc.stages, stage_ids), select_stages(fn.stages, stage_ids));
  }
  return acc / static_cast<double>(pairs.size());
}

struct EpochMetrics {
  std::size_t epoch = 0;
  double clean_acc = 0.0;
  double noisy_acc = 0.0;
  double mean_disturbance = 0.0;
  double loss = 0.0;
};

struct HeldOutEval {
  double clean_acc = 0.0;
  double noisy_acc = 0.0;
  double mean_disturbance = 0.0;
};

inline HeldOutEval evaluate(const ToyNet& net, const PairBatch& pairs,
                            const std::vector<std::size_t>& stage_ids) {
  if (pairs.size() == 0) throw DataError("evaluate: empty pair stream");
  HeldOutEval e;
  for (std::size_t b = 0; b < pairs.size(); ++b) {
    const ToyForward fc = toy_forward(net, pairs.clean_at(b));
    const ToyForward fn = toy_forward(net, pairs.noisy_at(b));
    e.clean_acc += argmax(fc.logits) == pairs.labels[b] ? 1.0 : 0.0;
    e.noisy_acc += argmax(fn.logits) == pairs.labels[b] ? 1.0 : 0.0;
    e.mean_disturbance +=
        disturbance(select_stages(fc.stages, stage_ids), select_stages(fn.stages, stage_ids));
  }
  const double n = static_cast<double>(pairs.size());
  e.clean_acc /= n;
  e.noisy_acc /= n;
  e.mean_disturbance /= n;
  return e;
}

inline constexpr const char* kMetricsHeader = "epoch,clean_acc,noisy_acc,mean_disturbance,loss";

inline std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << kMetricsHeader << "\n";
  for (const auto& r : rows) {
    os << r.epoch << "," << r.clean_acc << "," << r.noisy_acc << "," << r.mean_disturbance << ","
       << r.loss << "\n";
  }
  return os.str();
}

struct TrainResult {
  ToyNet net;
  std::vector<EpochMetrics> metrics;
  std::string csv;
};

/// Minibatch SGD over `train`; metrics are measured on `heldout` after each epoch.
inline TrainResult train_toy(const PairBatch& train, const PairBatch& heldout, const DslConfig& cfg,
                             std::size_t num_classes = 4,
                             const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  validate(cfg);
  if (train.size() == 0) throw DataError("train_toy: empty training set");
  if (heldout.size() == 0) throw DataError("train_toy: empty held-out set");
  TrainResult result{ToyNet::init(num_classes, cfg.seed), {}, {}};
  result.net.fit_input_normalization(train.clean);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle(cfg.seed, 0x73687566ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      DslLoss step = dsl_loss(result.net, train, cfg, idx);
      if (!std::isfinite(step.loss)) throw NumericError("train_toy: loss diverged");
      auto params = result.net.parameters();
      auto grad_ptrs = step.grads.parameters();
      if (cfg.grad_clip > 0.0) {
        double norm2 = 0.0;
        for (const Tensor* g : grad_ptrs) norm2 += sum_squares(*g);
        const double norm = std::sqrt(norm2);
        if (norm > cfg.grad_clip) {
          for (Tensor* g : grad_ptrs) *g *= cfg.grad_clip / norm;
        }
      }
      std::vector<const Tensor*> grads(grad_ptrs.begin(), grad_ptrs.end());
      sgd_step(params, grads, cfg.learning_rate);
      loss_sum += step.loss;
      ++steps;
    }
    const HeldOutEval e = evaluate(result.net, heldout, cfg.stage_ids);
    EpochMetrics m{epoch, e.clean_acc, e.noisy_acc, e.mean_disturbance,
                   loss_sum / static_cast<double>(steps)};
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.csv = metrics_csv(result.metrics);
  return result;
}

// ---------------------------------------------------------------------------
// Fixed random probe network for comparing downsamplers.

using Downsampler = std::function<Tensor(const Tensor&)>;

struct ProbeNet {
  ConvWeights conv1;  // width x C x 3 x 3
  ConvWeights conv2;  // width x width x 3 x 3

  static ProbeNet random(std::size_t in_channels, std::size_t width, std::uint64_t seed) {
    Rng rng(seed, 0x70726f6265ULL);
    ProbeNet p{ConvWeights(width, in_channels, 3, 3), ConvWeights(width, width, 3, 3)};
    for (double& v : p.conv1.tensor().values()) v = rng.normal(0.0, std::sqrt(2.0 / (9.0 * in_channels)));
    for (double& v : p.conv2.tensor().values()) v = rng.normal(0.0, std::sqrt(2.0 / (9.0 * width)));
    return p;
  }

  /// Two stages: down(relu(conv1 x)), down(relu(conv2 stage1)).
  std::vector<Tensor> features(const Tensor& x, const Downsampler& down) const {
    std::vector<Tensor> f;
    f.push_back(down(relu(conv2d(x, conv1, kSame3x3))));
    f.push_back(down(relu(conv2d(f.back(), conv2, kSame3x3))));
    return f;
  }
};

}  // namespace lowlight

#endif  // LOWLIGHT_DSL_HPP
