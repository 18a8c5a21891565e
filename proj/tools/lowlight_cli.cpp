// lowlight: command-line front end for the synthesis pipeline, filter studies
// and toy training. Exit codes: 0 ok, 2 config error, 3 I/O error,
// 4 invariant violation.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lowlight/config.hpp"
#include "lowlight/image_io.hpp"
#include "lowlight/sweep.hpp"

using namespace lowlight;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitInvariant = 4;

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Tensor load_feature_map(const std::string& path) {
  Tensor t = ends_with(path, ".png") ? read_png_rgb(path).pixels : read_tnsr(path);
  require_rank(t, 3, "feature map '" + path + "'");
  return t;
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw InvariantViolation(what + " is not finite");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string input, isp, noise, out;
  std::optional<std::uint64_t> seed;
  std::uint64_t image_id = 0;
};

void cmd_synth(const SynthArgs& a) {
  const IspParams isp = a.isp.empty() ? IspParams{} : parse_isp(load_json(a.isp));
  NoiseParams noise = a.noise.empty() ? NoiseParams{} : parse_noise(load_json(a.noise));
  if (a.seed) noise.seed = *a.seed;
  const SrgbImage img = read_png_rgb(a.input);
  const LowLightPair pair = synthesize_lowlight(img, isp, noise, a.image_id);
  write_raw(a.out + "_clean", pair.clean, isp);
  write_raw(a.out + "_noisy", pair.noisy, isp, noise);
  const SrgbImage clean_preview = process(pair.clean, isp);
  const SrgbImage noisy_preview = process(pair.noisy, isp);
  write_png_rgb(a.out + "_clean.png", clean_preview.pixels);
  write_png_rgb(a.out + "_noisy.png", noisy_preview.pixels);
  std::cout << "low_light_factor,seed,clean_clip_fraction,noisy_clip_fraction,preview_psnr_db\n"
            << fmt(noise.low_light_factor) << "," << noise.seed << ","
            << fmt(pair.clean.clip_fraction) << "," << fmt(pair.noisy.clip_fraction) << ","
            << fmt(psnr(clean_preview.pixels, noisy_preview.pixels)) << "\n";
}

// ---------------------------------------------------------------------------

struct QuantizeArgs {
  std::string input, out, csv;
  std::vector<int> bits{8, 10, 12, 14};
};

void cmd_quantize(const QuantizeArgs& a) {
  for (int b : a.bits) {
    if (!is_supported_bit_depth(b)) {
      throw ConfigError("--bits: unsupported bit depth " + std::to_string(b) +
                        " (expected 8, 10, 12 or 14)");
    }
  }
  const RawRgbImage raw{read_tnsr(a.input), 14, 0.0};
  std::ostringstream csv;
  csv << "bits,psnr_db\n";
  for (int b : a.bits) {
    const RawRgbImage q = quantize(raw, b);
    const double p = psnr(q.pixels, raw.pixels);
    if (std::isnan(p)) throw InvariantViolation("PSNR at " + std::to_string(b) + " bits is NaN");
    csv << b << "," << fmt(p) << "\n";
    if (!a.out.empty()) write_raw(a.out + "_b" + std::to_string(b), q, IspParams{});
  }
  save_text(a.csv, csv.str());
}

// ---------------------------------------------------------------------------

struct AwdDemoArgs {
  std::string input, noisy, config, out;
  std::optional<std::uint64_t> seed;
};

struct AwdDemoConfig {
  SweepConfig sweep;
  double noise_sigma = 60.0 / 255.0;
  std::uint64_t seed = 0;
};

AwdDemoConfig parse_awd_demo(const Json& j) {
  StrictObject o(j, "awd_demo");
  AwdDemoConfig c;
  c.seed = o.get("seed", c.seed);
  c.noise_sigma = o.get("noise_sigma", c.noise_sigma);
  c.sweep.probe_width = o.get("probe_width", c.sweep.probe_width);
  c.sweep.reduction = o.get("reduction", c.sweep.reduction);
  c.sweep.gaussian_sigma = o.get("gaussian_sigma", c.sweep.gaussian_sigma);
  c.sweep.bilateral_sigma_r = o.get("bilateral_sigma_r", c.sweep.bilateral_sigma_r);
  c.sweep.logit_scale = o.get("logit_scale", c.sweep.logit_scale);
  o.finish();
  if (!(c.noise_sigma >= 0.0)) throw ConfigError("awd_demo.noise_sigma must be >= 0");
  if (c.sweep.probe_width == 0 || c.sweep.reduction == 0) {
    throw ConfigError("awd_demo: probe_width and reduction must be positive");
  }
  if (!(c.sweep.gaussian_sigma > 0.0) || !(c.sweep.bilateral_sigma_r > 0.0)) {
    throw ConfigError("awd_demo: filter sigmas must be positive");
  }
  return c;
}

void check_weight_law(const AwdWeights& w) {
  const std::size_t taps = w.w.dim(3);
  const std::size_t n = w.w.size() / taps;
  for (std::size_t s = 0; s < n; ++s) {
    double sum = 0.0;
    for (std::size_t m = 0; m < taps; ++m) {
      const double v = w.w[s * taps + m];
      if (!(v > 0.0)) throw InvariantViolation("AWD weight not positive");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvariantViolation("AWD kernel does not sum to 1");
  }
}

void cmd_awd_demo(const AwdDemoArgs& a) {
  AwdDemoConfig cfg = a.config.empty() ? AwdDemoConfig{} : parse_awd_demo(load_json(a.config));
  if (a.seed) cfg.seed = *a.seed;
  const Tensor clean = load_feature_map(a.input);
  Tensor noisy;
  if (!a.noisy.empty()) {
    noisy = load_feature_map(a.noisy);
    clean.require_same_shape(noisy, "awd-demo noisy input");
  } else {
    noisy = clean;
    Rng rng(cfg.seed, 0x6e6f697379ULL);
    for (double& v : noisy.values()) v += rng.normal(0.0, cfg.noise_sigma);
  }

  const std::size_t c = clean.dim(0);
  Rng rng(cfg.seed, 0x64656d6fULL);
  const std::size_t r = c % cfg.sweep.reduction == 0 ? cfg.sweep.reduction : 1;
  const AwdParams awd = AwdParams::init(c, 3, r, rng, cfg.sweep.logit_scale);
  const AwdForward fwd = awd_forward(clean, awd);
  check_weight_law(fwd.weights);
  write_tnsr(a.out + "_awd.tnsr", fwd.y);
  write_png_gray(a.out + "_weight_std.png", weight_std_map(fwd.weights), max_weight_std(9));

  const ProbeNet probe = ProbeNet::random(c, cfg.sweep.probe_width, cfg.seed);
  const auto filters = make_filter_set(cfg.sweep.probe_width, cfg.sweep, cfg.seed);
  std::ostringstream csv;
  csv << "filter,kernel,disturbance\n";
  for (const SweepRow& row : disturbance_sweep(clean, noisy, probe, filters)) {
    require_finite(row.disturbance, row.filter + " disturbance");
    csv << row.filter << "," << row.kernel << "," << fmt(row.disturbance) << "\n";
  }
  save_text(a.out + ".csv", csv.str());
}

// ---------------------------------------------------------------------------

struct FoldCheckArgs {
  std::size_t n = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
  std::string out;
};

void cmd_fold_check(const FoldCheckArgs& a) {
  if (a.n == 0) throw ConfigError("--n must be positive");
  std::ostringstream csv;
  csv << "instance,c_in,c_out,size,max_divergence\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < a.n; ++i) {
    Rng rng(a.seed, i);
    const std::size_t c1 = 1 + rng.below(8), c2 = 1 + rng.below(8), s = 1 + rng.below(16);
    ScbParams p = ScbParams::init(c1, c2, rng, rng.below(2) ? SmoothInit::gaussian : SmoothInit::mean);
    for (double& v : p.sconv_logits.values()) v += rng.normal();
    Tensor x(Shape{c1, s, s});
    for (double& v : x.values()) v = rng.normal();
    const double d = max_abs_diff(scb_forward_train(x, p).y, scb_forward_infer(x, fold(p)));
    require_finite(d, "fold divergence");
    worst = std::max(worst, d);
    csv << i << "," << c1 << "," << c2 << "," << s << "," << fmt(d) << "\n";
  }
  save_text(a.out, csv.str());
  std::cout << "max_divergence," << fmt(worst) << "\n";
  if (worst > a.tolerance) {
    throw InvariantViolation("fold divergence " + fmt(worst) + " exceeds " + fmt(a.tolerance));
  }
}

// ---------------------------------------------------------------------------

struct TrainToyArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void cmd_train_toy(const TrainToyArgs& a) {
  TrainToyConfig cfg = a.config.empty() ? TrainToyConfig{} : parse_train_toy(load_json(a.config));
  if (a.seed) cfg.dsl.seed = *a.seed;
  TrainResult result;
  try {
    result = run_train_toy(cfg, [&](const EpochMetrics& m) {
      if (!a.quiet) {
        std::cerr << "epoch " << m.epoch << " loss " << m.loss << " clean_acc " << m.clean_acc
                  << " noisy_acc " << m.noisy_acc << " disturbance " << m.mean_disturbance << "\n";
      }
    });
  } catch (const NumericError& e) {
    throw InvariantViolation(e.what());
  }
  for (const auto& m : result.metrics) require_finite(m.mean_disturbance, "held-out disturbance");
  save_text(a.out, result.csv);
}

// ---------------------------------------------------------------------------

struct DisturbanceArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

struct DisturbanceConfig {
  std::size_t seeds = 20;
  std::size_t image_size = 32;
  std::size_t kernel = 3;
  std::uint64_t seed = 0;
  SweepConfig sweep;
  IspParams isp;
  NoiseParams noise = TrainToyConfig::default_noise();
};

DisturbanceConfig parse_disturbance(const Json& j) {
  StrictObject o(j, "disturbance");
  DisturbanceConfig c;
  c.seeds = o.get("seeds", c.seeds);
  c.image_size = o.get("image_size", c.image_size);
  c.kernel = o.get("kernel", c.kernel);
  c.seed = o.get("seed", c.seed);
  c.sweep.probe_width = o.get("probe_width", c.sweep.probe_width);
  c.sweep.reduction = o.get("reduction", c.sweep.reduction);
  c.sweep.gaussian_sigma = o.get("gaussian_sigma", c.sweep.gaussian_sigma);
  c.sweep.bilateral_sigma_r = o.get("bilateral_sigma_r", c.sweep.bilateral_sigma_r);
  c.sweep.logit_scale = o.get("logit_scale", c.sweep.logit_scale);
  if (const Json* isp = o.child("isp")) c.isp = parse_isp(*isp, "disturbance.isp");
  if (const Json* noise = o.child("noise")) c.noise = parse_noise(*noise, "disturbance.noise");
  o.finish();
  if (c.seeds == 0) throw ConfigError("disturbance.seeds must be positive");
  if (c.image_size < 8) throw ConfigError("disturbance.image_size must be >= 8");
  if (c.kernel < 2 || c.kernel > 5) throw ConfigError("disturbance.kernel must be in [2, 5]");
  if (c.sweep.probe_width == 0 || c.sweep.reduction == 0) {
    throw ConfigError("disturbance: probe_width and reduction must be positive");
  }
  return c;
}

void cmd_disturbance(const DisturbanceArgs& a) {
  DisturbanceConfig cfg =
      a.config.empty() ? DisturbanceConfig{} : parse_disturbance(load_json(a.config));
  if (a.seed) cfg.seed = *a.seed;
  cfg.sweep.kernels = {cfg.kernel};
  std::ostringstream csv;
  csv << "trial,filter,kernel,disturbance\n";
  std::map<std::string, double> total;
  std::size_t mean_below_strided = 0;
  for (std::size_t t = 0; t < cfg.seeds; ++t) {
    const std::uint64_t s = derive_seed(cfg.seed, t);
    Rng rng(s, 0x696d67ULL);
    const SrgbImage img = render_shape(static_cast<ShapeKind>(t % 4), cfg.image_size, rng);
    NoiseParams noise = cfg.noise;
    noise.seed = s;
    const LowLightPair pair = synthesize_lowlight(img, cfg.isp, noise, t);
    const ProbeNet probe = ProbeNet::random(3, cfg.sweep.probe_width, s);
    const auto rows = disturbance_sweep(pair.clean.pixels, pair.noisy.pixels, probe,
                                        make_filter_set(cfg.sweep.probe_width, cfg.sweep, s));
    double strided = 0.0, mean = 0.0;
    for (const auto& row : rows) {
      require_finite(row.disturbance, row.filter + " disturbance");
      csv << t << "," << row.filter << "," << row.kernel << "," << fmt(row.disturbance) << "\n";
      total[row.filter] += row.disturbance;
      if (row.filter == "strided") strided = row.disturbance;
      if (row.filter == "mean") mean = row.disturbance;
    }
    if (mean < strided) ++mean_below_strided;
  }
  save_text(a.out, csv.str());
  std::cout << "filter,mean_disturbance\n";
  for (const auto& [name, sum] : total) {
    std::cout << name << "," << fmt(sum / static_cast<double>(cfg.seeds)) << "\n";
  }
  std::cout << "mean_below_strided," << mean_below_strided << "/" << cfg.seeds << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-light RAW synthesis, noise-robust downsampling and toy DSL training"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Unprocess an sRGB PNG and synthesize a low-light noisy RAW pair");
  s->add_option("--input", synth.input, "sRGB PNG")->required();
  s->add_option("--isp", synth.isp, "ISP parameters (JSON)");
  s->add_option("--noise", synth.noise, "Noise parameters (JSON)");
  s->add_option("--out", synth.out, "Output prefix: <out>_{clean,noisy}.{tnsr,json,png}")->required();
  s->add_option("--seed", synth.seed, "Overrides the noise seed");
  s->add_option("--image-id", synth.image_id, "Noise stream id for this image");

  QuantizeArgs quant;
  auto* q = app.add_subcommand("quantize", "PSNR of a RAW tensor re-quantized to several bit depths");
  q->add_option("--input", quant.input, "RAW TNSR (3 x H x W, values in [0, 1])")->required();
  q->add_option("--bits", quant.bits, "Bit depths from {8, 10, 12, 14}")->delimiter(',');
  q->add_option("--csv", quant.csv, "Output CSV: bits,psnr_db (inf when lossless)")->required();
  q->add_option("--out", quant.out, "Optional prefix for quantized <out>_b<bits>.{tnsr,json}");

  AwdDemoArgs demo;
  auto* d = app.add_subcommand("awd-demo", "Downsampler sweep and AWD weight dispersion on one feature map");
  d->add_option("--input", demo.input, "Clean feature map (TNSR) or image (PNG)")->required();
  d->add_option("--noisy", demo.noisy, "Noisy counterpart; default adds seeded Gaussian noise");
  d->add_option("--config", demo.config, "Demo parameters (JSON)");
  d->add_option("--out", demo.out, "Output prefix: <out>_awd.tnsr, <out>_weight_std.png, <out>.csv")->required();
  d->add_option("--seed", demo.seed, "Overrides the config seed");

  FoldCheckArgs fc;
  auto* f = app.add_subcommand("fold-check", "Train-path vs folded-path divergence over random SCB instances");
  f->add_option("--n", fc.n, "Number of random instances")->check(CLI::PositiveNumber)->capture_default_str();
  f->add_option("--seed", fc.seed, "Instance seed")->capture_default_str();
  f->add_option("--tolerance", fc.tolerance, "Exit 4 above this divergence")->check(CLI::NonNegativeNumber)->capture_default_str();
  f->add_option("--out", fc.out, "Output CSV")->required();

  TrainToyArgs tt;
  auto* t = app.add_subcommand("train-toy", "Paired clean/noisy training of the toy network on synthetic shapes");
  t->add_option("--config", tt.config, "Training configuration (JSON)");
  t->add_option("--out", tt.out, "Metrics CSV: epoch,clean_acc,noisy_acc,mean_disturbance,loss")->required();
  t->add_option("--seed", tt.seed, "Overrides the config seed");
  t->add_flag("--quiet", tt.quiet, "No per-epoch progress on stderr");

  DisturbanceArgs da;
  auto* x = app.add_subcommand("disturbance", "Filter sweep disturbance on a random probe network over many trials");
  x->add_option("--config", da.config, "Sweep configuration (JSON)");
  x->add_option("--out", da.out, "Per-trial CSV: trial,filter,kernel,disturbance")->required();
  x->add_option("--seed", da.seed, "Overrides the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*s) cmd_synth(synth);
    if (*q) cmd_quantize(quant);
    if (*d) cmd_awd_demo(demo);
    if (*f) cmd_fold_check(fc);
    if (*t) cmd_train_toy(tt);
    if (*x) cmd_disturbance(da);
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    // Inputs that load but cannot be used (wrong shape, out-of-range values).
    std::cerr << "input error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
