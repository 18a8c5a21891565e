#ifndef LOWLIGHT_CONFIG_HPP
#define LOWLIGHT_CONFIG_HPP

// Strict JSON configs and RAW sidecars. Unknown keys are rejected with the
// offending key named; missing keys take the documented defaults.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "lowlight/dsl.hpp"
#include "lowlight/isp.hpp"
#include "lowlight/noise.hpp"
#include "lowlight/tensor_io.hpp"

namespace lowlight {

using Json = nlohmann::json;

class StrictObject {
 public:
  StrictObject(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const Json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  /// Throws on the first key that was never requested.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline Json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void save_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path + "'");
}

inline IspParams parse_isp(const Json& j, const std::string& where = "isp") {
  StrictObject o(j, where);
  IspParams p;
  p.wb_gains = o.get("wb_gains", p.wb_gains);
  p.ccm = o.get("ccm", p.ccm);
  p.gamma = o.get("gamma", p.gamma);
  p.tone_curve = tone_curve_from_string(o.get<std::string>("tone_curve", to_string(p.tone_curve)));
  o.finish();
  try {
    validate(p);
  } catch (const ParameterError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

inline Json to_json(const IspParams& p) {
  return {{"wb_gains", p.wb_gains}, {"ccm", p.ccm}, {"gamma", p.gamma},
          {"tone_curve", to_string(p.tone_curve)}};
}

inline NoiseParams parse_noise(const Json& j, const std::string& where = "noise") {
  StrictObject o(j, where);
  NoiseParams p;
  p.system_gain_K = o.get("system_gain_K", p.system_gain_K);
  p.read_sigma = o.get("read_sigma", p.read_sigma);
  p.row_sigma = o.get("row_sigma", p.row_sigma);
  p.adc_bits = o.get("adc_bits", p.adc_bits);
  p.low_light_factor = o.get("low_light_factor", p.low_light_factor);
  p.seed = o.get("seed", p.seed);
  p.quantization_noise = o.get("quantization_noise", p.quantization_noise);
  const auto kind = o.get<std::string>("read_noise", "gaussian");
  if (kind != "gaussian") throw ConfigError(where + ".read_noise: unsupported '" + kind + "'");
  o.finish();
  try {
    validate(p);
  } catch (const ParameterError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

inline Json to_json(const NoiseParams& p) {
  return {{"system_gain_K", p.system_gain_K},
          {"read_sigma", p.read_sigma},
          {"row_sigma", p.row_sigma},
          {"adc_bits", p.adc_bits},
          {"low_light_factor", p.low_light_factor},
          {"seed", p.seed},
          {"quantization_noise", p.quantization_noise},
          {"read_noise", "gaussian"}};
}

/// Full train-toy configuration: loss/optimizer settings plus the synthetic dataset.
struct TrainToyConfig {
  DslConfig dsl;
  std::size_t num_train = 1000;
  std::size_t num_heldout = 200;
  std::size_t image_size = 32;
  std::size_t num_classes = 4;
  IspParams isp;
  NoiseParams noise = default_noise();

  static NoiseParams default_noise() {
    NoiseParams n;
    n.low_light_factor = 20.0;
    return n;
  }
};

inline TrainToyConfig parse_train_toy(const Json& j) {
  StrictObject o(j, "train_toy");
  TrainToyConfig c;
  c.dsl.alpha = o.get("alpha", c.dsl.alpha);
  c.dsl.beta = o.get("beta", c.dsl.beta);
  c.dsl.stage_ids = o.get("stage_ids", c.dsl.stage_ids);
  c.dsl.epochs = o.get("epochs", c.dsl.epochs);
  c.dsl.batch_size = o.get("batch_size", c.dsl.batch_size);
  c.dsl.learning_rate = o.get("learning_rate", c.dsl.learning_rate);
  c.dsl.seed = o.get("seed", c.dsl.seed);
  c.dsl.grad_clip = o.get("grad_clip", c.dsl.grad_clip);
  c.num_train = o.get("num_train", c.num_train);
  c.num_heldout = o.get("num_heldout", c.num_heldout);
  c.image_size = o.get("image_size", c.image_size);
  c.num_classes = o.get("num_classes", c.num_classes);
  if (const Json* isp = o.child("isp")) c.isp = parse_isp(*isp, "train_toy.isp");
  if (const Json* noise = o.child("noise")) c.noise = parse_noise(*noise, "train_toy.noise");
  o.finish();
  try {
    validate(c.dsl);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("train_toy: ") + e.what());
  }
  if (c.num_train == 0 || c.num_heldout == 0) throw ConfigError("train_toy: dataset sizes must be positive");
  if (c.image_size < 8) throw ConfigError("train_toy: image_size must be >= 8");
  if (c.num_classes < 2 || c.num_classes > 4) throw ConfigError("train_toy: num_classes must be in [2, 4]");
  return c;
}

/// Builds the train and held-out shapes sets from one seed and trains the toy net.
inline TrainResult run_train_toy(const TrainToyConfig& cfg,
                                 const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  ShapesDatasetConfig data{cfg.num_train, cfg.image_size, cfg.num_classes,
                           derive_seed(cfg.dsl.seed, 1), cfg.isp, cfg.noise};
  const PairBatch train = make_shapes_dataset(data);
  data.count = cfg.num_heldout;
  data.seed = derive_seed(cfg.dsl.seed, 2);
  const PairBatch heldout = make_shapes_dataset(data);
  return train_toy(train, heldout, cfg.dsl, cfg.num_classes, on_epoch);
}

// RAW sidecar: {bit_depth, wb_gains, ccm, gamma, tone_curve, clip_fraction[, noise]}

struct RawSidecar {
  int bit_depth = 14;
  IspParams isp;
  double clip_fraction = 0.0;
  std::optional<NoiseParams> noise;
};

inline std::string sidecar_json(const RawSidecar& s) {
  Json j = to_json(s.isp);
  j["bit_depth"] = s.bit_depth;
  j["clip_fraction"] = s.clip_fraction;
  if (s.noise) j["noise"] = to_json(*s.noise);
  return j.dump(2) + "\n";
}

inline RawSidecar parse_sidecar(const Json& j) {
  StrictObject o(j, "sidecar");
  RawSidecar s;
  s.bit_depth = o.get("bit_depth", s.bit_depth);
  s.clip_fraction = o.get("clip_fraction", s.clip_fraction);
  Json isp = Json::object();
  for (const char* k : {"wb_gains", "ccm", "gamma", "tone_curve"}) {
    if (const Json* v = o.child(k)) isp[k] = *v;
  }
  s.isp = parse_isp(isp, "sidecar");
  if (const Json* n = o.child("noise")) s.noise = parse_noise(*n, "sidecar.noise");
  o.finish();
  return s;
}

/// Writes `<prefix>.tnsr` and `<prefix>.json`.
inline void write_raw(const std::string& prefix, const RawRgbImage& raw, const IspParams& isp,
                      const std::optional<NoiseParams>& noise = std::nullopt) {
  write_tnsr(prefix + ".tnsr", raw.pixels);
  save_text(prefix + ".json", sidecar_json({raw.bit_depth, isp, raw.clip_fraction, noise}));
}

}  // namespace lowlight

#endif  // LOWLIGHT_CONFIG_HPP
