#include <gtest/gtest.h>

#include "lowlight/config.hpp"
#include "lowlight/dsl.hpp"
#include "test_support.hpp"

using namespace lowlight;
using namespace lowlight::testing;

namespace {

PairBatch tiny_pairs(std::size_t n, std::size_t size, std::uint64_t seed, double factor = 20.0) {
  ShapesDatasetConfig cfg;
  cfg.count = n;
  cfg.image_size = size;
  cfg.seed = seed;
  cfg.noise.low_light_factor = factor;
  return make_shapes_dataset(cfg);
}

ToyNet perturbed_net(const ToyNet& net, std::size_t which, const Tensor& value) {
  ToyNet copy = net;
  *copy.parameters()[which] = value;
  return copy;
}

}  // namespace

TEST(Disturbance, Examples) {
  const Tensor a(Shape{2}, std::vector<double>{1, 2}), b(Shape{2}, std::vector<double>{1, 3});
  EXPECT_EQ(disturbance(std::vector<Tensor>{a}, std::vector<Tensor>{a}), 0.0);
  EXPECT_EQ(disturbance(std::vector<Tensor>{a}, std::vector<Tensor>{b}), 1.0);
  const Tensor c(Shape{1}, 0.0), d(Shape{1}, 2.0);
  EXPECT_EQ(disturbance(std::vector<Tensor>{a, c}, std::vector<Tensor>{b, d}), 5.0);
  EXPECT_EQ(disturbance(std::vector<Tensor>{b, d}, std::vector<Tensor>{a, c}), 5.0);
  EXPECT_THROW(disturbance(std::vector<Tensor>{a}, std::vector<Tensor>{c}), DimensionError);
  EXPECT_THROW(disturbance(std::vector<Tensor>{a}, std::vector<Tensor>{a, a}), DimensionError);
}

TEST(Shapes, DatasetIsDeterministicAndBalanced) {
  const PairBatch a = tiny_pairs(12, 16, 5), b = tiny_pairs(12, 16, 5), c = tiny_pairs(12, 16, 6);
  EXPECT_TRUE(a.clean == b.clean);
  EXPECT_TRUE(a.noisy == b.noisy);
  EXPECT_FALSE(a.noisy == c.noisy);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(a.labels[i], i % 4);
  EXPECT_FALSE(a.clean == a.noisy);
  for (double v : a.noisy.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(DslLoss, CleanEqualsNoisyReducesToScaledCrossEntropy) {
  PairBatch batch = tiny_pairs(3, 8, 1);
  batch.noisy = batch.clean;
  const ToyNet net = ToyNet::init(4, 2);
  DslConfig cfg;
  cfg.alpha = 0.7;
  const DslLoss l = dsl_loss(net, batch, cfg);
  EXPECT_EQ(l.disturbance, 0.0);
  double ce = 0.0;
  for (std::size_t b = 0; b < 3; ++b) ce += cross_entropy(toy_forward(net, batch.clean_at(b)).logits, batch.labels[b]).loss;
  EXPECT_NEAR(l.loss, (1.0 + cfg.alpha) * ce / 3.0, 1e-12);
}

TEST(DslLoss, BetaZeroIsPairedSupervision) {
  const PairBatch batch = tiny_pairs(3, 8, 2);
  const ToyNet net = ToyNet::init(4, 3);
  DslConfig cfg;
  cfg.beta = 0.0;
  const DslLoss l = dsl_loss(net, batch, cfg);
  double want = 0.0;
  for (std::size_t b = 0; b < 3; ++b) {
    want += cross_entropy(toy_forward(net, batch.clean_at(b)).logits, batch.labels[b]).loss;
    want += cross_entropy(toy_forward(net, batch.noisy_at(b)).logits, batch.labels[b]).loss;
  }
  EXPECT_NEAR(l.loss, want / 3.0, 1e-12);
  EXPECT_GT(l.disturbance, 0.0);
}

TEST(DslLoss, LabelOutOfRange) {
  PairBatch batch = tiny_pairs(2, 8, 3);
  batch.labels[1] = 4;
  EXPECT_THROW(dsl_loss(ToyNet::init(4, 0), batch, DslConfig{}), DataError);
}

TEST(DslLoss, ConfigValidation) {
  DslConfig cfg;
  cfg.stage_ids = {2};
  EXPECT_THROW(validate(cfg), ParameterError);
  cfg = DslConfig{};
  cfg.beta = -1.0;
  EXPECT_THROW(validate(cfg), ParameterError);
  cfg = DslConfig{};
  cfg.stage_ids.clear();
  EXPECT_THROW(validate(cfg), ParameterError);
}

TEST(Gradients, DslCompositeLossMatchesFiniteDifferences) {
  std::uint64_t seed = 0;
  for (int instance = 0; instance < 3; ++instance, ++seed) {
    PairBatch batch;
    ToyNet net;
    for (;; ++seed) {
      batch = tiny_pairs(2, 8, 40 + seed);
      net = ToyNet::init(4, seed);
      net.fit_input_normalization(batch.clean);
      if (relu_margin(net, batch) >= kReluMargin) break;
    }
    DslConfig cfg;
    cfg.alpha = 0.8;
    cfg.beta = 0.05;
    const DslLoss l = dsl_loss(net, batch, cfg);
    ToyNet grads = l.grads;
    const auto params = net.parameters();
    const auto analytic = grads.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Tensor numeric = numeric_grad(
          [&](const Tensor& v) { return dsl_loss_value(perturbed_net(net, k, v), batch, cfg); }, *params[k]);
      EXPECT_LT(rel_err(*analytic[k], numeric), 1e-3) << "seed " << seed << " tensor " << k;
    }
  }
}

TEST(DslLoss, ForwardOnlyValueMatches) {
  const PairBatch batch = tiny_pairs(3, 8, 41);
  ToyNet net = ToyNet::init(4, 2);
  net.fit_input_normalization(batch.clean);
  DslConfig cfg;
  cfg.alpha = 0.7;
  cfg.beta = 0.2;
  EXPECT_NEAR(dsl_loss_value(net, batch, cfg), dsl_loss(net, batch, cfg).loss, 1e-12);
}

TEST(Gradients, DisturbanceTermReachesBothPaths) {
  const PairBatch batch = tiny_pairs(2, 8, 9);
  ToyNet net = ToyNet::init(4, 1);
  net.fit_input_normalization(batch.clean);
  DslConfig only_d;
  only_d.alpha = 0.0;
  only_d.beta = 1.0;
  DslConfig none = only_d;
  none.beta = 0.0;
  ToyNet gd = dsl_loss(net, batch, only_d).grads, g0 = dsl_loss(net, batch, none).grads;
  // The first SCB sees both inputs; its gradient differs once the disturbance term is on.
  EXPECT_GT(max_abs_diff(gd.scb1.w3.tensor(), g0.scb1.w3.tensor()), 0.0);
  // Input gradient of the disturbance w.r.t. the noisy image is nonzero.
  ToyForward fn = toy_forward(net, batch.noisy_at(0));
  ToyForward fc = toy_forward(net, batch.clean_at(0));
  std::array<Tensor, ToyNet::kStages> d;
  for (std::size_t s = 0; s < ToyNet::kStages; ++s) d[s] = 2.0 * (fn.stages[s] - fc.stages[s]);
  ToyNet sink = net.zeros_like();
  Tensor dx;
  toy_backward(net, fn, Tensor(Shape{4}), d, sink, &dx);
  EXPECT_GT(sum_squares(dx), 0.0);
}

TEST(Training, ZeroEpochsGivesHeaderOnly) {
  const PairBatch data = tiny_pairs(4, 8, 10);
  DslConfig cfg;
  cfg.epochs = 0;
  const TrainResult r = train_toy(data, data, cfg);
  EXPECT_EQ(r.csv, std::string(kMetricsHeader) + "\n");
  EXPECT_TRUE(r.metrics.empty());
}

TEST(Training, DeterministicUnderSeed) {
  const PairBatch train = tiny_pairs(16, 8, 11), held = tiny_pairs(8, 8, 12);
  DslConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 3;
  const TrainResult a = train_toy(train, held, cfg), b = train_toy(train, held, cfg);
  EXPECT_EQ(a.csv, b.csv);
  cfg.seed = 4;
  EXPECT_NE(train_toy(train, held, cfg).csv, a.csv);
}

TEST(Training, EmptyInputsRejected) {
  const PairBatch data = tiny_pairs(4, 8, 10);
  const PairBatch empty{Tensor(Shape{1, 3, 8, 8}), Tensor(Shape{1, 3, 8, 8}), {}};
  EXPECT_THROW(train_toy(empty, data, DslConfig{}), DataError);
  EXPECT_THROW(eval_disturbance(ToyNet::init(4, 0), empty), DataError);
}

TEST(EvalDisturbance, CleanStreamAndSinglePair) {
  PairBatch data = tiny_pairs(3, 8, 13);
  const ToyNet net = ToyNet::init(4, 5);
  PairBatch same = data;
  same.noisy = same.clean;
  EXPECT_EQ(eval_disturbance(net, same), 0.0);
  PairBatch one{PairBatch::slice(data.clean, 0).reshaped({1, 3, 8, 8}),
                PairBatch::slice(data.noisy, 0).reshaped({1, 3, 8, 8}), {data.labels[0]}};
  EXPECT_DOUBLE_EQ(eval_disturbance(net, one),
                   disturbance(toy_features(net, data.clean_at(0)), toy_features(net, data.noisy_at(0))));
}

TEST(EvalDisturbance, DslTermLowersHeldOutDisturbance) {
  const PairBatch train = tiny_pairs(64, 16, 20), held = tiny_pairs(32, 16, 21);
  DslConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 1;
  cfg.beta = 0.1;
  const TrainResult with = train_toy(train, held, cfg);
  cfg.beta = 0.0;
  const TrainResult without = train_toy(train, held, cfg);
  EXPECT_LT(eval_disturbance(with.net, held), eval_disturbance(without.net, held));
}

// ---------------------------------------------------------------------------

TEST(Config, StrictParsingNamesUnknownKey) {
  try {
    parse_train_toy(Json::parse(R"({"epochs": 2, "learning_rat": 0.1})"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rat"), std::string::npos);
  }
  EXPECT_THROW(parse_noise(Json::parse(R"({"K": 1})")), ConfigError);
  EXPECT_THROW(parse_isp(Json::parse(R"({"gamma": "x"})")), ConfigError);
  EXPECT_THROW(parse_isp(Json::parse(R"({"wb_gains": [1, 0, 1]})")), ConfigError);
  EXPECT_THROW(parse_train_toy(Json::parse(R"({"noise": {"bogus": 1}})")), ConfigError);
  EXPECT_THROW(parse_train_toy(Json::parse(R"([1, 2])")), ConfigError);
}

TEST(Config, TrainToyValues) {
  const TrainToyConfig c = parse_train_toy(Json::parse(
      R"({"beta": 0.0, "epochs": 3, "seed": 9, "stage_ids": [1], "noise": {"low_light_factor": 10}})"));
  EXPECT_EQ(c.dsl.beta, 0.0);
  EXPECT_EQ(c.dsl.alpha, 1.0);
  EXPECT_EQ(c.dsl.epochs, 3u);
  EXPECT_EQ(c.dsl.seed, 9u);
  EXPECT_EQ(c.dsl.stage_ids, std::vector<std::size_t>{1});
  EXPECT_EQ(c.noise.low_light_factor, 10.0);
  EXPECT_EQ(c.num_train, 1000u);
}

TEST(Config, SidecarRoundTrip) {
  RawSidecar s;
  s.bit_depth = 12;
  s.clip_fraction = 0.125;
  s.isp.tone_curve = ToneCurve::smoothstep;
  NoiseParams n;
  n.seed = 123456789012345ULL;
  s.noise = n;
  const RawSidecar back = parse_sidecar(Json::parse(sidecar_json(s)));
  EXPECT_EQ(back.bit_depth, 12);
  EXPECT_EQ(back.clip_fraction, 0.125);
  EXPECT_EQ(back.isp.tone_curve, ToneCurve::smoothstep);
  EXPECT_EQ(back.isp.wb_gains, s.isp.wb_gains);
  ASSERT_TRUE(back.noise.has_value());
  EXPECT_EQ(back.noise->seed, n.seed);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_json("/nonexistent/cfg.json"), IoError);
}
