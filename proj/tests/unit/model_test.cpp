#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ois/model/checkpoint.hpp"
#include "ois/model/loss.hpp"
#include "ois/model/model.hpp"
#include "ois/model/trainer.hpp"
#include "ois/scenegen/scene.hpp"
#include "test_util.hpp"

namespace ois {
namespace {

using testing::CheckGradients;
using testing::Dot;
using testing::GradTarget;
using testing::RandomTensor;

ModelConfig TinyConfig() {
  ModelConfig c;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.encoder_blocks = 1;
  c.encoder_heads = 2;
  c.fusion_blocks = 2;
  c.ffn_hidden = 12;
  c.input_size = 16;
  c.decoder_dim = 4;
  c.click_radius = 2;
  return c;
}

Tensor RandomImage(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor img({size, size, 3});
  for (float& v : img.values()) v = u(rng);
  return img;
}

DepthMap RandomDepth(std::size_t size, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> layer(1, 4);
  DepthMap d = DepthMap::Flat(static_cast<int>(size), static_cast<int>(size));
  for (float& v : d.values.values()) v = static_cast<float>(layer(rng));
  return d;
}

Tensor RandomTarget(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::bernoulli_distribution b(0.4);
  Tensor t({h, w});
  for (float& v : t.values()) v = b(rng) ? 1.0f : 0.0f;
  return t;
}

// Targets over every model parameter, read after a backward pass.
std::vector<GradTarget> ModelTargets(OisModel<double>& model) {
  std::vector<GradTarget> targets;
  model.VisitParameters([&](const std::string& name, Parameter<double>& p) {
    targets.push_back({name, &p.value, p.grad});
  });
  return targets;
}

TEST(EncoderBlockTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  EncoderBlock<double> block(8, 2, 12, rng);
  Tensor64 x = RandomTensor({6, 8}, rng);
  const Tensor64 r = RandomTensor({6, 8}, rng, 0.1);
  EncoderBlockCache<double> cache;
  block.Forward(x, &cache);
  testing::ZeroModuleGrads(block);
  const Tensor64 gx = block.Backward(cache, r);
  std::vector<GradTarget> targets;
  testing::AddParameterTargets(block, targets);
  targets.push_back({"x", &x, gx});
  const auto res = CheckGradients(targets, [&] { return Dot(block.Forward(x), r); });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(EncoderTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const ModelConfig cfg = TinyConfig();
  ImageEncoder<double> enc(cfg, rng);
  Tensor64 input = RandomTensor({16, 16, 4}, rng);
  const Tensor64 r = RandomTensor({16, 8}, rng, 0.1);
  EncoderCache<double> cache;
  enc.Forward(input, &cache);
  testing::ZeroModuleGrads(enc);
  enc.Backward(cache, r);
  std::vector<GradTarget> targets;
  testing::AddParameterTargets(enc, targets);
  const auto res = CheckGradients(
      targets, [&] { return Dot(enc.Forward(input).values, r); }, 24);
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(EncoderTest, InputCentersColourAndScalesDepth) {
  Tensor img({8, 8, 3}, 0.75f);
  DepthMap d = DepthMap::Flat(8, 8, 2.0f);
  d.values.at(0, 0) = 4.0f;
  const Tensor x = EncoderInput(img, d);
  EXPECT_FLOAT_EQ(x.at(1, 1, 0), 0.25f);
  EXPECT_FLOAT_EQ(x.at(1, 1, 3), 0.5f);
  EXPECT_FLOAT_EQ(x.at(0, 0, 3), 1.0f);
}

TEST(DecoderTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const ModelConfig cfg = TinyConfig();
  MaskDecoder<double> dec(cfg, rng);
  Tensor64 f = RandomTensor({6, 8}, rng);
  Tensor64 s = RandomTensor({kNumSlots, 8}, rng);
  ClickSet clicks;
  clicks.Add({1, 1, Polarity::kPositive});
  clicks.Add({3, 2, Polarity::kPositive});
  clicks.Add({0, 0, Polarity::kNegative});
  const SlotOccupancy occ = OccupancyOf(clicks);
  const Tensor64 r = RandomTensor({10, 14}, rng);
  DecoderCache<double> cache;
  dec.Forward(f, 2, 3, s, occ, 10, 14, &cache);
  testing::ZeroModuleGrads(dec);
  const auto g = dec.Backward(cache, r);
  std::vector<GradTarget> targets;
  testing::AddParameterTargets(dec, targets);
  targets.push_back({"features", &f, g.features});
  targets.push_back({"sparse", &s, g.sparse});
  const auto res = CheckGradients(
      targets, [&] { return Dot(dec.Forward(f, 2, 3, s, occ, 10, 14), r); });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(DecoderTest, LogitsMatchOutputSize) {
  std::mt19937_64 rng(14);
  MaskDecoder<float> dec(TinyConfig(), rng);
  const Tensor f = testing::RandomTensorF({16, 8}, rng);
  const Tensor s = testing::RandomTensorF({kNumSlots, 8}, rng);
  const Tensor out = dec.Forward(f, 4, 4, s, OccupancyOf(ClickSet{}), 16, 16);
  EXPECT_EQ(out.shape(), (Shape{16, 16}));
}

TEST(FusionTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  std::vector<FusionBlock<double>> blocks;
  blocks.emplace_back(8, 12, rng);
  blocks.emplace_back(8, 12, rng);
  Tensor64 f = RandomTensor({6, 8}, rng);
  Tensor64 d = RandomTensor({6, 8}, rng);
  Tensor64 s = RandomTensor({kNumSlots, 8}, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor64 stack({kNumSlots, 6});
  for (double& v : stack.values()) v = u(rng);
  BinaryMask prev(3, 2);
  prev.set(0, 0, true);
  prev.set(2, 1, true);
  const ObjectMaskStack obj = BuildObjectStack(PreviousMask{prev.ToTensor(), 1});
  const Tensor64 r1 = RandomTensor({kNumSlots, 8}, rng);
  const Tensor64 r2 = RandomTensor({6, 8}, rng);
  auto loss = [&] {
    const auto out = Fuse(blocks, f, &d, s, stack, &obj);
    return Dot(out.sparse, r1) + Dot(out.features, r2);
  };
  FuseCache<double> cache;
  Fuse(blocks, f, &d, s, stack, &obj, &cache);
  for (auto& b : blocks) testing::ZeroModuleGrads(b);
  // Walk the blocks backwards by hand: F_fused = F + D feeds every block.
  Tensor64 g_s = r1;
  Tensor64 g_f = r2;
  for (std::size_t i = blocks.size(); i-- > 0;) {
    g_s = blocks[i].Backward(cache.blocks[i], g_s, g_f);
  }
  std::vector<GradTarget> targets;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    testing::AddParameterTargets(blocks[i], targets,
                                 "block" + std::to_string(i) + ".");
  }
  targets.push_back({"sparse", &s, g_s});
  targets.push_back({"features", &f, g_f});
  targets.push_back({"dense", &d, g_f});
  const auto res = CheckGradients(targets, loss, 32);
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(FusionTest, ZeroValueProjectionsReduceToNorms) {
  std::mt19937_64 rng(16);
  FusionBlock<double> block(8, 12, rng);
  block.order.attention.wv.value.Fill(0.0);
  block.object.attention.wv.value.Fill(0.0);
  block.ffn_w2.value.Fill(0.0);
  const Tensor64 f = RandomTensor({6, 8}, rng);
  const Tensor64 s = RandomTensor({kNumSlots, 8}, rng);
  const Tensor64 stack({kNumSlots, 6});
  const Tensor64 out = block.Forward(s, f, stack, nullptr);
  const Tensor64 ones({8}, 1.0), zeros({8});
  const Tensor64 expected = numerics::LayerNorm(
      numerics::LayerNorm(numerics::LayerNorm(s, ones, zeros), ones, zeros),
      ones, zeros);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out[i], expected[i], 1e-9);
  }
}

double NflOracle(const Tensor64& logits, const Tensor& target, double gamma) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    const double pt = target[i] > 0.5f ? p : 1.0 - p;
    const double w = std::pow(1.0 - pt, gamma);
    num += w * -std::log(pt);
    den += w;
  }
  return num / (den + 1e-8);
}

TEST(LossTest, MatchesScalarOracle) {
  std::mt19937_64 rng(17);
  const Tensor64 x = RandomTensor({4, 4}, rng, 2.0);
  const Tensor t = RandomTarget(4, 4, rng);
  const auto l = NormalizedFocalLoss(x, t, LossConfig{});
  EXPECT_NEAR(l.value, NflOracle(x, t, 2.0), 1e-6);
}

TEST(LossTest, GammaZeroIsMeanCrossEntropy) {
  std::mt19937_64 rng(18);
  const Tensor64 x = RandomTensor({5, 3}, rng, 2.0);
  const Tensor t = RandomTarget(5, 3, rng);
  double bce = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-x[i]));
    bce -= t[i] > 0.5f ? std::log(p) : std::log(1.0 - p);
  }
  LossConfig cfg;
  cfg.gamma = 0.0;
  EXPECT_NEAR(NormalizedFocalLoss(x, t, cfg).value, bce / 15.0, 1e-8);
}

TEST(LossTest, InvariantToPixelPermutation) {
  std::mt19937_64 rng(19);
  const Tensor64 x = RandomTensor({1, 12}, rng, 2.0);
  const Tensor t = RandomTarget(1, 12, rng);
  std::vector<std::size_t> perm(12);
  for (std::size_t i = 0; i < 12; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor64 xp({1, 12});
  Tensor tp({1, 12});
  for (std::size_t i = 0; i < 12; ++i) {
    xp[i] = x[perm[i]];
    tp[i] = t[perm[i]];
  }
  EXPECT_NEAR(NormalizedFocalLoss(x, t, {}).value,
              NormalizedFocalLoss(xp, tp, {}).value, 1e-12);
}

TEST(LossTest, RejectsBadTargets) {
  const Tensor64 x({2, 2});
  Tensor t({2, 2});
  t[1] = 0.5f;
  EXPECT_THROW(NormalizedFocalLoss(x, t, {}), ValidationError);
  EXPECT_THROW(NormalizedFocalLoss(x, Tensor({2, 3}), {}), DimensionError);
}

TEST(LossTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(20);
  Tensor64 x = RandomTensor({4, 5}, rng, 2.0);
  const Tensor t = RandomTarget(4, 5, rng);
  std::vector<GradTarget> targets{
      {"logits", &x, NormalizedFocalLoss(x, t, {}).grad}};
  const auto res = CheckGradients(
      targets, [&] { return NormalizedFocalLoss(x, t, {}).value; });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

class ModelGradientTest : public ::testing::TestWithParam<AblationArm> {};

TEST_P(ModelGradientTest, EndToEndMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  ModelConfig cfg = TinyConfig();
  cfg.arm = GetParam();
  OisModel<double> model(cfg, 5);
  const Tensor image = RandomImage(16, rng);
  const DepthMap depth = RandomDepth(16, rng);
  const Tensor target = RandomTarget(16, 16, rng);
  ClickSet clicks;
  clicks.Add({5, 6, Polarity::kPositive, 0});
  clicks.Add({12, 3, Polarity::kNegative, 1});
  BinaryMask prev(16, 16);
  for (int y = 2; y < 10; ++y) {
    for (int x = 3; x < 9; ++x) prev.set(x, y, true);
  }
  auto loss = [&] {
    const auto f = model.EncodeImage(image, depth);
    return NormalizedFocalLoss(model.PredictLogits(f, clicks, depth, &prev),
                               target, {})
        .value;
  };
  EncoderCache<double> enc_cache;
  const auto f = model.EncodeImage(image, depth, &enc_cache);
  RoundCache<double> cache;
  const auto logits = model.PredictLogits(f, clicks, depth, &prev, &cache);
  model.ZeroGrad();
  const auto g = model.BackwardRound(
      cache, NormalizedFocalLoss(logits, target, {}).grad);
  model.BackwardEncoder(enc_cache, g);
  std::vector<GradTarget> targets = ModelTargets(model);
  const auto res = CheckGradients(targets, loss, 6);
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

INSTANTIATE_TEST_SUITE_P(Arms, ModelGradientTest,
                         ::testing::Values(AblationArm::kFull,
                                           AblationArm::kNoOrder,
                                           AblationArm::kNoSparse,
                                           AblationArm::kNoDense),
                         [](const auto& info) { return ArmName(info.param); });

TEST(ModelTest, EveryParameterReceivesGradient) {
  std::mt19937_64 rng(22);
  OisModel<double> model(TinyConfig(), 6);
  const Tensor image = RandomImage(16, rng);
  const DepthMap depth = RandomDepth(16, rng);
  ClickSet clicks;
  clicks.Add({5, 6, Polarity::kPositive, 0});
  clicks.Add({12, 3, Polarity::kNegative, 1});
  BinaryMask prev(16, 16);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) prev.set(x, y, true);
  }
  EncoderCache<double> enc_cache;
  const auto f = model.EncodeImage(image, depth, &enc_cache);
  RoundCache<double> cache;
  const auto logits = model.PredictLogits(f, clicks, depth, &prev, &cache);
  model.ZeroGrad();
  model.BackwardEncoder(
      enc_cache,
      model.BackwardRound(cache, NormalizedFocalLoss(logits, RandomTarget(16, 16, rng), {}).grad));
  // Negative and non-point slots never reach the mask embedding while a
  // positive click exists, so their embeddings are the only idle parameters.
  model.VisitParameters([](const std::string& name, Parameter<double>& p) {
    double norm = 0.0;
    for (double g : p.grad.values()) norm += g * g;
    if (name == "prompt.sparse.negative_type" ||
        name == "prompt.sparse.non_point") {
      EXPECT_EQ(norm, 0.0) << name;
    } else {
      EXPECT_GT(norm, 0.0) << name;
    }
  });
}

TEST(ModelTest, EncoderRunsOncePerImage) {
  std::mt19937_64 rng(23);
  const OisModel<float> model(TinyConfig(), 7);
  const Tensor image = RandomImage(16, rng);
  const DepthMap depth = RandomDepth(16, rng);
  const auto f = model.EncodeImage(image, depth);
  ClickSet clicks;
  for (int i = 0; i < 5; ++i) {
    clicks.Add({i, i, Polarity::kPositive, i});
    model.Predict(f, clicks, depth, nullptr);
  }
  EXPECT_EQ(model.encode_calls(), 1);
}

TEST(ModelTest, CastPreservesPredictions) {
  std::mt19937_64 rng(24);
  const OisModel<float> model(TinyConfig(), 8);
  const OisModel<double> wide = model.Cast<double>();
  const Tensor image = RandomImage(16, rng);
  const DepthMap depth = RandomDepth(16, rng);
  ClickSet clicks;
  clicks.Add({4, 4, Polarity::kPositive, 0});
  const Tensor a = model.PredictLogits(model.EncodeImage(image, depth), clicks, depth, nullptr);
  const Tensor64 b = wide.PredictLogits(wide.EncodeImage(image, depth), clicks, depth, nullptr);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-3);
}

TEST(ModelTest, NoSparseArmIgnoresOrderPenalty) {
  ModelConfig cfg = TinyConfig();
  cfg.arm = AblationArm::kNoOrder;
  EXPECT_FALSE(cfg.use_order());
  EXPECT_TRUE(cfg.use_object());
  cfg.arm = AblationArm::kNoSparse;
  EXPECT_FALSE(cfg.use_order());
  EXPECT_FALSE(cfg.use_object());
  EXPECT_TRUE(cfg.use_dense());
}

TEST(ConfigTest, RejectsInconsistentSizes) {
  ModelConfig cfg = TinyConfig();
  cfg.input_channels = 3;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg = TinyConfig();
  cfg.input_size = 18;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  EXPECT_THROW(ParseArm("no_such_arm"), ValidationError);
}

// Small scenes and a small model keep trainer tests fast.
class TrainerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    DatasetManifest m;
    m.seed = 4;
    m.count = 6;
    m.size = 32;
    scenes_ = GenerateDataset(m);
    config_ = TinyConfig();
    config_.patch_size = 8;
    config_.input_size = 32;
    train_.epochs = 2;
    train_.batch_size = 4;
  }

  std::vector<Scene> scenes_;
  ModelConfig config_;
  TrainConfig train_;
};

TEST_F(TrainerTest, OneStepChangesParameters) {
  OisModel<float> model(config_, 1);
  const auto before = ExportWeights(model);
  Trainer trainer(model, train_, 2);
  const StepReport r = trainer.TrainOneStep(scenes_);
  EXPECT_EQ(r.step, 1);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NE(ExportWeights(model), before);
}

TEST_F(TrainerTest, SigmaStepIsScaled) {
  // Adam's first step moves every coordinate with a nonzero gradient by about
  // the learning rate, so the scale shows up directly in the sigma update.
  train_.sigma_lr_scale = 30.0;
  OisModel<float> model(config_, 1);
  const auto before = ExportWeights(model);
  Trainer trainer(model, train_, 2);
  trainer.TrainOneStep(scenes_);
  const auto after = ExportWeights(model);
  const double lr = train_.learning_rate;
  int sigmas = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t k = 0; k < before[i].value.size(); ++k) {
      const double delta = std::abs(after[i].value[k] - before[i].value[k]);
      if (before[i].name.ends_with("sigma_raw")) {
        ++sigmas;
        EXPECT_NEAR(delta, 30.0 * lr, 0.05 * 30.0 * lr) << before[i].name;
      } else {
        EXPECT_LE(delta, 1.01 * lr) << before[i].name;
      }
    }
  }
  EXPECT_EQ(sigmas, config_.fusion_blocks);
  train_.sigma_lr_scale = 0.0;
  EXPECT_THROW(Trainer(model, train_, 2), ValidationError);
}

TEST_F(TrainerTest, SameSeedGivesIdenticalCheckpoints) {
  auto run = [&] {
    OisModel<float> model(config_, 1);
    Trainer trainer(model, train_, 2);
    trainer.Run(scenes_);
    return EncodeCheckpoint(trainer.MakeCheckpoint());
  };
  EXPECT_EQ(run(), run());
}

TEST_F(TrainerTest, ResumeMatchesUninterruptedRun) {
  OisModel<float> full(config_, 1);
  Trainer a(full, train_, 2);
  a.Run(scenes_);

  TrainConfig half = train_;
  half.epochs = 1;
  OisModel<float> first(config_, 1);
  Trainer b(first, half, 2);
  b.Run(scenes_);
  const Checkpoint mid = DecodeCheckpoint(EncodeCheckpoint(b.MakeCheckpoint()));
  EXPECT_EQ(mid.epochs_done, 1);

  OisModel<float> second(config_, 99);
  Trainer c(second, train_, 0);
  c.Resume(mid);
  c.Run(scenes_);
  EXPECT_EQ(c.step(), a.step());
  EXPECT_EQ(c.epoch_losses(), a.epoch_losses());
  EXPECT_EQ(ExportWeights(second), ExportWeights(full));
}

TEST_F(TrainerTest, ResumeRejectsOtherConfig) {
  OisModel<float> model(config_, 1);
  Trainer trainer(model, train_, 2);
  const Checkpoint ckpt = trainer.MakeCheckpoint();
  ModelConfig other = config_;
  other.arm = AblationArm::kNoOrder;
  OisModel<float> model2(other, 1);
  Trainer t2(model2, train_, 2);
  EXPECT_THROW(t2.Resume(ckpt), ConfigError);
}

TEST_F(TrainerTest, NonFiniteWeightsRaiseTrainingError) {
  OisModel<float> model(config_, 1);
  model.decoder.mlp_b2.value[0] = std::nanf("");
  Trainer trainer(model, train_, 2);
  try {
    trainer.TrainOneStep(scenes_);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(CheckpointTest, RoundTripIsExact) {
  OisModel<float> model(TinyConfig(), 3);
  Checkpoint c;
  c.model = model.config();
  c.seed = 9;
  c.step = 17;
  c.epochs_done = 2;
  c.epoch_losses = {0.5, 0.25};
  c.weights = ExportWeights(model);
  const std::string bytes = EncodeCheckpoint(c);
  const Checkpoint d = DecodeCheckpoint(bytes);
  EXPECT_EQ(d.model, c.model);
  EXPECT_EQ(d.step, 17);
  EXPECT_EQ(d.epoch_losses, c.epoch_losses);
  EXPECT_EQ(d.weights, c.weights);
  EXPECT_EQ(EncodeCheckpoint(d), bytes);
  OisModel<float> rebuilt = ModelFromCheckpoint(d);
  EXPECT_EQ(ExportWeights(rebuilt), c.weights);
}

TEST(CheckpointTest, CorruptionIsDetected) {
  OisModel<float> model(TinyConfig(), 3);
  Checkpoint c;
  c.model = model.config();
  c.weights = ExportWeights(model);
  const std::string bytes = EncodeCheckpoint(c);
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  EXPECT_THROW(DecodeCheckpoint(flipped), DataError);
  EXPECT_THROW(DecodeCheckpoint(bytes.substr(0, bytes.size() - 9)), DataError);
  EXPECT_THROW(DecodeCheckpoint("NOTACKPT" + bytes.substr(8)), DataError);
}

TEST(CheckpointTest, MismatchedWeightsRejected) {
  OisModel<float> model(TinyConfig(), 3);
  auto weights = ExportWeights(model);
  weights.front().value = Tensor({1});
  EXPECT_THROW(ImportWeights(model, weights), ConfigError);
}

}  // namespace
}  // namespace ois
