// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Trained checkpoints are cached under $OIS_ACCEPTANCE_CACHE (default: the
// build tree) keyed by everything that determines them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ois/io/png.hpp"
#include "ois/model/checkpoint.hpp"
#include "ois/model/decoder.hpp"
#include "ois/model/encoder.hpp"
#include "ois/model/loss.hpp"
#include "ois/model/model.hpp"
#include "ois/model/trainer.hpp"
#include "ois/numerics/ops.hpp"
#include "ois/objectness/object_attention.hpp"
#include "ois/order/order_attention.hpp"
#include "ois/order/order_map.hpp"
#include "ois/scenegen/scene.hpp"
#include "ois/simharness/ablation.hpp"
#include "ois/simharness/analysis.hpp"
#include "ois/simharness/click_sim.hpp"
#include "ois/simharness/instances.hpp"
#include "ois/simharness/protocol.hpp"
#include "ois/simharness/report_io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#ifndef OIS_DEFAULT_CACHE
#define OIS_DEFAULT_CACHE "acceptance_cache"
#endif

namespace ois {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using testing::CheckGradients;
using testing::Dot;
using testing::GradCheckResult;
using testing::GradTarget;
using testing::RandomTensor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, double a, double b = 0.0, double c = 0.0,
                double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path CacheDir() {
  const char* env = std::getenv("OIS_ACCEPTANCE_CACHE");
  return env != nullptr ? fs::path(env) : fs::path(OIS_DEFAULT_CACHE);
}

// ---------------------------------------------------------------- gradients

ModelConfig TinyConfig() {
  ModelConfig c;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.encoder_blocks = 1;
  c.encoder_heads = 2;
  c.fusion_blocks = 2;
  c.ffn_hidden = 12;
  c.input_size = 8;
  c.decoder_dim = 4;
  c.click_radius = 2;
  return c;
}

Tensor RandomTarget(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::bernoulli_distribution b(0.4);
  Tensor t({h, w});
  for (float& v : t.values()) v = b(rng) ? 1.0f : 0.0f;
  return t;
}

struct GradCase {
  std::string name;
  GradCheckResult result;
};

GradCase CheckOrderAttention() {
  constexpr std::size_t kC = 8, kHw = 6;
  std::mt19937_64 rng(101);
  OrderAttention<double> attn(kC, rng);
  attn.sigma_raw.value[0] = 0.7;
  Tensor64 s = RandomTensor({kNumSlots, kC}, rng);
  Tensor64 f = RandomTensor({kHw, kC}, rng);
  Tensor64 stack = RandomTensor({kNumSlots, kHw}, rng);
  for (double& v : stack.values()) v = std::abs(v) / 3.0;
  const Tensor64 r = RandomTensor({kNumSlots, kC}, rng);
  OrderAttentionCache<double> cache;
  attn.Forward(s, f, stack, &cache);
  testing::ZeroModuleGrads(attn);
  const auto g = attn.Backward(cache, r);
  std::vector<GradTarget> targets = {{"S", &s, g.sparse}, {"F", &f, g.features}};
  testing::AddParameterTargets(attn, targets);
  return {"order_attention",
          CheckGradients(targets, [&] { return Dot(attn.Forward(s, f, stack), r); },
                         1000)};
}

GradCase CheckObjectAttention() {
  constexpr std::size_t kC = 8, kHw = 6;
  std::mt19937_64 rng(102);
  ObjectAttention<double> attn(kC, rng);
  Tensor64 s = RandomTensor({kNumSlots, kC}, rng);
  Tensor64 f = RandomTensor({kHw, kC}, rng);
  const ObjectMaskStack st =
      BuildObjectStack(PreviousMask{Tensor({2, 3}, {1, 0, 1, 1, 0, 0}), 1});
  GradCheckResult worst;
  for (const ObjectMaskStack* stack :
       {static_cast<const ObjectMaskStack*>(nullptr), &st}) {
    const Tensor64 r = RandomTensor({kNumSlots, kC}, rng);
    ObjectAttentionCache<double> cache;
    attn.Forward(s, f, stack, &cache);
    testing::ZeroModuleGrads(attn);
    const auto g = attn.Backward(cache, r);
    std::vector<GradTarget> targets = {{"S", &s, g.sparse}, {"F", &f, g.features}};
    testing::AddParameterTargets(attn, targets);
    const auto res = CheckGradients(
        targets, [&] { return Dot(attn.Forward(s, f, stack), r); }, 1000);
    worst.checked += res.checked;
    if (res.max_rel_error >= worst.max_rel_error) {
      worst.max_rel_error = res.max_rel_error;
      worst.worst = res.worst;
    }
  }
  return {"object_attention", worst};
}

GradCase CheckEncoderBlock() {
  std::mt19937_64 rng(103);
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
  return {"encoder_block",
          CheckGradients(targets, [&] { return Dot(block.Forward(x), r); }, 1000)};
}

GradCase CheckDecoder() {
  std::mt19937_64 rng(104);
  MaskDecoder<double> dec(TinyConfig(), rng);
  Tensor64 f = RandomTensor({6, 8}, rng);
  Tensor64 s = RandomTensor({kNumSlots, 8}, rng);
  ClickSet clicks;
  clicks.Add({1, 1, Polarity::kPositive});
  clicks.Add({3, 2, Polarity::kPositive});
  clicks.Add({0, 0, Polarity::kNegative});
  const SlotOccupancy occ = OccupancyOf(clicks);
  const Tensor64 r = RandomTensor({8, 8}, rng);
  DecoderCache<double> cache;
  dec.Forward(f, 2, 3, s, occ, 8, 8, &cache);
  testing::ZeroModuleGrads(dec);
  const auto g = dec.Backward(cache, r);
  std::vector<GradTarget> targets;
  testing::AddParameterTargets(dec, targets);
  targets.push_back({"features", &f, g.features});
  targets.push_back({"sparse", &s, g.sparse});
  return {"decoder",
          CheckGradients(targets, [&] { return Dot(dec.Forward(f, 2, 3, s, occ, 8, 8), r); },
                         1000)};
}

GradCase CheckLoss() {
  std::mt19937_64 rng(105);
  Tensor64 x = RandomTensor({8, 8}, rng, 2.0);
  const Tensor t = RandomTarget(8, 8, rng);
  std::vector<GradTarget> targets{{"logits", &x, NormalizedFocalLoss(x, t, {}).grad}};
  return {"nfl_loss",
          CheckGradients(targets, [&] { return NormalizedFocalLoss(x, t, {}).value; },
                         1000)};
}

GradCase CheckEndToEnd(AblationArm arm) {
  std::mt19937_64 rng(106);
  ModelConfig cfg = TinyConfig();
  cfg.arm = arm;
  OisModel<double> model(cfg, 7);
  Tensor image({8, 8, 3});
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : image.values()) v = u(rng);
  DepthMap depth = DepthMap::Flat(8, 8);
  for (float& v : depth.values.values()) v = 1.0f + 4.0f * u(rng);
  const Tensor target = RandomTarget(8, 8, rng);
  ClickSet clicks;
  clicks.Add({2, 3, Polarity::kPositive, 0});
  clicks.Add({6, 1, Polarity::kNegative, 1});
  BinaryMask prev(8, 8);
  for (int y = 1; y < 5; ++y) {
    for (int x = 1; x < 5; ++x) prev.set(x, y, true);
  }
  EncoderCache<double> enc_cache;
  const auto f = model.EncodeImage(image, depth, &enc_cache);
  RoundCache<double> cache;
  const auto logits = model.PredictLogits(f, clicks, depth, &prev, &cache);
  model.ZeroGrad();
  const auto g =
      model.BackwardRound(cache, NormalizedFocalLoss(logits, target, {}).grad);
  model.BackwardEncoder(enc_cache, g);
  std::vector<GradTarget> targets;
  model.VisitParameters([&](const std::string& name, Parameter<double>& p) {
    targets.push_back({name, &p.value, p.grad});
  });
  auto loss = [&] {
    const auto feats = model.EncodeImage(image, depth);
    return NormalizedFocalLoss(model.PredictLogits(feats, clicks, depth, &prev),
                               target, {})
        .value;
  };
  return {std::string("model_") + ArmName(arm), CheckGradients(targets, loss, 16)};
}

Outcome GradientSuite() {
  const auto start = Clock::now();
  std::vector<GradCase> cases = {CheckOrderAttention(), CheckObjectAttention(),
                                 CheckEncoderBlock(), CheckDecoder(), CheckLoss()};
  for (AblationArm arm : {AblationArm::kFull, AblationArm::kNoOrder,
                          AblationArm::kNoObject, AblationArm::kNoSparse,
                          AblationArm::kNoDense}) {
    cases.push_back(CheckEndToEnd(arm));
  }
  const double seconds = SecondsSince(start);
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (const GradCase& c : cases) {
    checked += c.result.checked;
    if (c.result.max_rel_error >= worst) {
      worst = c.result.max_rel_error;
      where = c.name + " " + c.result.worst;
    }
  }
  Outcome o;
  o.pass = worst < 1e-4 && seconds < 120.0;
  o.detail = Fmt("%.0f coordinates over ", static_cast<double>(checked)) +
             std::to_string(cases.size()) + " ops, max rel error " +
             Fmt("%.2e", worst) + " (" + where + "), " + Fmt("%.1f s", seconds);
  return o;
}

// --------------------------------------------------------------- reductions

Outcome Reductions() {
  constexpr std::size_t kC = 8, kHw = 6;
  std::mt19937_64 rng(201);
  double worst = 0.0;
  auto track = [&](const Tensor64& a, const Tensor64& b, std::size_t rows) {
    for (std::size_t s = 0; s < rows; ++s) {
      for (std::size_t c = 0; c < kC; ++c) {
        worst = std::max(worst, std::abs(a.at(s, c) - b.at(s, c)));
      }
    }
  };
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor64 s = RandomTensor({kNumSlots, kC}, rng);
    const Tensor64 f = RandomTensor({kHw, kC}, rng);
    Tensor64 stack = RandomTensor({kNumSlots, kHw}, rng);
    for (double& v : stack.values()) v = std::abs(v);

    OrderAttention<double> order(kC, rng);
    order.set_order_enabled(false);
    const Tensor64 plain_order = numerics::LayerNorm(
        order.attention.Forward(s, f, Tensor64({kNumSlots, kHw})),
        order.norm_gain.value, order.norm_bias.value);
    track(order.Forward(s, f, stack), plain_order, kNumSlots);

    ObjectAttention<double> object(kC, rng);
    const Tensor64 plain_object = numerics::LayerNorm(
        object.attention.Forward(s, f, Tensor64({kNumSlots, kHw})),
        object.norm_gain.value, object.norm_bias.value);
    track(object.Forward(s, f, nullptr), plain_object, kNumSlots);
    const ObjectMaskStack all_fg =
        BuildObjectStack(PreviousMask{Tensor({2, 3}, 1.0f), 1});
    track(object.Forward(s, f, &all_fg), plain_object, kSlotsPerPolarity);
  }
  return {worst <= 1e-6, Fmt("sigma=0, round-0 and all-foreground limits over 20 "
                             "draws, max abs diff %.2e",
                             worst)};
}

// ---------------------------------------------------------------- order map

bool SameMap(const OrderMap& m, const std::vector<double>& raw) {
  double mx = 0.0;
  for (double v : raw) mx = std::max(mx, v);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float expected =
        mx < 1e-8 ? 0.0f : static_cast<float>(std::min(1.0, raw[i] / mx));
    if (m.values[i] != expected) return false;
  }
  return true;
}

Outcome OrderMapOracle() {
  std::mt19937_64 rng(301);
  int grids = 0, mismatches = 0;
  for (std::size_t h = 3; h <= 8; ++h) {
    for (std::size_t w = 3; w <= 8; ++w) {
      std::uniform_real_distribution<float> u(0.0f, 10.0f);
      DepthMap d = DepthMap::Flat(static_cast<int>(w), static_cast<int>(h));
      for (float& v : d.values.values()) v = u(rng);
      std::uniform_int_distribution<int> px(0, static_cast<int>(w) - 1);
      std::uniform_int_distribution<int> py(0, static_cast<int>(h) - 1);
      ClickSet clicks;
      const int npos = 1 + grids % 4;
      for (int i = 0; i < npos; ++i) clicks.Add({px(rng), py(rng), Polarity::kPositive});
      const Click neg{px(rng), py(rng), Polarity::kNegative};
      double ref = 0.0;
      for (const Click& c : clicks.positives()) ref += d.values.at(c.y, c.x);
      ref /= npos;
      std::vector<double> pos(h * w), negv(h * w);
      const double nref = d.values.at(neg.y, neg.x);
      for (std::size_t i = 0; i < h * w; ++i) {
        pos[i] = std::abs(static_cast<double>(d.values[i]) - ref);
        negv[i] = std::abs(static_cast<double>(d.values[i]) - nref);
      }
      mismatches += !SameMap(PositiveOrderMap(d, clicks), pos);
      mismatches += !SameMap(NegativeOrderMap(d, neg), negv);
      ++grids;
    }
  }
  // Hand grid: unit ramp clicked in the middle column.
  DepthMap ramp = DepthMap::Flat(3, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) ramp.values.at(y, x) = static_cast<float>(x);
  }
  ClickSet mid;
  mid.Add({1, 1, Polarity::kPositive});
  const bool ramp_ok = RawPositiveOrderMap(ramp, mid).vector() ==
                       std::vector<float>{1, 0, 1, 1, 0, 1, 1, 0, 1};

  const DepthMap flat = DepthMap::Flat(7, 5, 2.5f);
  bool zero_ok = true;
  const OrderMap flat_pos = PositiveOrderMap(flat, mid);
  const OrderMap flat_neg = NegativeOrderMap(flat, {4, 2, Polarity::kNegative});
  for (float v : flat_pos.values.values()) zero_ok &= v == 0.0f;
  for (float v : flat_neg.values.values()) zero_ok &= v == 0.0f;

  bool offset_ok = true;
  std::uniform_int_distribution<int> q(0, 40);
  for (int trial = 0; trial < 50; ++trial) {
    DepthMap a = DepthMap::Flat(6, 6), b = DepthMap::Flat(6, 6);
    for (std::size_t i = 0; i < 36; ++i) {
      a.values[i] = q(rng) * 0.25f;
      b.values[i] = a.values[i] + 9.0f;
    }
    ClickSet c;
    c.Add({1, 2, Polarity::kPositive});
    c.Add({4, 0, Polarity::kPositive});
    const Click n{5, 5, Polarity::kNegative};
    offset_ok &= PositiveOrderMap(a, c).values == PositiveOrderMap(b, c).values;
    offset_ok &= NegativeOrderMap(a, n).values == NegativeOrderMap(b, n).values;
  }
  Outcome o;
  o.pass = mismatches == 0 && ramp_ok && zero_ok && offset_ok;
  o.detail = std::to_string(2 * grids - mismatches) + "/" + std::to_string(2 * grids) +
             " maps exact on 3x3..8x8 grids; ramp " + (ramp_ok ? "ok" : "WRONG") +
             ", constant depth " + (zero_ok ? "zero" : "NONZERO") + ", offset " +
             (offset_ok ? "invariant" : "VARIES");
  return o;
}

// ------------------------------------------------------------ click oracle

Outcome ClickOracle() {
  std::mt19937_64 rng(401);
  std::uniform_int_distribution<int> dim(1, 32);
  const auto start = Clock::now();
  int agree = 0;
  for (int t = 0; t < 500; ++t) {
    const int w = dim(rng), h = dim(rng);
    const BinaryMask gt = testing::RandomMask(w, h, rng);
    const BinaryMask pred = testing::RandomMask(w, h, rng);
    const auto a = NextClick(pred, gt);
    const auto b = testing::BruteNextClick(pred, gt);
    if (a.has_value() != b.has_value()) continue;
    agree += !a || (a->x == b->x && a->y == b->y && a->polarity == b->polarity);
  }
  const double seconds = SecondsSince(start);
  return {agree == 500 && seconds < 60.0,
          std::to_string(agree) + "/500 random masks agree, " + Fmt("%.2f s", seconds)};
}

// ------------------------------------------------------------------ metrics

Outcome MetricOracle() {
  InteractionTrace t;
  for (double v : {0.5, 0.85, 0.92}) t.rounds.push_back({Click{}, v, 1.0});
  const int noc90 = ClicksToReach(t, 0.90, kMaxClicks);
  const int noc95 = ClicksToReach(t, 0.95, kMaxClicks);
  const MetricReport r = Aggregate({t});

  BinaryMask a(4, 1), b(4, 1), c(4, 1), d(4, 1);
  a.bits = {1, 1, 0, 0};
  b.bits = {0, 0, 1, 1};
  c.bits = {0, 1, 1, 0};
  d.bits = {1, 1, 0, 0};
  const double same = Iou(a, d), disjoint = Iou(a, b), third = Iou(a, c);
  const double empty = Iou(BinaryMask(4, 1), BinaryMask(4, 1));
  Outcome o;
  o.pass = noc90 == 3 && noc95 == 20 && r.nof95 == 1 && r.nof90 == 0 && same == 1.0 &&
           disjoint == 0.0 && third == 1.0 / 3.0 && empty == 1.0;
  o.detail = "NoC90=" + std::to_string(noc90) + " NoC95=" + std::to_string(noc95) +
             " NoF95=" + std::to_string(r.nof95) + "; iou " + Fmt("%.6f %.6f %.6f", same,
                                                                 disjoint, third);
  return o;
}

// ----------------------------------------------------------------- ablation

DatasetManifest TrainManifest() {
  DatasetManifest m;
  m.seed = 1;
  m.count = 2000;
  m.size = 64;
  return m;
}

DatasetManifest OverlapManifest(int count) {
  DatasetManifest m;
  m.seed = 2;
  m.count = count;
  m.size = 64;
  m.plain_ratio = 0.0;
  m.overlap_ratio = 1.0;
  m.same_depth_ratio = 0.0;
  return m;
}

constexpr int kAblationSeeds = 3;

fs::path ArmCheckpoint(const std::string& arm, int seed) {
  return CacheDir() / "checkpoints" / (arm + "_seed" + std::to_string(seed) + ".ckpt");
}

// Trains (or loads) seeds 0..seeds-1 of every arm; returns per-arm training
// seconds.
std::vector<double> PrepareArms(const std::vector<std::string>& arms, int seeds) {
  const DatasetManifest manifest = TrainManifest();
  std::vector<Scene> scenes;
  std::vector<double> seconds;
  for (const std::string& arm : arms) {
    ModelConfig mc;
    mc.arm = ParseArm(arm);
    mc.input_size = manifest.size;
    const TrainConfig tc;
    double total = 0.0;
    for (int s = 0; s < seeds; ++s) {
      const fs::path path = ArmCheckpoint(arm, s);
      const std::string key = TrainingKey(manifest, mc, tc, s);
      const fs::path key_path = fs::path(path).concat(".key");
      const bool cached = fs::exists(path) && fs::exists(key_path) &&
                          ReadFileBytes(key_path) == key + "\n";
      if (!cached && scenes.empty()) scenes = GenerateDataset(manifest);
      if (!cached) {
        std::cerr << "training " << arm << " seed " << s << "\n";
      }
      TrainOrLoad(path, key, scenes, mc, tc, s);
      total += RecordedTrainSeconds(path).value_or(NAN);
    }
    seconds.push_back(total);
  }
  return seconds;
}

Outcome Ablation() {
  const std::vector<std::string> arms = {"full", "no_order", "no_dense", "no_sparse"};
  const std::vector<double> seconds = PrepareArms(arms, kAblationSeeds);
  std::vector<AblationArmSpec> specs;
  for (const std::string& arm : arms) {
    AblationArmSpec spec{arm, {}};
    for (int s = 0; s < kAblationSeeds; ++s) spec.checkpoints.push_back(ArmCheckpoint(arm, s));
    specs.push_back(spec);
  }
  const std::vector<Scene> eval = GenerateDataset(OverlapManifest(200));
  const auto instances = DatasetEvalInstances(eval, SceneSplit::kOverlap);
  const auto rows = RunAblation(specs, instances);
  const std::string table = FormatAblationTable(
      "arms on the overlap split (" + std::to_string(instances.size()) + " instances)",
      rows);
  WriteFileBytes(CacheDir() / "ablation.md", table);
  WriteFileBytes(CacheDir() / "ablation.json", AblationToJson(rows).dump(2) + "\n");
  std::cout << table;

  const double full = rows[0].miou1;
  double largest = -1e9;
  std::string largest_arm;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (full - rows[i].miou1 > largest) {
      largest = full - rows[i].miou1;
      largest_arm = rows[i].arm;
    }
  }
  const double vs_order = 100.0 * (full - rows[1].miou1);
  double slowest = 0.0;
  bool timed = true;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (std::isnan(seconds[i])) timed = false;
    slowest = std::max(slowest, seconds[i]);
  }
  std::ostringstream detail;
  detail << "1-mIoU full " << Fmt("%.2f", 100.0 * full) << ", full - no_order "
         << Fmt("%+.2f", vs_order) << " pts (need >= 3), largest margin vs "
         << largest_arm << " " << Fmt("%+.2f", 100.0 * largest) << " pts; slowest arm "
         << (timed ? Fmt("%.0f s", slowest) : std::string("untimed"));
  Outcome o;
  o.pass = vs_order >= 3.0 && largest_arm == "no_sparse" && timed && slowest < 7200.0;
  o.detail = detail.str();
  return o;
}

// ---------------------------------------------------------- attention focus

Outcome AttentionFocus() {
  PrepareArms({"full"}, 1);
  const OisModel<float> model = ModelFromCheckpoint(LoadCheckpoint(ArmCheckpoint("full", 0)));
  const std::vector<Scene> scenes = GenerateDataset(OverlapManifest(50));
  const FocusResult r = MeasureAttentionFocus(model, scenes, 50);
  return {r.scenes == 50 && r.after >= 0.70 && r.before < 0.70,
          Fmt("clicked-layer share %.1f%% after order masking vs %.1f%% before",
              100.0 * r.after, 100.0 * r.before) +
              " over " + std::to_string(r.scenes) + " scenes"};
}

// --------------------------------------------------------------- encode-once

Outcome EncodeOnce() {
  PrepareArms({"full"}, 1);
  const OisModel<float> model = ModelFromCheckpoint(LoadCheckpoint(ArmCheckpoint("full", 0)));
  const std::vector<Scene> scenes = GenerateDataset(OverlapManifest(10));
  const auto instances = DatasetEvalInstances(scenes, SceneSplit::kOverlap);
  const BenchReport r = RunBench(model, instances, 16);
  const std::string table = FormatBench(r);
  WriteFileBytes(CacheDir() / "bench.md", table);
  WriteFileBytes(CacheDir() / "bench.json", BenchToJson(r).dump(2) + "\n");
  std::cout << table;
  const BenchRow& once = r.rows.at(0);
  const BenchRow& again = r.rows.at(1);
  Outcome o;
  o.pass = once.encoder_calls_per_session == 1.0 &&
           once.spc_ms < once.encode_ms + once.spc_ms && once.spc_ms < again.spc_ms &&
           table.find("SAT") != std::string::npos;
  o.detail = Fmt("encoder calls/session %.2f, SPC %.2f ms vs encode+click %.2f ms, "
                 "re-encode SPC %.2f ms",
                 once.encoder_calls_per_session, once.spc_ms,
                 once.encode_ms + once.spc_ms, again.spc_ms);
  return o;
}

// -------------------------------------------------------------- determinism

Outcome Determinism() {
  DatasetManifest m;
  m.seed = 11;
  m.count = 8;
  m.size = 32;
  const std::vector<Scene> scenes = GenerateDataset(m);
  ModelConfig mc;
  mc.embed_dim = 32;
  mc.encoder_blocks = 1;
  mc.fusion_blocks = 1;
  mc.ffn_hidden = 64;
  mc.input_size = 32;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  const std::string a = EncodeCheckpoint(TrainArm(scenes, mc, tc, 5));
  const std::string b = EncodeCheckpoint(TrainArm(scenes, mc, tc, 5));

  const OisModel<float> model = ModelFromCheckpoint(DecodeCheckpoint(a));
  const auto instances = DatasetEvalInstances(scenes);
  auto make = [&] { return std::make_unique<ModelSegmenter>(model); };
  const auto t1 = RunProtocolAll(make, instances, {}, 1);
  const auto t2 = RunProtocolAll(make, instances, {}, 3);
  const bool traces_same = TracesToJsonl(t1, false) == TracesToJsonl(t2, false);
  const bool reports_same =
      ReportToJson(Aggregate(t1), false).dump() == ReportToJson(Aggregate(t2), false).dump();
  const bool regen_same = GenerateDataset(m)[3].image == scenes[3].image;
  Outcome o;
  o.pass = a == b && traces_same && reports_same && regen_same;
  o.detail = std::string("checkpoints ") + (a == b ? "identical" : "DIFFER") + " (" +
             std::to_string(a.size()) + " bytes), traces " +
             (traces_same ? "identical" : "DIFFER") + ", reports " +
             (reports_same ? "identical" : "DIFFER") + ", scenes " +
             (regen_same ? "identical" : "DIFFER");
  return o;
}

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace ois

int main(int argc, char** argv) {
  using ois::Criterion;
  const std::vector<Criterion> criteria = {
      {"gradient_suite", ois::GradientSuite},
      {"reductions", ois::Reductions},
      {"order_map_oracle", ois::OrderMapOracle},
      {"click_simulator_oracle", ois::ClickOracle},
      {"metric_oracle", ois::MetricOracle},
      {"determinism", ois::Determinism},
      {"toy_ablation", ois::Ablation},
      {"attention_focus", ois::AttentionFocus},
      {"encode_once", ois::EncodeOnce},
  };
  // Optional arguments select criteria by name.
  std::vector<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) {
      continue;
    }
    ois::Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << "\n"
              << std::flush;
  }
  return failures == 0 ? 0 : 1;
}
