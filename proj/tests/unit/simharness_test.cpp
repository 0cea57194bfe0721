#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <queue>
#include <random>

#include "ois/scenegen/scene.hpp"
#include "ois/simharness/click_sim.hpp"
#include "ois/simharness/instances.hpp"
#include "ois/simharness/protocol.hpp"
#include "oracles.hpp"

namespace ois {
namespace {

using testing::BruteDistance;
using testing::BruteNextClick;
using testing::RandomMask;

BinaryMask Rect(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.set(x, y, true);
  }
  return m;
}

TEST(DistanceTest, MatchesBruteForceOnRandomMasks) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> dim(1, 32);
  for (int t = 0; t < 100; ++t) {
    const BinaryMask m = RandomMask(dim(rng), dim(rng), rng);
    const std::vector<double> d = SquaredDistanceToBoundary(m);
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        const double expected = m.at(x, y) ? BruteDistance(m, x, y) : 0.0;
        ASSERT_EQ(d[y * m.width + x], expected) << x << "," << y;
      }
    }
  }
}

TEST(NextClickTest, CentreOfSquare) {
  const BinaryMask gt = Rect(9, 9, 2, 2, 7, 7);
  const auto c = NextClick(BinaryMask(9, 9), gt, 0);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->x, 4);
  EXPECT_EQ(c->y, 4);
  EXPECT_EQ(c->polarity, Polarity::kPositive);
  EXPECT_EQ(SquaredDistanceToBoundary(gt)[4 * 9 + 4], 9.0);
}

TEST(NextClickTest, FalsePositivePixelGetsNegativeClick) {
  const BinaryMask gt = Rect(9, 9, 2, 2, 7, 7);
  BinaryMask pred = gt;
  pred.set(0, 8, true);
  const auto c = NextClick(pred, gt, 3);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->x, 0);
  EXPECT_EQ(c->y, 8);
  EXPECT_EQ(c->polarity, Polarity::kNegative);
  EXPECT_EQ(c->round, 3);
}

TEST(NextClickTest, TiesGoToSmallestRowMajorPixel) {
  // Two equal 3x3 error squares; the upper-left one wins, at its centre.
  const BinaryMask gt = Rect(10, 10, 0, 0, 10, 10);
  BinaryMask pred = gt;
  for (int y = 0; y < 3; ++y) {
    for (int x = 6; x < 9; ++x) pred.set(x, y, false);
    for (int x = 1; x < 4; ++x) pred.set(x, y + 6, false);
  }
  const auto c = NextClick(pred, gt);
  EXPECT_EQ(c->x, 7);
  EXPECT_EQ(c->y, 1);
  // A flat 1x4 strip: every pixel is at distance 1, take the leftmost.
  const auto s = NextClick(BinaryMask(6, 3), Rect(6, 3, 1, 1, 5, 2));
  EXPECT_EQ(s->x, 1);
  EXPECT_EQ(s->y, 1);
}

TEST(NextClickTest, PerfectPredictionGivesNoClick) {
  const BinaryMask gt = Rect(5, 5, 1, 1, 3, 3);
  EXPECT_FALSE(NextClick(gt, gt).has_value());
  EXPECT_THROW(NextClick(BinaryMask(4, 5), gt), DimensionError);
}

TEST(NextClickTest, AgreesWithBruteForceOn500RandomPairs) {
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<int> dim(1, 32);
  const auto start = std::chrono::steady_clock::now();
  int agree = 0;
  for (int t = 0; t < 500; ++t) {
    const int w = dim(rng), h = dim(rng);
    const BinaryMask gt = RandomMask(w, h, rng);
    const BinaryMask pred = RandomMask(w, h, rng);
    const auto a = NextClick(pred, gt);
    const auto b = BruteNextClick(pred, gt);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (!a) {
      ++agree;
      continue;
    }
    agree += a->x == b->x && a->y == b->y && a->polarity == b->polarity;
  }
  EXPECT_EQ(agree, 500);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count(),
            60.0);
}

TEST(ErrorRegionsTest, SplitsByTypeAndConnectivity) {
  BinaryMask gt(4, 1), pred(4, 1);
  gt.bits = {1, 1, 0, 0};
  pred.bits = {0, 0, 1, 0};
  const auto r = ErrorRegions(pred, gt);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].polarity, Polarity::kPositive);
  EXPECT_EQ(r[0].pixels, (std::vector<int>{0, 1}));
  EXPECT_EQ(r[1].polarity, Polarity::kNegative);
  // Diagonal neighbours are separate components.
  BinaryMask d(2, 2);
  d.bits = {1, 0, 0, 1};
  EXPECT_EQ(ErrorRegions(BinaryMask(2, 2), d).size(), 2u);
}

TEST(SampleTrainClickTest, FirstClickIsInteriorAndDeterministic) {
  const BinaryMask gt = Rect(20, 20, 3, 3, 15, 15);
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 50; ++i) {
    const auto ca = SampleTrainClick(gt, nullptr, 0, a);
    const auto cb = SampleTrainClick(gt, nullptr, 0, b);
    EXPECT_EQ(*ca, *cb);
    EXPECT_EQ(ca->polarity, Polarity::kPositive);
    EXPECT_GE(SquaredDistanceToBoundary(gt)[ca->y * 20 + ca->x], 4.0);
  }
}

TEST(SampleTrainClickTest, SinglePixelObjectGetsThatPixel) {
  const BinaryMask gt = Rect(9, 7, 4, 3, 5, 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto c = SampleTrainClick(gt, nullptr, 0, rng);
    ASSERT_TRUE(c.has_value());
    EXPECT_EQ(c->x, 4);
    EXPECT_EQ(c->y, 3);
    EXPECT_EQ(c->polarity, Polarity::kPositive);
  }
}

TEST(SampleTrainClickTest, LaterClicksLieInErrorRegion) {
  const BinaryMask gt = Rect(20, 20, 3, 3, 15, 15);
  const BinaryMask pred = Rect(20, 20, 6, 6, 18, 18);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto c = SampleTrainClick(gt, &pred, 2, rng);
    const bool fn = gt.at(c->x, c->y) && !pred.at(c->x, c->y);
    const bool fp = pred.at(c->x, c->y) && !gt.at(c->x, c->y);
    EXPECT_TRUE(c->polarity == Polarity::kPositive ? fn : fp);
  }
  EXPECT_THROW(SampleTrainClick(BinaryMask(4, 4), nullptr, 0, rng), DataError);
}

TEST(IouTest, Examples) {
  const BinaryMask a = Rect(4, 4, 0, 0, 2, 2);
  EXPECT_EQ(Iou(a, a), 1.0);
  EXPECT_EQ(Iou(a, Rect(4, 4, 2, 2, 4, 4)), 0.0);
  BinaryMask x(3, 1), y(3, 1);
  x.bits = {1, 1, 0};
  y.bits = {0, 1, 1};
  EXPECT_DOUBLE_EQ(Iou(x, y), 1.0 / 3.0);
  EXPECT_EQ(Iou(BinaryMask(2, 2), BinaryMask(2, 2)), 1.0);
}

InteractionTrace TraceOf(const std::vector<double>& ious) {
  InteractionTrace t;
  for (double v : ious) t.rounds.push_back({Click{}, v, 1.0});
  return t;
}

TEST(MetricTest, TraceExample) {
  const InteractionTrace t = TraceOf({0.5, 0.85, 0.92});
  EXPECT_EQ(ClicksToReach(t, 0.90, 20), 3);
  EXPECT_EQ(ClicksToReach(t, 0.95, 20), 20);
  const MetricReport r = Aggregate({t});
  EXPECT_EQ(r.noc90, 3.0);
  EXPECT_EQ(r.noc95, 20.0);
  EXPECT_EQ(r.nof90, 0);
  EXPECT_EQ(r.nof95, 1);
  EXPECT_EQ(r.miou1, 0.5);
  EXPECT_EQ(r.miou5, 0.92);
  EXPECT_EQ(r.click_cap, 20);
}

TEST(MetricTest, AggregateIsOrderInvariant) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 20);
  std::vector<InteractionTrace> traces;
  for (int i = 0; i < 30; ++i) {
    std::vector<double> ious(len(rng));
    for (double& v : ious) v = u(rng);
    traces.push_back(TraceOf(ious));
  }
  const MetricReport a = Aggregate(traces);
  std::shuffle(traces.begin(), traces.end(), rng);
  const MetricReport b = Aggregate(traces);
  EXPECT_NEAR(a.noc90, b.noc90, 1e-12);
  EXPECT_NEAR(a.miou5, b.miou5, 1e-12);
  EXPECT_EQ(a.nof95, b.nof95);
  EXPECT_THROW(Aggregate({}), ValidationError);
}

TEST(MetricTest, EmptyTraceCountsAsFailure) {
  const MetricReport r = Aggregate({InteractionTrace{}});
  EXPECT_EQ(r.noc90, 20.0);
  EXPECT_EQ(r.miou1, 0.0);
  EXPECT_EQ(r.nof90, 1);
}

EvalInstance SquareInstance() {
  EvalInstance inst;
  inst.id = "square";
  inst.image = Tensor({16, 16, 3});
  inst.depth = DepthMap::Flat(16, 16);
  inst.gt = Rect(16, 16, 4, 4, 12, 12);
  return inst;
}

TEST(ProtocolTest, OracleStopsAfterOneClick) {
  OracleSegmenter seg;
  const InteractionTrace t = RunProtocol(seg, SquareInstance());
  ASSERT_EQ(t.rounds.size(), 1u);
  EXPECT_EQ(t.rounds[0].iou, 1.0);
  EXPECT_GT(t.rounds[0].ms, 0.0);
  EXPECT_GT(t.encode_ms, 0.0);
  EXPECT_FALSE(t.failed);
}

TEST(ProtocolTest, EmptySegmenterSpendsTheBudget) {
  EmptySegmenter seg;
  const InteractionTrace t = RunProtocol(seg, SquareInstance());
  EXPECT_EQ(t.rounds.size(), 20u);
  for (std::size_t i = 0; i < t.rounds.size(); ++i) {
    EXPECT_EQ(t.rounds[i].click.round, static_cast<int>(i));
  }
  const MetricReport r = Aggregate({t});
  EXPECT_EQ(r.nof95, 1);
  EXPECT_EQ(r.noc90, 20.0);
}

class ThrowingSegmenter : public InteractiveSegmenter {
 public:
  void SetImage(const EvalInstance&) override {}
  BinaryMask Predict(const ClickSet&, const BinaryMask*) override {
    throw NumericError("boom");
  }
};

TEST(ProtocolTest, SegmenterFailureIsRecorded) {
  ThrowingSegmenter seg;
  const InteractionTrace t = RunProtocol(seg, SquareInstance());
  EXPECT_TRUE(t.failed);
  EXPECT_EQ(t.failure, "boom");
}

TEST(ProtocolTest, ModelSegmenterEncodesOncePerInstance) {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.encoder_heads = 2;
  cfg.ffn_hidden = 16;
  cfg.input_size = 16;
  const OisModel<float> model(cfg, 1);
  ModelSegmenter seg(model);
  const InteractionTrace t = RunProtocol(seg, SquareInstance());
  EXPECT_GT(t.rounds.size(), 1u);
  EXPECT_EQ(model.encode_calls(), 1);
}

TEST(ProtocolTest, ParallelRunMatchesSerial) {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.encoder_heads = 2;
  cfg.ffn_hidden = 16;
  DatasetManifest m;
  m.seed = 3;
  m.count = 8;
  const auto scenes = GenerateDataset(m);
  const auto instances = DatasetEvalInstances(scenes);
  const OisModel<float> model(cfg, 2);
  auto make = [&] { return std::make_unique<ModelSegmenter>(model); };
  const auto a = RunProtocolAll(make, instances, {}, 1);
  const auto b = RunProtocolAll(make, instances, {}, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].rounds.size(), b[i].rounds.size());
    for (std::size_t k = 0; k < a[i].rounds.size(); ++k) {
      EXPECT_EQ(a[i].rounds[k].click, b[i].rounds[k].click);
      EXPECT_EQ(a[i].rounds[k].iou, b[i].rounds[k].iou);
    }
  }
}

TEST(InstancesTest, OverlapScenesYieldBothPairMembers) {
  std::mt19937_64 rng(8);
  const Scene s = GenerateScene(rng, 64, SceneSplit::kOverlap);
  const auto inst = SceneEvalInstances(s, 0);
  ASSERT_EQ(inst.size(), 2u);
  EXPECT_EQ(inst[0].gt, s.masks[s.designated_pair->first]);
  EXPECT_EQ(inst[1].gt, s.masks[s.designated_pair->second]);
}

TEST(SatLatencyTest, RunsOneEncodeAndFullGrid) {
  class Counting : public OracleSegmenter {
   public:
    void SetImage(const EvalInstance& i) override {
      ++encodes;
      OracleSegmenter::SetImage(i);
    }
    BinaryMask Predict(const ClickSet& c, const BinaryMask* p) override {
      ++predicts;
      EXPECT_EQ(c.size(), 1u);
      return OracleSegmenter::Predict(c, p);
    }
    int encodes = 0, predicts = 0;
  } seg;
  EXPECT_GT(MeasureSatLatency(seg, SquareInstance()), 0.0);
  EXPECT_EQ(seg.encodes, 1);
  EXPECT_EQ(seg.predicts, 256);
}

}  // namespace
}  // namespace ois
