#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ois/common/mask.hpp"
#include "ois/model/model.hpp"
#include "ois/order/order_map.hpp"
#include "ois/prompts/clicks.hpp"

namespace ois {

// One target object: image, depth and its ground-truth mask.
struct EvalInstance {
  std::string id;
  Tensor image;  // [H x W x 3]
  DepthMap depth;
  BinaryMask gt;
};

// Anything that can be driven by the click protocol. SetImage is called once
// per instance and is where image encoding happens; Predict runs per click.
class InteractiveSegmenter {
 public:
  virtual ~InteractiveSegmenter() = default;
  virtual void SetImage(const EvalInstance& instance) = 0;
  virtual BinaryMask Predict(const ClickSet& clicks,
                             const BinaryMask* previous) = 0;
};

// Drives an OisModel, caching the image features between clicks.
class ModelSegmenter : public InteractiveSegmenter {
 public:
  explicit ModelSegmenter(const OisModel<float>& model) : model_(model) {}

  void SetImage(const EvalInstance& instance) override;
  BinaryMask Predict(const ClickSet& clicks,
                     const BinaryMask* previous) override;

 private:
  const OisModel<float>& model_;
  std::optional<FeatureMap<float>> features_;
  DepthMap depth_;
};

// Returns the ground truth regardless of clicks.
class OracleSegmenter : public InteractiveSegmenter {
 public:
  void SetImage(const EvalInstance& instance) override { gt_ = instance.gt; }
  BinaryMask Predict(const ClickSet&, const BinaryMask*) override { return gt_; }

 private:
  BinaryMask gt_;
};

// Always predicts an empty mask.
class EmptySegmenter : public InteractiveSegmenter {
 public:
  void SetImage(const EvalInstance& instance) override {
    empty_ = BinaryMask(instance.gt.width, instance.gt.height);
  }
  BinaryMask Predict(const ClickSet&, const BinaryMask*) override {
    return empty_;
  }

 private:
  BinaryMask empty_;
};

// |a & b| / |a | b|, 1 when both are empty.
double Iou(const BinaryMask& a, const BinaryMask& b);

inline constexpr int kMaxClicks = 20;

struct RoundRecord {
  Click click;
  double iou = 0.0;
  double ms = 0.0;  // prompt-side time for this click, encoding excluded
};

struct InteractionTrace {
  std::string instance_id;
  std::vector<RoundRecord> rounds;
  double encode_ms = 0.0;
  bool failed = false;
  std::string failure;
};

struct ProtocolOptions {
  int max_clicks = kMaxClicks;
  std::vector<double> thresholds = {0.90, 0.95};
};

// Sequential simulated-user loop: each round clicks the centre of the largest
// error region (round 0 treats the whole object as the error), predicts with
// the cached image, and stops once every threshold is met or the click budget
// is spent. Segmenter exceptions mark the trace failed.
InteractionTrace RunProtocol(InteractiveSegmenter& segmenter,
                             const EvalInstance& instance,
                             const ProtocolOptions& options = {});

struct MetricReport {
  double noc90 = 0.0;
  double noc95 = 0.0;
  double miou1 = 0.0;
  double miou5 = 0.0;
  int nof90 = 0;
  int nof95 = 0;
  double spc_ms = 0.0;
  double encode_ms = 0.0;
  std::optional<double> sat_latency_s;
  int click_cap = kMaxClicks;
  std::size_t instances = 0;
  std::vector<InteractionTrace> traces;
};

// Clicks needed to reach `threshold` (1-based), or `cap` if never reached.
int ClicksToReach(const InteractionTrace& trace, double threshold, int cap);

// IoU after exactly k clicks; traces that stopped earlier carry their last
// IoU forward, empty traces count as 0.
double IouAfter(const InteractionTrace& trace, int k);

// Throws ValidationError for an empty trace list.
MetricReport Aggregate(const std::vector<InteractionTrace>& traces,
                       int cap = kMaxClicks);

// Encode once, then one single-positive-click prediction per point of a
// grid x grid lattice. Returns total seconds.
double MeasureSatLatency(InteractiveSegmenter& segmenter,
                         const EvalInstance& instance, int grid = 16);

// Runs the protocol over every instance; `jobs` > 1 spreads instances over
// threads, each with its own segmenter from `make_segmenter`.
std::vector<InteractionTrace> RunProtocolAll(
    const std::function<std::unique_ptr<InteractiveSegmenter>()>& make_segmenter,
    const std::vector<EvalInstance>& instances,
    const ProtocolOptions& options = {}, int jobs = 1);

}  // namespace ois
