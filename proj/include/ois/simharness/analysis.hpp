#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ois/model/model.hpp"
#include "ois/scenegen/scene.hpp"
#include "ois/simharness/protocol.hpp"

namespace ois {

// Re-encodes the image on every click; the reference point for the
// encode-once design.
class ReencodingSegmenter : public InteractiveSegmenter {
 public:
  explicit ReencodingSegmenter(const OisModel<float>& model) : model_(model) {}
  void SetImage(const EvalInstance& instance) override;
  BinaryMask Predict(const ClickSet& clicks, const BinaryMask* previous) override;

 private:
  const OisModel<float>& model_;
  Tensor image_;
  DepthMap depth_;
};

struct BenchRow {
  std::string name;
  double spc_ms = 0.0;
  double encode_ms = 0.0;
  double sat_s = 0.0;
  double encoder_calls_per_session = 0.0;
  double noc90 = 0.0;
  double miou5 = 0.0;
};

struct BenchReport {
  std::size_t instances = 0;
  int grid = 16;
  std::vector<BenchRow> rows;  // encode-once first, then re-encode
};

// Runs the click protocol and a SAT grid pass with both segmenters. Single
// threaded so encoder counters and timings are per session.
BenchReport RunBench(const OisModel<float>& model,
                     const std::vector<EvalInstance>& instances, int grid = 16);
std::string FormatBench(const BenchReport& report);
nlohmann::json BenchToJson(const BenchReport& report);

// Fraction of a positive slot's first-block order-attention mass that falls
// on pixels sharing the clicked pixel's depth, with or without the order
// penalty. Feature cells count by the share of their pixels on that layer.
double LayerAttentionShare(const OisModel<float>& model,
                           const FeatureMap<float>& features,
                           const ClickSet& clicks, const DepthMap& depth,
                           bool apply_order);

struct FocusResult {
  double before = 0.0;  // mean share without the order penalty
  double after = 0.0;   // mean share with it
  std::size_t scenes = 0;
  std::size_t samples = 0;
};

// For every scene with a designated pair, clicks each pair member at the
// protocol's first click and averages LayerAttentionShare.
FocusResult MeasureAttentionFocus(const OisModel<float>& model,
                                  const std::vector<Scene>& scenes,
                                  std::size_t max_scenes);

}  // namespace ois
