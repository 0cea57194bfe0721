#include "ois/simharness/analysis.hpp"

#include <cstdio>

#include "ois/simharness/click_sim.hpp"

namespace ois {

void ReencodingSegmenter::SetImage(const EvalInstance& instance) {
  image_ = instance.image;
  depth_ = instance.depth;
}

BinaryMask ReencodingSegmenter::Predict(const ClickSet& clicks,
                                        const BinaryMask* previous) {
  const FeatureMap<float> features = model_.EncodeImage(image_, depth_);
  return model_.Predict(features, clicks, depth_, previous);
}

namespace {

BenchRow BenchOne(const std::string& name, const OisModel<float>& model,
                  InteractiveSegmenter& seg,
                  const std::vector<EvalInstance>& instances, int grid) {
  const std::int64_t calls_before = model.encode_calls();
  std::vector<InteractionTrace> traces;
  for (const EvalInstance& inst : instances) traces.push_back(RunProtocol(seg, inst));
  const std::int64_t calls = model.encode_calls() - calls_before;
  const MetricReport r = Aggregate(traces);
  BenchRow row;
  row.name = name;
  row.spc_ms = r.spc_ms;
  row.encode_ms = r.encode_ms;
  row.noc90 = r.noc90;
  row.miou5 = r.miou5;
  row.encoder_calls_per_session =
      static_cast<double>(calls) / static_cast<double>(instances.size());
  row.sat_s = MeasureSatLatency(seg, instances.front(), grid);
  return row;
}

}  // namespace

BenchReport RunBench(const OisModel<float>& model,
                     const std::vector<EvalInstance>& instances, int grid) {
  if (instances.empty()) throw ValidationError("bench: no instances");
  BenchReport report;
  report.instances = instances.size();
  report.grid = grid;
  ModelSegmenter once(model);
  ReencodingSegmenter every(model);
  report.rows.push_back(BenchOne("encode once", model, once, instances, grid));
  report.rows.push_back(BenchOne("re-encode per click", model, every, instances, grid));
  return report;
}

std::string FormatBench(const BenchReport& report) {
  std::string out = "# Efficiency and accuracy\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "# instances=%zu, SAT grid=%dx%d, NoC counts failures as %d\n",
                report.instances, report.grid, report.grid, kMaxClicks);
  out += buf;
  out += "| pipeline | SPC (ms) | encode (ms) | SAT latency (s) | "
         "encoder calls/session | NoC90 | 5-mIoU |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (const BenchRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf),
                  "| %s | %.2f | %.2f | %.3f | %.2f | %.2f | %.2f |\n",
                  r.name.c_str(), r.spc_ms, r.encode_ms, r.sat_s,
                  r.encoder_calls_per_session, r.noc90, 100.0 * r.miou5);
    out += buf;
  }
  return out;
}

nlohmann::json BenchToJson(const BenchReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const BenchRow& r : report.rows) {
    rows.push_back({{"pipeline", r.name},
                    {"spc_ms", r.spc_ms},
                    {"encode_ms", r.encode_ms},
                    {"sat_latency_s", r.sat_s},
                    {"encoder_calls_per_session", r.encoder_calls_per_session},
                    {"noc90", r.noc90},
                    {"miou5", r.miou5}});
  }
  return {{"instances", report.instances}, {"grid", report.grid}, {"rows", rows}};
}

double LayerAttentionShare(const OisModel<float>& model,
                           const FeatureMap<float>& features,
                           const ClickSet& clicks, const DepthMap& depth,
                           bool apply_order) {
  if (clicks.positives().empty()) {
    throw PromptError("attention share needs a positive click");
  }
  const Click& c = clicks.positives().front();
  const float layer = depth.at(c.x, c.y);
  const Tensor weights =
      model.FirstBlockOrderWeights(features, clicks, depth, apply_order);
  const std::size_t h = features.height, w = features.width;
  const int cell_h = features.image_height / static_cast<int>(h);
  const int cell_w = features.image_width / static_cast<int>(w);
  double share = 0.0;
  for (std::size_t cy = 0; cy < h; ++cy) {
    for (std::size_t cx = 0; cx < w; ++cx) {
      int on = 0;
      for (int y = 0; y < cell_h; ++y) {
        for (int x = 0; x < cell_w; ++x) {
          on += depth.at(static_cast<int>(cx) * cell_w + x,
                         static_cast<int>(cy) * cell_h + y) == layer;
        }
      }
      share += weights.at(0, cy * w + cx) * on / static_cast<double>(cell_h * cell_w);
    }
  }
  return share;
}

FocusResult MeasureAttentionFocus(const OisModel<float>& model,
                                  const std::vector<Scene>& scenes,
                                  std::size_t max_scenes) {
  FocusResult r;
  for (const Scene& s : scenes) {
    if (r.scenes >= max_scenes) break;
    if (!s.designated_pair) continue;
    const FeatureMap<float> features = model.EncodeImage(s.image, s.depth);
    for (int member : {s.designated_pair->first, s.designated_pair->second}) {
      const BinaryMask& gt = s.masks[member];
      ClickSet clicks;
      clicks.Add(*NextClick(BinaryMask(gt.width, gt.height), gt, 0));
      r.before += LayerAttentionShare(model, features, clicks, s.depth, false);
      r.after += LayerAttentionShare(model, features, clicks, s.depth, true);
      ++r.samples;
    }
    ++r.scenes;
  }
  if (r.samples > 0) {
    r.before /= static_cast<double>(r.samples);
    r.after /= static_cast<double>(r.samples);
  }
  return r;
}

}  // namespace ois
