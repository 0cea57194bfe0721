#include "ois/simharness/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "ois/simharness/click_sim.hpp"

namespace ois {

namespace {

using Clock = std::chrono::steady_clock;

double MillisSince(Clock::time_point start) {
  const double ms =
      std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return std::max(ms, 1e-6);
}

}  // namespace

void ModelSegmenter::SetImage(const EvalInstance& instance) {
  depth_ = instance.depth;
  features_ = model_.EncodeImage(instance.image, instance.depth);
}

BinaryMask ModelSegmenter::Predict(const ClickSet& clicks,
                                   const BinaryMask* previous) {
  if (!features_) throw ConfigError("ModelSegmenter: SetImage not called");
  return model_.Predict(*features_, clicks, depth_, previous);
}

double Iou(const BinaryMask& a, const BinaryMask& b) {
  RequireSameSize(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.bits[i] & b.bits[i];
    uni += a.bits[i] | b.bits[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

InteractionTrace RunProtocol(InteractiveSegmenter& segmenter,
                             const EvalInstance& instance,
                             const ProtocolOptions& options) {
  InteractionTrace trace;
  trace.instance_id = instance.id;
  const double stop_at =
      *std::max_element(options.thresholds.begin(), options.thresholds.end());
  try {
    const auto t_encode = Clock::now();
    segmenter.SetImage(instance);
    trace.encode_ms = MillisSince(t_encode);

    ClickSet clicks;
    BinaryMask pred(instance.gt.width, instance.gt.height);
    std::optional<BinaryMask> previous;
    for (int round = 0; round < options.max_clicks; ++round) {
      const std::optional<Click> click = NextClick(pred, instance.gt, round);
      if (!click) break;
      if (!clicks.HasRoom(click->polarity)) break;
      clicks.Add(*click);
      const auto t_click = Clock::now();
      pred = segmenter.Predict(clicks, previous ? &*previous : nullptr);
      const double ms = MillisSince(t_click);
      const double iou = Iou(pred, instance.gt);
      trace.rounds.push_back({*click, iou, ms});
      previous = pred;
      if (iou >= stop_at) break;
    }
  } catch (const std::exception& e) {
    trace.failed = true;
    trace.failure = e.what();
  }
  return trace;
}

int ClicksToReach(const InteractionTrace& trace, double threshold, int cap) {
  for (std::size_t i = 0; i < trace.rounds.size() && static_cast<int>(i) < cap;
       ++i) {
    if (trace.rounds[i].iou >= threshold) return static_cast<int>(i) + 1;
  }
  return cap;
}

double IouAfter(const InteractionTrace& trace, int k) {
  if (trace.rounds.empty() || k < 1) return 0.0;
  const std::size_t idx =
      std::min(static_cast<std::size_t>(k), trace.rounds.size()) - 1;
  return trace.rounds[idx].iou;
}

namespace {

bool Reaches(const InteractionTrace& trace, double threshold, int cap) {
  for (std::size_t i = 0; i < trace.rounds.size() && static_cast<int>(i) < cap;
       ++i) {
    if (trace.rounds[i].iou >= threshold) return true;
  }
  return false;
}

}  // namespace

MetricReport Aggregate(const std::vector<InteractionTrace>& traces, int cap) {
  if (traces.empty()) throw ValidationError("aggregate: no traces");
  MetricReport r;
  r.click_cap = cap;
  r.instances = traces.size();
  double clicks_ms = 0.0;
  std::size_t clicks = 0;
  for (const InteractionTrace& t : traces) {
    r.noc90 += ClicksToReach(t, 0.90, cap);
    r.noc95 += ClicksToReach(t, 0.95, cap);
    r.miou1 += IouAfter(t, 1);
    r.miou5 += IouAfter(t, 5);
    r.nof90 += Reaches(t, 0.90, cap) ? 0 : 1;
    r.nof95 += Reaches(t, 0.95, cap) ? 0 : 1;
    r.encode_ms += t.encode_ms;
    for (const RoundRecord& rr : t.rounds) {
      clicks_ms += rr.ms;
      ++clicks;
    }
  }
  const double n = static_cast<double>(traces.size());
  r.noc90 /= n;
  r.noc95 /= n;
  r.miou1 /= n;
  r.miou5 /= n;
  r.encode_ms /= n;
  r.spc_ms = clicks > 0 ? clicks_ms / static_cast<double>(clicks) : 0.0;
  r.traces = traces;
  return r;
}

double MeasureSatLatency(InteractiveSegmenter& segmenter,
                         const EvalInstance& instance, int grid) {
  const auto start = Clock::now();
  segmenter.SetImage(instance);
  const int w = instance.gt.width, h = instance.gt.height;
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      ClickSet clicks;
      clicks.Add(Click{(2 * gx + 1) * w / (2 * grid),
                       (2 * gy + 1) * h / (2 * grid), Polarity::kPositive, 0});
      (void)segmenter.Predict(clicks, nullptr);
    }
  }
  return MillisSince(start) / 1000.0;
}

std::vector<InteractionTrace> RunProtocolAll(
    const std::function<std::unique_ptr<InteractiveSegmenter>()>& make_segmenter,
    const std::vector<EvalInstance>& instances, const ProtocolOptions& options,
    int jobs) {
  std::vector<InteractionTrace> traces(instances.size());
  if (jobs <= 1 || instances.size() < 2) {
    auto seg = make_segmenter();
    for (std::size_t i = 0; i < instances.size(); ++i) {
      traces[i] = RunProtocol(*seg, instances[i], options);
    }
    return traces;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&]() {
      auto seg = make_segmenter();
      for (std::size_t i = next++; i < instances.size(); i = next++) {
        traces[i] = RunProtocol(*seg, instances[i], options);
      }
    });
  }
  for (auto& t : workers) t.join();
  return traces;
}

}  // namespace ois
