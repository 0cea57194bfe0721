#include "ois/simharness/report_io.hpp"

#include <cstdio>
#include <sstream>

namespace ois {

using nlohmann::json;

json TraceToJson(const InteractionTrace& trace, bool with_timings) {
  json rounds = json::array();
  for (const RoundRecord& r : trace.rounds) {
    json jr = {{"x", r.click.x},
               {"y", r.click.y},
               {"polarity", r.click.polarity == Polarity::kPositive ? "positive"
                                                                     : "negative"},
               {"round", r.click.round},
               {"iou", r.iou}};
    if (with_timings) jr["ms"] = r.ms;
    rounds.push_back(jr);
  }
  json j = {{"instance", trace.instance_id}, {"rounds", rounds},
            {"failed", trace.failed}};
  if (trace.failed) j["failure"] = trace.failure;
  if (with_timings) j["encode_ms"] = trace.encode_ms;
  return j;
}

InteractionTrace TraceFromJson(const json& j) {
  InteractionTrace t;
  t.instance_id = j.at("instance").get<std::string>();
  t.failed = j.at("failed").get<bool>();
  t.failure = j.value("failure", "");
  t.encode_ms = j.value("encode_ms", 0.0);
  for (const json& jr : j.at("rounds")) {
    RoundRecord r;
    r.click.x = jr.at("x").get<int>();
    r.click.y = jr.at("y").get<int>();
    const std::string pol = jr.at("polarity").get<std::string>();
    if (pol != "positive" && pol != "negative") {
      throw DataError("trace: unknown polarity '" + pol + "'");
    }
    r.click.polarity = pol == "positive" ? Polarity::kPositive : Polarity::kNegative;
    r.click.round = jr.at("round").get<int>();
    r.iou = jr.at("iou").get<double>();
    r.ms = jr.value("ms", 0.0);
    t.rounds.push_back(r);
  }
  return t;
}

json ReportToJson(const MetricReport& report, bool with_timings) {
  json j = {{"instances", report.instances},
            {"click_cap", report.click_cap},
            {"failures_count_as_cap", true},
            {"noc90", report.noc90},
            {"noc95", report.noc95},
            {"miou1", report.miou1},
            {"miou5", report.miou5},
            {"nof90", report.nof90},
            {"nof95", report.nof95}};
  if (with_timings) {
    j["spc_ms"] = report.spc_ms;
    j["encode_ms"] = report.encode_ms;
    if (report.sat_latency_s) j["sat_latency_s"] = *report.sat_latency_s;
  }
  return j;
}

std::string TracesToJsonl(const std::vector<InteractionTrace>& traces,
                          bool with_timings) {
  std::string out;
  for (const InteractionTrace& t : traces) {
    out += TraceToJson(t, with_timings).dump();
    out += '\n';
  }
  return out;
}

std::vector<InteractionTrace> TracesFromJsonl(const std::string& text) {
  std::vector<InteractionTrace> traces;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      traces.push_back(TraceFromJson(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return traces;
}

std::string FormatReport(const std::string& title, const MetricReport& r) {
  char buf[512];
  std::string out = "# " + title + "\n";
  std::snprintf(buf, sizeof(buf),
                "# instances=%zu, NoC counts failures as %d (click cap)\n",
                r.instances, r.click_cap);
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "NoC90 %.2f | NoC95 %.2f | 1-mIoU %.2f | 5-mIoU %.2f | "
                "NoF90 %d | NoF95 %d | SPC %.2f ms | encode %.2f ms",
                r.noc90, r.noc95, 100.0 * r.miou1, 100.0 * r.miou5, r.nof90,
                r.nof95, r.spc_ms, r.encode_ms);
  out += buf;
  if (r.sat_latency_s) {
    std::snprintf(buf, sizeof(buf), " | SAT %.3f s", *r.sat_latency_s);
    out += buf;
  }
  out += "\n";
  return out;
}

}  // namespace ois
