#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ois/simharness/protocol.hpp"

namespace ois {

// Timing fields are the only nondeterministic part of a trace or report;
// `with_timings = false` leaves them out so outputs can be compared byte for
// byte across runs.
nlohmann::json TraceToJson(const InteractionTrace& trace, bool with_timings = true);
InteractionTrace TraceFromJson(const nlohmann::json& j);

nlohmann::json ReportToJson(const MetricReport& report, bool with_timings = true);

// One JSON object per line, one line per trace.
std::string TracesToJsonl(const std::vector<InteractionTrace>& traces,
                          bool with_timings = true);
// Throws DataError on malformed lines.
std::vector<InteractionTrace> TracesFromJsonl(const std::string& text);

// Human-readable summary with the failure-cap convention in its header.
std::string FormatReport(const std::string& title, const MetricReport& report);

}  // namespace ois
