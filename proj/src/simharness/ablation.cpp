#include "ois/simharness/ablation.hpp"

#include <chrono>
#include <cstdio>

#include "ois/io/png.hpp"
#include "ois/simharness/report_io.hpp"

namespace ois {

namespace fs = std::filesystem;
using nlohmann::json;

AblationRow SummarizeArm(const std::string& arm,
                         const std::vector<MetricReport>& per_seed) {
  if (per_seed.empty()) throw ConfigError("arm '" + arm + "' has no reports");
  AblationRow row;
  row.arm = arm;
  row.per_seed = per_seed;
  for (const MetricReport& r : per_seed) {
    row.noc90 += r.noc90;
    row.noc95 += r.noc95;
    row.miou1 += r.miou1;
    row.miou5 += r.miou5;
    row.nof95 += r.nof95;
  }
  const double n = static_cast<double>(per_seed.size());
  row.noc90 /= n;
  row.noc95 /= n;
  row.miou1 /= n;
  row.miou5 /= n;
  row.nof95 /= n;
  return row;
}

std::vector<AblationRow> RunAblation(const std::vector<AblationArmSpec>& arms,
                                     const std::vector<EvalInstance>& instances,
                                     const ProtocolOptions& options, int jobs) {
  for (const AblationArmSpec& arm : arms) {
    if (arm.checkpoints.empty()) {
      throw ConfigError("arm '" + arm.name + "' has no checkpoint");
    }
    for (const fs::path& p : arm.checkpoints) {
      if (!fs::exists(p)) {
        throw ConfigError("arm '" + arm.name + "': missing checkpoint " +
                          p.string());
      }
    }
  }
  std::vector<AblationRow> rows;
  for (const AblationArmSpec& arm : arms) {
    std::vector<MetricReport> reports;
    for (const fs::path& p : arm.checkpoints) {
      const OisModel<float> model = ModelFromCheckpoint(LoadCheckpoint(p));
      const auto traces = RunProtocolAll(
          [&] { return std::make_unique<ModelSegmenter>(model); }, instances,
          options, jobs);
      reports.push_back(Aggregate(traces, options.max_clicks));
    }
    rows.push_back(SummarizeArm(arm.name, reports));
  }
  return rows;
}

std::string FormatAblationTable(const std::string& title,
                                const std::vector<AblationRow>& rows) {
  std::string out = "# " + title + "\n";
  if (rows.empty()) return out;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "# seeds=%zu, instances=%zu, NoC counts failures as %d\n",
                rows.front().per_seed.size(), rows.front().per_seed.front().instances,
                rows.front().per_seed.front().click_cap);
  out += buf;
  out += "| arm | NoC90 | 5-mIoU | NoF95 | 1-mIoU |\n";
  out += "|---|---|---|---|---|\n";
  const AblationRow& ref = rows.front();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AblationRow& r = rows[i];
    if (i == 0) {
      std::snprintf(buf, sizeof(buf), "| %s | %.2f | %.2f | %.1f | %.2f |\n",
                    r.arm.c_str(), r.noc90, 100.0 * r.miou5, r.nof95,
                    100.0 * r.miou1);
    } else {
      std::snprintf(buf, sizeof(buf),
                    "| %s | %.2f (%+.2f) | %.2f (%+.2f) | %.1f (%+.1f) | "
                    "%.2f (%+.2f) |\n",
                    r.arm.c_str(), r.noc90, r.noc90 - ref.noc90, 100.0 * r.miou5,
                    100.0 * (r.miou5 - ref.miou5), r.nof95, r.nof95 - ref.nof95,
                    100.0 * r.miou1, 100.0 * (r.miou1 - ref.miou1));
    }
    out += buf;
  }
  return out;
}

json AblationToJson(const std::vector<AblationRow>& rows, bool with_timings) {
  json arr = json::array();
  for (const AblationRow& r : rows) {
    json seeds = json::array();
    for (const MetricReport& m : r.per_seed) {
      seeds.push_back(ReportToJson(m, with_timings));
    }
    arr.push_back({{"arm", r.arm},
                   {"noc90", r.noc90},
                   {"noc95", r.noc95},
                   {"miou1", r.miou1},
                   {"miou5", r.miou5},
                   {"nof95", r.nof95},
                   {"per_seed", seeds}});
  }
  return arr;
}

Checkpoint TrainArm(const std::vector<Scene>& scenes,
                    const ModelConfig& model_config,
                    const TrainConfig& train_config, std::uint64_t seed,
                    const StepCallback& on_step) {
  OisModel<float> model(model_config, seed);
  Trainer trainer(model, train_config, seed);
  trainer.Run(scenes, on_step);
  return trainer.MakeCheckpoint();
}

std::string TrainingKey(const DatasetManifest& data,
                        const ModelConfig& model_config,
                        const TrainConfig& train_config, std::uint64_t seed) {
  const std::string text = json({{"data", data},
                                 {"model", model_config},
                                 {"train", train_config},
                                 {"seed", seed},
                                 {"checkpoint_version", kCheckpointVersion}})
                               .dump();
  // FNV-1a, 64-bit.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Checkpoint TrainOrLoad(const fs::path& path, const std::string& key,
                       const std::vector<Scene>& scenes,
                       const ModelConfig& model_config,
                       const TrainConfig& train_config, std::uint64_t seed,
                       const StepCallback& on_step) {
  const fs::path key_path = fs::path(path).concat(".key");
  if (fs::exists(path) && fs::exists(key_path) &&
      ReadFileBytes(key_path) == key + "\n") {
    return LoadCheckpoint(path);
  }
  const auto start = std::chrono::steady_clock::now();
  Checkpoint ckpt = TrainArm(scenes, model_config, train_config, seed, on_step);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  SaveCheckpoint(path, ckpt);
  WriteFileBytes(fs::path(path).concat(".seconds"), std::to_string(seconds) + "\n");
  WriteFileBytes(key_path, key + "\n");
  return ckpt;
}

std::optional<double> RecordedTrainSeconds(const fs::path& path) {
  const fs::path p = fs::path(path).concat(".seconds");
  if (!fs::exists(p)) return std::nullopt;
  try {
    return std::stod(ReadFileBytes(p));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace ois
