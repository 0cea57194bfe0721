#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ois/model/checkpoint.hpp"
#include "ois/model/trainer.hpp"
#include "ois/scenegen/scene.hpp"
#include "ois/simharness/protocol.hpp"

namespace ois {

struct AblationArmSpec {
  std::string name;
  // One checkpoint per training seed.
  std::vector<std::filesystem::path> checkpoints;
};

struct AblationRow {
  std::string arm;
  std::vector<MetricReport> per_seed;
  // Means over seeds.
  double noc90 = 0.0;
  double noc95 = 0.0;
  double miou1 = 0.0;
  double miou5 = 0.0;
  double nof95 = 0.0;
};

// Evaluates every checkpoint with the same protocol on the same instances.
// Throws ConfigError when a checkpoint file is missing or an arm has none.
std::vector<AblationRow> RunAblation(const std::vector<AblationArmSpec>& arms,
                                     const std::vector<EvalInstance>& instances,
                                     const ProtocolOptions& options = {},
                                     int jobs = 1);

AblationRow SummarizeArm(const std::string& arm,
                         const std::vector<MetricReport>& per_seed);

// Columns NoC90, 5-mIoU, NoF95 (plus 1-mIoU), with deltas against the first
// row.
std::string FormatAblationTable(const std::string& title,
                                const std::vector<AblationRow>& rows);
nlohmann::json AblationToJson(const std::vector<AblationRow>& rows,
                              bool with_timings = true);

// Builds a model for `model_config` seeded with `seed`, trains it on `scenes`
// and returns the final checkpoint.
Checkpoint TrainArm(const std::vector<Scene>& scenes,
                    const ModelConfig& model_config,
                    const TrainConfig& train_config, std::uint64_t seed,
                    const StepCallback& on_step = {});

// Stable 16-hex-digit digest of everything that determines a trained
// checkpoint.
std::string TrainingKey(const DatasetManifest& data,
                        const ModelConfig& model_config,
                        const TrainConfig& train_config, std::uint64_t seed);

// Loads `path` if it exists and was produced for `key`; otherwise trains and
// saves it there.
Checkpoint TrainOrLoad(const std::filesystem::path& path, const std::string& key,
                       const std::vector<Scene>& scenes,
                       const ModelConfig& model_config,
                       const TrainConfig& train_config, std::uint64_t seed,
                       const StepCallback& on_step = {});

// Training wall-clock seconds recorded by TrainOrLoad next to `path`.
std::optional<double> RecordedTrainSeconds(const std::filesystem::path& path);

}  // namespace ois
