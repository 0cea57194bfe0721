#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ois/model/config.hpp"
#include "ois/model/model.hpp"

namespace ois {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Everything needed to rebuild a model and resume its training. The on-disk
// layout is described in docs/checkpoint_format.md.
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  int epochs_done = 0;
  std::vector<double> epoch_losses;
  std::vector<NamedTensor> weights;
  // Adam moments, named "m/<param>" and "v/<param>"; empty for inference-only
  // checkpoints.
  std::vector<NamedTensor> optimizer;
};

std::string EncodeCheckpoint(const Checkpoint& ckpt);
// Throws DataError on a bad magic, unsupported version, checksum mismatch or
// truncated payload.
Checkpoint DecodeCheckpoint(const std::string& bytes);

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

std::vector<NamedTensor> ExportWeights(OisModel<float>& model);
// Throws ConfigError when names or shapes differ from the model's.
void ImportWeights(OisModel<float>& model, const std::vector<NamedTensor>& weights);

OisModel<float> ModelFromCheckpoint(const Checkpoint& ckpt);

}  // namespace ois
