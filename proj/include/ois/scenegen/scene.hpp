#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ois/common/mask.hpp"
#include "ois/numerics/tensor.hpp"
#include "ois/order/order_map.hpp"
#include <json.hpp>

namespace ois {

enum class SceneSplit { kPlain, kOverlap, kSameDepth };

const char* SplitName(SceneSplit split);
// Throws ValidationError for unknown names.
SceneSplit ParseSplit(const std::string& name);

enum class ShapeKind { kDisk, kRect, kPolygon };

struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive-exclusive

  int Area() const { return std::max(0, x1 - x0) * std::max(0, y1 - y0); }
};

double BoxIou(const Box& a, const Box& b);

// A layered synthetic scene. Every pixel belongs to exactly one instance or
// to the background; instance masks are the visible (modal) regions.
struct Scene {
  SceneSplit split = SceneSplit::kPlain;
  Tensor image;  // [H x W x 3], values k / 255
  DepthMap depth;
  std::vector<BinaryMask> masks;
  std::vector<float> layer_depths;
  std::vector<ShapeKind> kinds;
  std::vector<Box> boxes;
  float background_depth = 0.0f;
  // Instances the split was built around (overlap / same-depth splits).
  std::optional<std::pair<int, int>> designated_pair;

  int size() const { return static_cast<int>(image.dim(0)); }
};

struct SceneOptions {
  int min_shapes = 2;
  int max_shapes = 6;
  int depth_layers = 8;
  float background_depth = 10.0f;
  double overlap_min_box_iou = 0.3;
  // Smallest visible area for a designated-pair member.
  int min_pair_area = 16;
  int max_retries = 200;
};

// Throws ValidationError for size < 32 and DataError when the split
// constraints cannot be met within `max_retries` attempts.
Scene GenerateScene(std::mt19937_64& rng, int size, SceneSplit split,
                    const SceneOptions& options = {});

// Throws ValidationError naming the first broken invariant: mask
// disjointness, full coverage, depth consistency, background farthest.
void ValidateScene(const Scene& scene);

inline constexpr int kGeneratorVersion = 1;

struct DatasetManifest {
  std::uint64_t seed = 0;
  int count = 0;
  int size = 64;
  // Fractions of plain / overlap / same-depth scenes; normalized on use.
  double plain_ratio = 0.4;
  double overlap_ratio = 0.4;
  double same_depth_ratio = 0.2;
  int generator_version = kGeneratorVersion;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

// Per-scene rng derived from (manifest seed, index), so scenes can be
// generated independently and in any order.
std::mt19937_64 SceneRng(std::uint64_t seed, int index);

Scene GenerateDatasetScene(const DatasetManifest& manifest, int index);

// Throws ValidationError for inconsistent manifests.
std::vector<Scene> GenerateDataset(const DatasetManifest& manifest, int jobs = 1);

// Layout: manifest.json (manifest, per-file CRC-32 checksums) and
// scene_NNNNN/{image.png, depth.pfm, mask_KK.png, scene.json}.
void ExportDataset(const std::filesystem::path& dir,
                   const DatasetManifest& manifest,
                   const std::vector<Scene>& scenes);

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Scene> scenes;
};

// Verifies checksums and scene invariants; DataError on any mismatch.
LoadedDataset ImportDataset(const std::filesystem::path& dir);

}  // namespace ois
