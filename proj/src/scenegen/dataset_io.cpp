#include <zlib.h>

#include <cstdio>
#include <json.hpp>

#include "ois/io/png.hpp"
#include "ois/order/pfm.hpp"
#include "ois/scenegen/scene.hpp"

namespace ois {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kDatasetFormatVersion = 1;

std::uint32_t Crc32(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size())));
}

std::string SceneDirName(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05d", index);
  return buf;
}

std::string MaskFileName(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mask_%02zu.png", k);
  return buf;
}

const char* KindName(ShapeKind k) {
  switch (k) {
    case ShapeKind::kDisk: return "disk";
    case ShapeKind::kRect: return "rect";
    case ShapeKind::kPolygon: return "polygon";
  }
  return "disk";
}

ShapeKind ParseKind(const std::string& s) {
  if (s == "disk") return ShapeKind::kDisk;
  if (s == "rect") return ShapeKind::kRect;
  if (s == "polygon") return ShapeKind::kPolygon;
  throw DataError("unknown shape kind '" + s + "'");
}

json SceneMeta(const Scene& scene) {
  json j;
  j["split"] = SplitName(scene.split);
  j["background_depth"] = scene.background_depth;
  j["layer_depths"] = scene.layer_depths;
  json kinds = json::array();
  for (ShapeKind k : scene.kinds) kinds.push_back(KindName(k));
  j["kinds"] = kinds;
  json boxes = json::array();
  for (const Box& b : scene.boxes) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
  j["boxes"] = boxes;
  if (scene.designated_pair) {
    j["designated_pair"] = {scene.designated_pair->first,
                            scene.designated_pair->second};
  } else {
    j["designated_pair"] = nullptr;
  }
  return j;
}

void WriteChecked(const fs::path& path, const std::string& bytes,
                  json& checksums, const std::string& key) {
  WriteFileBytes(path, bytes);
  checksums[key] = Crc32(bytes);
}

std::string ReadChecked(const fs::path& path, const json& checksums,
                        const std::string& key) {
  if (!checksums.contains(key)) throw DataError("no checksum recorded for " + key);
  std::string bytes = ReadFileBytes(path);
  if (Crc32(bytes) != checksums.at(key).get<std::uint32_t>()) {
    throw DataError("checksum mismatch for " + path.string());
  }
  return bytes;
}

}  // namespace

void to_json(json& j, const DatasetManifest& m) {
  j = {{"seed", m.seed},
          {"count", m.count},
          {"size", m.size},
          {"plain_ratio", m.plain_ratio},
          {"overlap_ratio", m.overlap_ratio},
          {"same_depth_ratio", m.same_depth_ratio},
          {"generator_version", m.generator_version}};
}

void from_json(const json& j, DatasetManifest& m) {
  m.seed = j.at("seed").get<std::uint64_t>();
  m.count = j.at("count").get<int>();
  m.size = j.at("size").get<int>();
  m.plain_ratio = j.at("plain_ratio").get<double>();
  m.overlap_ratio = j.at("overlap_ratio").get<double>();
  m.same_depth_ratio = j.at("same_depth_ratio").get<double>();
  m.generator_version = j.at("generator_version").get<int>();
}

void ExportDataset(const fs::path& dir, const DatasetManifest& manifest,
                   const std::vector<Scene>& scenes) {
  if (static_cast<int>(scenes.size()) != manifest.count) {
    throw ValidationError("scene count differs from the manifest");
  }
  fs::create_directories(dir);
  json scene_entries = json::array();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& scene = scenes[i];
    const std::string name = SceneDirName(static_cast<int>(i));
    const fs::path sdir = dir / name;
    fs::create_directories(sdir);
    json checksums = json::object();
    WriteChecked(sdir / "image.png", EncodePng(TensorToImage(scene.image)),
                 checksums, "image.png");
    WriteChecked(sdir / "depth.pfm", EncodePfm(scene.depth.values), checksums,
                 "depth.pfm");
    for (std::size_t k = 0; k < scene.masks.size(); ++k) {
      WriteChecked(sdir / MaskFileName(k), EncodePng(MaskToImage(scene.masks[k])),
                   checksums, MaskFileName(k));
    }
    WriteChecked(sdir / "scene.json", SceneMeta(scene).dump(2) + "\n", checksums,
                 "scene.json");
    scene_entries.push_back({{"dir", name}, {"checksums", checksums}});
  }
  json root;
  root["format"] = "ois-dataset";
  root["format_version"] = kDatasetFormatVersion;
  root["manifest"] = json(manifest);
  root["scenes"] = scene_entries;
  WriteFileBytes(dir / "manifest.json", root.dump(2) + "\n");
}

LoadedDataset ImportDataset(const fs::path& dir) {
  json root;
  try {
    root = json::parse(ReadFileBytes(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset manifest: ") + e.what());
  }
  LoadedDataset out;
  try {
    if (root.at("format") != "ois-dataset" ||
        root.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw DataError("unsupported dataset format");
    }
    out.manifest = root.at("manifest").get<DatasetManifest>();
    const json& entries = root.at("scenes");
    if (static_cast<int>(entries.size()) != out.manifest.count) {
      throw DataError("manifest lists a different number of scenes than count");
    }
    for (const json& entry : entries) {
      const fs::path sdir = dir / entry.at("dir").get<std::string>();
      const json& sums = entry.at("checksums");
      const json meta =
          json::parse(ReadChecked(sdir / "scene.json", sums, "scene.json"));
      Scene scene;
      scene.split = ParseSplit(meta.at("split").get<std::string>());
      scene.background_depth = meta.at("background_depth").get<float>();
      scene.layer_depths = meta.at("layer_depths").get<std::vector<float>>();
      for (const auto& k : meta.at("kinds")) {
        scene.kinds.push_back(ParseKind(k.get<std::string>()));
      }
      for (const auto& b : meta.at("boxes")) {
        scene.boxes.push_back(Box{b.at(0), b.at(1), b.at(2), b.at(3)});
      }
      if (!meta.at("designated_pair").is_null()) {
        scene.designated_pair = std::make_pair(meta["designated_pair"].at(0).get<int>(),
                                               meta["designated_pair"].at(1).get<int>());
      }
      scene.image = ImageToTensor(
          DecodePng(ReadChecked(sdir / "image.png", sums, "image.png")));
      scene.depth.values =
          DecodePfm(ReadChecked(sdir / "depth.pfm", sums, "depth.pfm"));
      scene.depth.provenance = DepthProvenance::kFile;
      for (std::size_t k = 0; k < scene.layer_depths.size(); ++k) {
        scene.masks.push_back(ImageToMask(
            DecodePng(ReadChecked(sdir / MaskFileName(k), sums, MaskFileName(k)))));
      }
      try {
        ValidateScene(scene);
      } catch (const ValidationError& e) {
        throw DataError(sdir.string() + ": " + e.what());
      }
      out.scenes.push_back(std::move(scene));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset metadata: ") + e.what());
  } catch (const ValidationError& e) {
    throw DataError(e.what());
  }
  return out;
}

}  // namespace ois
