#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ois/io/png.hpp"
#include "ois/scenegen/scene.hpp"

namespace ois {
namespace {

namespace fs = std::filesystem;

void ExpectSameScene(const Scene& a, const Scene& b) {
  EXPECT_EQ(a.split, b.split);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.depth.values, b.depth.values);
  EXPECT_EQ(a.masks, b.masks);
  EXPECT_EQ(a.layer_depths, b.layer_depths);
  EXPECT_EQ(a.kinds, b.kinds);
  EXPECT_EQ(a.designated_pair, b.designated_pair);
  EXPECT_EQ(a.background_depth, b.background_depth);
}

bool FourAdjacent(const BinaryMask& a, const BinaryMask& b) {
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!a.at(x, y)) continue;
      if ((x > 0 && b.at(x - 1, y)) || (x + 1 < a.width && b.at(x + 1, y)) ||
          (y > 0 && b.at(x, y - 1)) || (y + 1 < a.height && b.at(x, y + 1))) {
        return true;
      }
    }
  }
  return false;
}

class SceneInvariantTest : public ::testing::TestWithParam<SceneSplit> {};

TEST_P(SceneInvariantTest, HoldsOverManySeeds) {
  for (std::uint64_t seed = 0; seed < 350; ++seed) {
    std::mt19937_64 rng(seed);
    const Scene s = GenerateScene(rng, 64, GetParam());
    ASSERT_NO_THROW(ValidateScene(s)) << seed;
    ASSERT_EQ(s.split, GetParam());
    // Every pixel is owned by one instance or by the background.
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        int owners = 0;
        for (const BinaryMask& m : s.masks) owners += m.at(x, y);
        ASSERT_LE(owners, 1);
        const float d = s.depth.at(x, y);
        ASSERT_TRUE(owners == 1 ? d < s.background_depth
                                : d == s.background_depth);
      }
    }
    for (float d : s.layer_depths) ASSERT_LT(d, s.background_depth);
    if (GetParam() == SceneSplit::kPlain) continue;
    ASSERT_TRUE(s.designated_pair.has_value());
    const auto [a, b] = *s.designated_pair;
    ASSERT_GE(s.masks[a].Count(), 16u);
    ASSERT_GE(s.masks[b].Count(), 16u);
    if (GetParam() == SceneSplit::kOverlap) {
      ASSERT_GE(BoxIou(s.boxes[a], s.boxes[b]), 0.3) << seed;
      ASSERT_NE(s.layer_depths[a], s.layer_depths[b]);
    } else {
      ASSERT_EQ(s.layer_depths[a], s.layer_depths[b]);
      ASSERT_TRUE(FourAdjacent(s.masks[a], s.masks[b])) << seed;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Splits, SceneInvariantTest,
                         ::testing::Values(SceneSplit::kPlain,
                                           SceneSplit::kOverlap,
                                           SceneSplit::kSameDepth),
                         [](const auto& info) { return SplitName(info.param); });

TEST(SceneTest, SameSeedSameScene) {
  std::mt19937_64 a(77), b(77);
  ExpectSameScene(GenerateScene(a, 48, SceneSplit::kOverlap),
                  GenerateScene(b, 48, SceneSplit::kOverlap));
}

TEST(SceneTest, RejectsSmallCanvas) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(GenerateScene(rng, 31, SceneSplit::kPlain), ValidationError);
}

TEST(SceneTest, ValidationCatchesBrokenScenes) {
  std::mt19937_64 rng(2);
  Scene s = GenerateScene(rng, 32, SceneSplit::kPlain);
  Scene overlapping = s;
  overlapping.masks.push_back(overlapping.masks.front());
  overlapping.layer_depths.push_back(1.0f);
  overlapping.kinds.push_back(ShapeKind::kDisk);
  overlapping.boxes.push_back({});
  EXPECT_THROW(ValidateScene(overlapping), ValidationError);
  Scene far = s;
  far.layer_depths.front() = far.background_depth + 1.0f;
  EXPECT_THROW(ValidateScene(far), ValidationError);
}

TEST(SceneTest, SplitNamesRoundTrip) {
  for (SceneSplit sp : {SceneSplit::kPlain, SceneSplit::kOverlap,
                        SceneSplit::kSameDepth}) {
    EXPECT_EQ(ParseSplit(SplitName(sp)), sp);
  }
  EXPECT_THROW(ParseSplit("tilted"), ValidationError);
}

TEST(DatasetTest, SceneIndependentOfJobsAndOrder) {
  DatasetManifest m;
  m.seed = 5;
  m.count = 12;
  const auto serial = GenerateDataset(m, 1);
  const auto parallel = GenerateDataset(m, 3);
  ASSERT_EQ(serial.size(), 12u);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    ExpectSameScene(serial[i], parallel[i]);
  }
  ExpectSameScene(GenerateDatasetScene(m, 7), serial[7]);
}

TEST(DatasetTest, SplitRatiosAreRespected) {
  DatasetManifest m;
  m.seed = 6;
  m.count = 400;
  int counts[3] = {0, 0, 0};
  for (const Scene& s : GenerateDataset(m)) ++counts[static_cast<int>(s.split)];
  EXPECT_NEAR(counts[0] / 400.0, 0.4, 0.08);
  EXPECT_NEAR(counts[1] / 400.0, 0.4, 0.08);
  EXPECT_NEAR(counts[2] / 400.0, 0.2, 0.08);
}

TEST(DatasetTest, RejectsBadManifest) {
  DatasetManifest m;
  m.count = -1;
  EXPECT_THROW(GenerateDataset(m), ValidationError);
}

class DatasetIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ois_dataset_" + std::string(::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name()));
    fs::remove_all(dir_);
    manifest_.seed = 9;
    manifest_.count = 5;
    manifest_.size = 32;
    scenes_ = GenerateDataset(manifest_);
    ExportDataset(dir_, manifest_, scenes_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  DatasetManifest manifest_;
  std::vector<Scene> scenes_;
};

TEST_F(DatasetIoTest, RoundTripIsExact) {
  const LoadedDataset loaded = ImportDataset(dir_);
  EXPECT_EQ(loaded.manifest.seed, 9u);
  ASSERT_EQ(loaded.scenes.size(), scenes_.size());
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    ExpectSameScene(loaded.scenes[i], scenes_[i]);
  }
}

TEST_F(DatasetIoTest, ManifestRegeneratesStoredScenes) {
  const LoadedDataset loaded = ImportDataset(dir_);
  const auto again = GenerateDataset(loaded.manifest);
  for (std::size_t i = 0; i < again.size(); ++i) {
    ExpectSameScene(again[i], loaded.scenes[i]);
  }
}

TEST_F(DatasetIoTest, TamperedDepthIsRejected) {
  const fs::path depth = dir_ / "scene_00001" / "depth.pfm";
  std::string bytes = ReadFileBytes(depth);
  bytes[bytes.size() - 2] ^= 0x01;
  WriteFileBytes(depth, bytes);
  EXPECT_THROW(ImportDataset(dir_), DataError);
}

TEST_F(DatasetIoTest, MissingFileIsRejected) {
  fs::remove(dir_ / "scene_00002" / "mask_00.png");
  EXPECT_THROW(ImportDataset(dir_), DataError);
}

TEST(PngTest, RoundTripAndGarbage) {
  Image8 img{3, 2, 3, std::vector<std::uint8_t>(18)};
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = i * 13;
  const Image8 back = DecodePng(EncodePng(img));
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.data, img.data);
  EXPECT_THROW(DecodePng("not a png"), DataError);
}

}  // namespace
}  // namespace ois
