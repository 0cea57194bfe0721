#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ois/common/mask.hpp"
#include "ois/numerics/tensor.hpp"

namespace ois {

// 8-bit raster with interleaved channels (1 = gray, 3 = RGB, 4 = RGBA).
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  friend bool operator==(const Image8&, const Image8&) = default;
};

std::string EncodePng(const Image8& image);
// Decodes any 8-bit or 16-bit PNG into gray or RGB(A) 8-bit; palettes are
// expanded. Throws DataError on malformed input.
Image8 DecodePng(const std::string& bytes);

void WritePng(const std::filesystem::path& path, const Image8& image);
Image8 ReadPng(const std::filesystem::path& path);

// [H x W x 3] floats in [0, 1]. Gray is replicated, alpha dropped.
Tensor ImageToTensor(const Image8& image);
// Accepts [H x W] (gray) or [H x W x 3]; values are clamped to [0, 1] and
// rounded to the nearest k / 255.
Image8 TensorToImage(const Tensor& t);

// 0 / 255 gray raster.
Image8 MaskToImage(const BinaryMask& mask);
// Single-channel image; nonzero pixels are set. DataError for other layouts.
BinaryMask ImageToMask(const Image8& image);

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace ois
