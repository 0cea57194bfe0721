#pragma once

#include <filesystem>
#include <string>

#include "ois/numerics/tensor.hpp"

namespace ois {

// Portable Float Map, single channel ("Pf"). Writes little-endian (negative
// scale) with rows stored bottom-to-top as the format requires. Reads either
// endianness. Float bits survive a write/read round trip unchanged.
std::string EncodePfm(const Tensor& raster);
Tensor DecodePfm(const std::string& bytes);

void WritePfm(const std::filesystem::path& path, const Tensor& raster);
Tensor ReadPfm(const std::filesystem::path& path);

}  // namespace ois
