#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ois/common/mask.hpp"

namespace ois {

std::string Base64Encode(const std::string& bytes);
// Throws ValidationError on malformed input.
std::string Base64Decode(const std::string& text);

// Row-major run lengths, alternating 0-runs and 1-runs, starting with a
// (possibly empty) 0-run.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask EncodeRle(const BinaryMask& mask);
// Throws ValidationError when the runs do not cover width * height pixels.
BinaryMask DecodeRle(const RleMask& rle);

nlohmann::json RleToJson(const RleMask& rle);
RleMask RleFromJson(const nlohmann::json& j);

}  // namespace ois
