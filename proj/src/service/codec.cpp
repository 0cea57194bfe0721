#include "ois/service/codec.hpp"

#include <openssl/evp.h>

#include "ois/common/errors.hpp"

namespace ois {

std::string Base64Encode(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string Base64Decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ValidationError("base64: bad length");
  std::string out(3 * (text.size() / 4) + 1, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ValidationError("base64: invalid characters");
  // EVP_DecodeBlock keeps the zero bytes that padding stands for.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

RleMask EncodeRle(const BinaryMask& mask) {
  RleMask rle{mask.width, mask.height, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t b : mask.bits) {
    if (b != current) {
      rle.counts.push_back(run);
      current = b;
      run = 0;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask DecodeRle(const RleMask& rle) {
  if (rle.width < 0 || rle.height < 0) throw ValidationError("rle: negative size");
  BinaryMask mask(rle.width, rle.height);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (std::uint32_t run : rle.counts) {
    if (pos + run > mask.size()) throw ValidationError("rle: runs overflow mask");
    std::fill(mask.bits.begin() + pos, mask.bits.begin() + pos + run, value);
    pos += run;
    value ^= 1;
  }
  if (pos != mask.size()) throw ValidationError("rle: runs do not cover mask");
  return mask;
}

nlohmann::json RleToJson(const RleMask& rle) {
  return {{"width", rle.width}, {"height", rle.height}, {"counts", rle.counts}};
}

RleMask RleFromJson(const nlohmann::json& j) {
  return {j.at("width").get<int>(), j.at("height").get<int>(),
          j.at("counts").get<std::vector<std::uint32_t>>()};
}

}  // namespace ois
