#include "ois/order/pfm.hpp"

#include <bit>
#include <cstdint>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ois/common/errors.hpp"

namespace ois {

namespace {

std::uint32_t ByteSwap(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

bool HostIsLittleEndian() { return std::endian::native == std::endian::little; }

}  // namespace

std::string EncodePfm(const Tensor& raster) {
  if (raster.rank() != 2) {
    throw DimensionError("PFM raster must be H x W, got " +
                         ShapeToString(raster.shape()));
  }
  const std::size_t h = raster.dim(0), w = raster.dim(1);
  std::string out = "Pf\n" + std::to_string(w) + " " + std::to_string(h) +
                    "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + h * w * 4);
  char* dst = out.data() + header;
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t src_row = h - 1 - r;
    for (std::size_t c = 0; c < w; ++c) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(raster.at(src_row, c));
      if (!HostIsLittleEndian()) bits = ByteSwap(bits);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}

Tensor DecodePfm(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    }
    return bytes.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic == "PF") throw DataError("PFM: colour maps are not supported");
  if (magic != "Pf") throw DataError("PFM: bad magic '" + magic + "'");
  long w = 0, h = 0;
  double scale = 0;
  try {
    w = std::stol(next_token());
    h = std::stol(next_token());
    scale = std::stod(next_token());
  } catch (const std::exception&) {
    throw DataError("PFM: malformed header");
  }
  if (w <= 0 || h <= 0 || scale == 0.0) {
    throw DataError("PFM: invalid dimensions or scale");
  }
  ++pos;  // single whitespace byte after the scale
  const std::size_t need = static_cast<std::size_t>(w * h) * 4;
  if (bytes.size() < pos + need) throw DataError("PFM: truncated data");
  if (bytes.size() != pos + need) throw DataError("PFM: trailing bytes");
  const bool file_little = scale < 0;
  const bool swap = file_little != HostIsLittleEndian();
  Tensor out({static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  const char* src = bytes.data() + pos;
  for (long r = 0; r < h; ++r) {
    const std::size_t dst_row = static_cast<std::size_t>(h - 1 - r);
    for (long c = 0; c < w; ++c) {
      std::uint32_t bits;
      std::memcpy(&bits, src, 4);
      src += 4;
      if (swap) bits = ByteSwap(bits);
      out.at(dst_row, static_cast<std::size_t>(c)) = std::bit_cast<float>(bits);
    }
  }
  return out;
}

void WritePfm(const std::filesystem::path& path, const Tensor& raster) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  const std::string bytes = EncodePfm(raster);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor ReadPfm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return DecodePfm(ss.str());
}

}  // namespace ois
