#include "ois/io/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ois/common/errors.hpp"

namespace ois {

namespace {

struct ReadCursor {
  const std::string* bytes;
  std::size_t offset;
};

void ReadFromString(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes->size()) {
    png_error(png, "truncated data");
  }
  std::memcpy(out, cur->bytes->data() + cur->offset, length);
  cur->offset += length;
}

void WriteToString(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void Flush(png_structp) {}

struct ErrorSlot {
  char message[256] = {0};
};

[[noreturn]] void OnError(png_structp png, png_const_charp message) {
  auto* slot = static_cast<ErrorSlot*>(png_get_error_ptr(png));
  std::strncpy(slot->message, message, sizeof(slot->message) - 1);
  png_longjmp(png, 1);
}

void OnWarning(png_structp, png_const_charp) {}

}  // namespace

std::string EncodePng(const Image8& image) {
  volatile int color_type = 0;
  switch (image.channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
    default: throw ValidationError("png: unsupported channel count");
  }
  if (image.width <= 0 || image.height <= 0 ||
      image.data.size() != static_cast<std::size_t>(image.width) *
                               image.height * image.channels) {
    throw DimensionError("png: raster size does not match its dimensions");
  }
  ErrorSlot slot;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &slot, OnError, OnWarning);
  png_infop info = png_create_info_struct(png);
  std::string out;
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError(std::string("png: ") + slot.message);
  }
  {
    png_set_write_fn(png, &out, WriteToString, Flush);
    png_set_IHDR(png, info, image.width, image.height, 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(image.data.data() + y * stride));
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Image8 DecodePng(const std::string& bytes) {
  if (bytes.size() < 8 ||
      png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw DataError("png: bad signature");
  }
  ErrorSlot slot;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &slot, OnError, OnWarning);
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&bytes, 0};
  Image8 image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(std::string("png: ") + slot.message);
  }
  {
    png_set_read_fn(png, &cursor, ReadFromString);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    image.width = static_cast<int>(png_get_image_width(png, info));
    image.height = static_cast<int>(png_get_image_height(png, info));
    image.channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    image.data.resize(stride * image.height);
    for (int y = 0; y < image.height; ++y) {
      png_read_row(png, image.data.data() + y * stride, nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Tensor ImageToTensor(const Image8& image) {
  const auto h = static_cast<std::size_t>(image.height);
  const auto w = static_cast<std::size_t>(image.width);
  Tensor t({h, w, 3});
  const int c = image.channels;
  for (std::size_t p = 0; p < h * w; ++p) {
    for (int k = 0; k < 3; ++k) {
      const int src = c >= 3 ? k : 0;
      t[p * 3 + k] = static_cast<float>(image.data[p * c + src]) / 255.0f;
    }
  }
  return t;
}

Image8 TensorToImage(const Tensor& t) {
  Image8 img;
  if (t.rank() == 2) {
    img.channels = 1;
  } else if (t.rank() == 3 && t.dim(2) == 3) {
    img.channels = 3;
  } else {
    throw DimensionError("image tensor must be H x W or H x W x 3");
  }
  img.height = static_cast<int>(t.dim(0));
  img.width = static_cast<int>(t.dim(1));
  img.data.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float v = std::clamp(t[i], 0.0f, 1.0f);
    img.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return img;
}

Image8 MaskToImage(const BinaryMask& mask) {
  Image8 img{mask.width, mask.height, 1, {}};
  img.data.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) img.data[i] = mask.bits[i] ? 255 : 0;
  return img;
}

BinaryMask ImageToMask(const Image8& image) {
  if (image.channels != 1) throw DataError("mask image must be single-channel");
  BinaryMask m(image.width, image.height);
  for (std::size_t i = 0; i < m.size(); ++i) m.bits[i] = image.data[i] != 0;
  return m;
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void WritePng(const std::filesystem::path& path, const Image8& image) {
  WriteFileBytes(path, EncodePng(image));
}

Image8 ReadPng(const std::filesystem::path& path) {
  return DecodePng(ReadFileBytes(path));
}

}  // namespace ois
