#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ois/common/errors.hpp"
#include "ois/numerics/tensor.hpp"

namespace ois {

// Row-major binary raster.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  void set(int x, int y, bool v) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t size() const { return bits.size(); }
  std::size_t Count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  bool Empty() const { return Count() == 0; }

  // [H x W] tensor of 0/1 values.
  Tensor ToTensor() const {
    Tensor t({static_cast<std::size_t>(height), static_cast<std::size_t>(width)});
    for (std::size_t i = 0; i < bits.size(); ++i) t[i] = bits[i];
    return t;
  }

  // Pixels with value > threshold become 1.
  static BinaryMask FromTensor(const Tensor& t, float threshold = 0.5f) {
    if (t.rank() != 2) throw DimensionError("mask tensor must be H x W");
    BinaryMask m(static_cast<int>(t.dim(1)), static_cast<int>(t.dim(0)));
    for (std::size_t i = 0; i < t.size(); ++i) m.bits[i] = t[i] > threshold;
    return m;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

inline void RequireSameSize(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionError("mask sizes differ");
  }
}

}  // namespace ois
