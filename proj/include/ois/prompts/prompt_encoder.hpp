#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ois/numerics/params.hpp"
#include "ois/numerics/tensor.hpp"
#include "ois/prompts/clicks.hpp"

namespace ois {

enum class SlotKind : std::uint8_t { kNonPoint, kPositive, kNegative };

using SlotOccupancy = std::array<SlotKind, kNumSlots>;

SlotOccupancy OccupancyOf(const ClickSet& clicks);

// One embedding per slot: [kNumSlots x C].
template <typename T>
struct SparseEmbeddings {
  BasicTensor<T> values;
  SlotOccupancy occupancy{};
};

// Click map projected to feature channels, flattened to [h*w x C].
template <typename T>
struct DenseEmbedding {
  BasicTensor<T> values;
  std::size_t height = 0;
  std::size_t width = 0;
};

// Scale applied to normalized [0,1) coordinates before the sinusoid ladder so
// the highest frequency resolves single pixels at typical model resolutions.
inline constexpr double kPositionScale = 256.0;

// Sinusoidal encoding of a normalized 2-D coordinate over `channels` dims:
// [sin(x w_k), sin(y w_k), cos(x w_k), cos(y w_k)] with
// w_k = 10000^(-k / (channels/4)). `channels` must be a multiple of 4.
std::vector<double> PositionalEncoding2d(double x_norm, double y_norm,
                                         std::size_t channels);

inline constexpr int kDefaultClickRadius = 5;

// Binary [H x W x 2] raster: channel 0 holds disks around positive clicks,
// channel 1 around negative clicks. A pixel is inside a disk when its
// Euclidean distance to the click is at most `radius`.
Tensor ClickRaster(const ClickSet& clicks, int width, int height, int radius);

// Mean-pools an [H x W x C] raster by integer factors to [h x w x C].
template <typename T>
BasicTensor<T> BoxDownsample(const BasicTensor<T>& x, std::size_t out_h,
                             std::size_t out_w);

template <typename T>
class SparsePromptEncoder {
 public:
  SparsePromptEncoder() = default;
  SparsePromptEncoder(std::size_t channels, std::mt19937_64& rng);

  // Occupied slot = positional encoding + polarity embedding; free slots hold
  // the non-point embedding. Throws CapacityError on slot overflow and
  // ValidationError for out-of-bounds clicks.
  SparseEmbeddings<T> Encode(const ClickSet& clicks, int width,
                             int height) const;

  // Every slot holds the non-point embedding; clicks contribute nothing.
  SparseEmbeddings<T> EncodeEmpty() const;

  void Backward(const SlotOccupancy& occupancy, const BasicTensor<T>& grad);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  std::size_t channels() const { return channels_; }

  Parameter<T> positive_type;
  Parameter<T> negative_type;
  Parameter<T> non_point;

 private:
  std::size_t channels_ = 0;
};

template <typename T>
struct DenseEncoderCache {
  BasicTensor<T> columns;  // im2col of the pooled raster, [h*w x 18]
};

// Two-channel click raster -> pooled to feature resolution -> one 3x3
// convolution to C channels.
template <typename T>
class DensePromptEncoder {
 public:
  DensePromptEncoder() = default;
  DensePromptEncoder(std::size_t channels, std::mt19937_64& rng);

  DenseEmbedding<T> Encode(const ClickSet& clicks, int width, int height,
                           std::size_t feat_h, std::size_t feat_w, int radius,
                           DenseEncoderCache<T>* cache = nullptr) const;

  // Convolution of an explicit [h x w x 2] pooled raster.
  DenseEmbedding<T> EncodePooled(const BasicTensor<T>& pooled,
                                 DenseEncoderCache<T>* cache = nullptr) const;

  void Backward(const DenseEncoderCache<T>& cache, const BasicTensor<T>& grad);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  Parameter<T> weight;  // [3*3*2 x C]
  Parameter<T> bias;    // [C]

 private:
  std::size_t channels_ = 0;
};

// 3x3, stride 1, zero-padded im2col of an [h x w x c] raster into
// [h*w x 9*c], column order (ky, kx, channel).
template <typename T>
BasicTensor<T> Im2Col3x3(const BasicTensor<T>& x);

}  // namespace ois
