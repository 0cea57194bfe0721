#include "ois/prompts/prompt_encoder.hpp"

#include <cmath>

#include "ois/common/errors.hpp"
#include "ois/numerics/ops.hpp"

namespace ois {

SlotOccupancy OccupancyOf(const ClickSet& clicks) {
  SlotOccupancy occ;
  occ.fill(SlotKind::kNonPoint);
  for (std::size_t i = 0; i < clicks.positives().size(); ++i) {
    occ[i] = SlotKind::kPositive;
  }
  for (std::size_t i = 0; i < clicks.negatives().size(); ++i) {
    occ[kSlotsPerPolarity + i] = SlotKind::kNegative;
  }
  return occ;
}

std::vector<double> PositionalEncoding2d(double x_norm, double y_norm,
                                         std::size_t channels) {
  if (channels % 4 != 0 || channels == 0) {
    throw DimensionError("positional encoding needs channels divisible by 4");
  }
  const std::size_t ladder = channels / 4;
  std::vector<double> out(channels);
  const double px = x_norm * kPositionScale;
  const double py = y_norm * kPositionScale;
  for (std::size_t k = 0; k < ladder; ++k) {
    const double freq =
        std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(ladder));
    out[k] = std::sin(px * freq);
    out[ladder + k] = std::sin(py * freq);
    out[2 * ladder + k] = std::cos(px * freq);
    out[3 * ladder + k] = std::cos(py * freq);
  }
  return out;
}

Tensor ClickRaster(const ClickSet& clicks, int width, int height, int radius) {
  if (radius < 1) throw ValidationError("click radius must be >= 1");
  Tensor raster({static_cast<std::size_t>(height),
                 static_cast<std::size_t>(width), 2});
  const long r2 = static_cast<long>(radius) * radius;
  for (const Click& c : clicks.history()) {
    const std::size_t ch = c.polarity == Polarity::kPositive ? 0 : 1;
    for (int y = std::max(0, c.y - radius);
         y <= std::min(height - 1, c.y + radius); ++y) {
      for (int x = std::max(0, c.x - radius);
           x <= std::min(width - 1, c.x + radius); ++x) {
        const long dx = x - c.x, dy = y - c.y;
        if (dx * dx + dy * dy <= r2) {
          raster.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
                    ch) = 1.0f;
        }
      }
    }
  }
  return raster;
}

template <typename T>
BasicTensor<T> BoxDownsample(const BasicTensor<T>& x, std::size_t out_h,
                             std::size_t out_w) {
  const std::size_t in_h = x.dim(0), in_w = x.dim(1), c = x.dim(2);
  if (out_h == 0 || out_w == 0 || in_h % out_h != 0 || in_w % out_w != 0) {
    throw DimensionError("box downsample needs integer factors, got " +
                         ShapeToString(x.shape()) + " -> " +
                         std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const std::size_t fy = in_h / out_h, fx = in_w / out_w;
  BasicTensor<T> out({out_h, out_w, c});
  const T inv = T{1} / static_cast<T>(fy * fx);
  for (std::size_t y = 0; y < in_h; ++y) {
    for (std::size_t xx = 0; xx < in_w; ++xx) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        out.at(y / fy, xx / fx, ch) += x.at(y, xx, ch) * inv;
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> Im2Col3x3(const BasicTensor<T>& x) {
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  BasicTensor<T> cols({h * w, 9 * c});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      T* row = cols.data() + (y * w + xx) * 9 * c;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const long sy = static_cast<long>(y) + ky - 1;
          const long sx = static_cast<long>(xx) + kx - 1;
          if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) ||
              sx >= static_cast<long>(w)) {
            continue;
          }
          for (std::size_t ch = 0; ch < c; ++ch) {
            row[(ky * 3 + kx) * c + ch] = x.at(sy, sx, ch);
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
SparsePromptEncoder<T>::SparsePromptEncoder(std::size_t channels,
                                            std::mt19937_64& rng)
    : positive_type(NormalParameter<T>({channels}, 1.0, rng)),
      negative_type(NormalParameter<T>({channels}, 1.0, rng)),
      non_point(NormalParameter<T>({channels}, 1.0, rng)),
      channels_(channels) {}

template <typename T>
SparseEmbeddings<T> SparsePromptEncoder<T>::Encode(const ClickSet& clicks,
                                                   int width,
                                                   int height) const {
  clicks.CheckBounds(width, height);
  if (clicks.positives().size() > kSlotsPerPolarity ||
      clicks.negatives().size() > kSlotsPerPolarity) {
    throw CapacityError("click set exceeds the sparse slot budget");
  }
  SparseEmbeddings<T> out = EncodeEmpty();
  out.occupancy = OccupancyOf(clicks);
  auto write_slot = [&](std::size_t slot, const Click& c,
                        const BasicTensor<T>& type) {
    const auto pe = PositionalEncoding2d(
        static_cast<double>(c.x) / width, static_cast<double>(c.y) / height,
        channels_);
    for (std::size_t j = 0; j < channels_; ++j) {
      out.values.at(slot, j) = static_cast<T>(pe[j]) + type[j];
    }
  };
  for (std::size_t i = 0; i < clicks.positives().size(); ++i) {
    write_slot(i, clicks.positives()[i], positive_type.value);
  }
  for (std::size_t i = 0; i < clicks.negatives().size(); ++i) {
    write_slot(kSlotsPerPolarity + i, clicks.negatives()[i],
               negative_type.value);
  }
  return out;
}

template <typename T>
SparseEmbeddings<T> SparsePromptEncoder<T>::EncodeEmpty() const {
  SparseEmbeddings<T> out;
  out.values = BasicTensor<T>({kNumSlots, channels_});
  out.occupancy.fill(SlotKind::kNonPoint);
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    for (std::size_t j = 0; j < channels_; ++j) {
      out.values.at(s, j) = non_point.value[j];
    }
  }
  return out;
}

template <typename T>
void SparsePromptEncoder<T>::Backward(const SlotOccupancy& occupancy,
                                      const BasicTensor<T>& grad) {
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    Parameter<T>& target = occupancy[s] == SlotKind::kPositive ? positive_type
                           : occupancy[s] == SlotKind::kNegative
                               ? negative_type
                               : non_point;
    for (std::size_t j = 0; j < channels_; ++j) {
      target.grad[j] += grad.at(s, j);
    }
  }
}

template <typename T>
void SparsePromptEncoder<T>::VisitParameters(const std::string& prefix,
                                             const ParamVisitor<T>& v) {
  v(prefix + "positive_type", positive_type);
  v(prefix + "negative_type", negative_type);
  v(prefix + "non_point", non_point);
}

template <typename T>
DensePromptEncoder<T>::DensePromptEncoder(std::size_t channels,
                                          std::mt19937_64& rng)
    : weight(XavierParameter<T>(18, channels, rng)),
      bias(ConstantParameter<T>({channels}, T{0})),
      channels_(channels) {}

template <typename T>
DenseEmbedding<T> DensePromptEncoder<T>::Encode(
    const ClickSet& clicks, int width, int height, std::size_t feat_h,
    std::size_t feat_w, int radius, DenseEncoderCache<T>* cache) const {
  const Tensor raster = ClickRaster(clicks, width, height, radius);
  return EncodePooled(
      BoxDownsample(raster.template Cast<T>(), feat_h, feat_w), cache);
}

template <typename T>
DenseEmbedding<T> DensePromptEncoder<T>::EncodePooled(
    const BasicTensor<T>& pooled, DenseEncoderCache<T>* cache) const {
  if (pooled.rank() != 3 || pooled.dim(2) != 2) {
    throw DimensionError("dense encoder expects an [h x w x 2] raster");
  }
  BasicTensor<T> cols = Im2Col3x3(pooled);
  DenseEmbedding<T> out;
  out.height = pooled.dim(0);
  out.width = pooled.dim(1);
  out.values =
      numerics::AddRowBias(numerics::MatMul(cols, weight.value), bias.value);
  if (cache != nullptr) cache->columns = std::move(cols);
  return out;
}

template <typename T>
void DensePromptEncoder<T>::Backward(const DenseEncoderCache<T>& cache,
                                     const BasicTensor<T>& grad) {
  const auto g = numerics::MatMulBackward(cache.columns, weight.value, grad);
  numerics::AddInPlace(weight.grad, g.b);
  numerics::AccumulateRowBiasGrad(grad, bias.grad);
}

template <typename T>
void DensePromptEncoder<T>::VisitParameters(const std::string& prefix,
                                            const ParamVisitor<T>& v) {
  v(prefix + "weight", weight);
  v(prefix + "bias", bias);
}

template BasicTensor<float> BoxDownsample(const BasicTensor<float>&,
                                          std::size_t, std::size_t);
template BasicTensor<double> BoxDownsample(const BasicTensor<double>&,
                                           std::size_t, std::size_t);
template BasicTensor<float> Im2Col3x3(const BasicTensor<float>&);
template BasicTensor<double> Im2Col3x3(const BasicTensor<double>&);
template class SparsePromptEncoder<float>;
template class SparsePromptEncoder<double>;
template class DensePromptEncoder<float>;
template class DensePromptEncoder<double>;

}  // namespace ois
