#include "ois/model/decoder.hpp"

namespace ois {

using numerics::AddInPlace;
using numerics::MatMul;
using numerics::MatMulBackward;

template <typename T>
UpConv2x<T>::UpConv2x(std::size_t in_channels, std::size_t out_channels,
                      std::mt19937_64& rng)
    : weight(XavierParameter<T>(in_channels, 4 * out_channels, rng)),
      bias(ConstantParameter<T>({out_channels}, T{0})),
      out_channels_(out_channels) {}

template <typename T>
BasicTensor<T> UpConv2x<T>::Forward(const BasicTensor<T>& x, std::size_t h,
                                    std::size_t w) const {
  const BasicTensor<T> taps = MatMul(x, weight.value);
  const std::size_t co = out_channels_;
  BasicTensor<T> out({4 * h * w, co});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      const T* src = taps.data() + (y * w + xx) * 4 * co;
      for (std::size_t dy = 0; dy < 2; ++dy) {
        for (std::size_t dx = 0; dx < 2; ++dx) {
          T* dst = out.data() + ((2 * y + dy) * 2 * w + 2 * xx + dx) * co;
          const T* s = src + (dy * 2 + dx) * co;
          for (std::size_t c = 0; c < co; ++c) dst[c] = s[c] + bias.value[c];
        }
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> UpConv2x<T>::Backward(const BasicTensor<T>& x, std::size_t h,
                                     std::size_t w,
                                     const BasicTensor<T>& grad_out) {
  const std::size_t co = out_channels_;
  BasicTensor<T> g_taps({h * w, 4 * co});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      T* dst = g_taps.data() + (y * w + xx) * 4 * co;
      for (std::size_t dy = 0; dy < 2; ++dy) {
        for (std::size_t dx = 0; dx < 2; ++dx) {
          const T* g = grad_out.data() + ((2 * y + dy) * 2 * w + 2 * xx + dx) * co;
          T* d = dst + (dy * 2 + dx) * co;
          for (std::size_t c = 0; c < co; ++c) {
            d[c] = g[c];
            bias.grad[c] += g[c];
          }
        }
      }
    }
  }
  const auto gm = MatMulBackward(x, weight.value, g_taps);
  AddInPlace(weight.grad, gm.b);
  return gm.a;
}

template <typename T>
void UpConv2x<T>::VisitParameters(const std::string& prefix,
                                  const ParamVisitor<T>& v) {
  v(prefix + "weight", weight);
  v(prefix + "bias", bias);
}

std::vector<std::size_t> MaskQuerySlots(const SlotOccupancy& occupancy) {
  std::vector<std::size_t> slots;
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    if (occupancy[s] == SlotKind::kPositive) slots.push_back(s);
  }
  if (!slots.empty()) return slots;
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    if (occupancy[s] != SlotKind::kNonPoint) slots.push_back(s);
  }
  if (!slots.empty()) return slots;
  for (std::size_t s = 0; s < kNumSlots; ++s) slots.push_back(s);
  return slots;
}

template <typename T>
MaskDecoder<T>::MaskDecoder(const ModelConfig& config, std::mt19937_64& rng)
    : up1(static_cast<std::size_t>(config.embed_dim),
          static_cast<std::size_t>(config.embed_dim / 2), rng),
      up2(static_cast<std::size_t>(config.embed_dim / 2),
          static_cast<std::size_t>(config.decoder_dim), rng),
      up1_norm_gain(ConstantParameter<T>(
          {static_cast<std::size_t>(config.embed_dim / 2)}, T{1})),
      up1_norm_bias(ConstantParameter<T>(
          {static_cast<std::size_t>(config.embed_dim / 2)}, T{0})),
      mlp_w1(XavierParameter<T>(static_cast<std::size_t>(config.embed_dim),
                                static_cast<std::size_t>(config.embed_dim),
                                rng)),
      mlp_b1(ConstantParameter<T>(
          {static_cast<std::size_t>(config.embed_dim)}, T{0})),
      mlp_w2(XavierParameter<T>(static_cast<std::size_t>(config.embed_dim),
                                static_cast<std::size_t>(config.decoder_dim),
                                rng)),
      mlp_b2(ConstantParameter<T>(
          {static_cast<std::size_t>(config.decoder_dim)}, T{0})),
      channels_(static_cast<std::size_t>(config.embed_dim)) {}

template <typename T>
BasicTensor<T> MaskDecoder<T>::Forward(const BasicTensor<T>& features,
                                       std::size_t h, std::size_t w,
                                       const BasicTensor<T>& sparse,
                                       const SlotOccupancy& occupancy,
                                       std::size_t out_h, std::size_t out_w,
                                       DecoderCache<T>* cache) const {
  if (features.rows() != h * w || features.cols() != channels_) {
    throw DimensionError("decoder: feature map shape mismatch");
  }
  BasicTensor<T> up1_pre = up1.Forward(features, h, w);
  numerics::LayerNormCache<T> norm_cache;
  BasicTensor<T> up1_normed =
      numerics::LayerNorm(up1_pre, up1_norm_gain.value, up1_norm_bias.value,
                          cache ? &norm_cache : nullptr);
  BasicTensor<T> up1_act = numerics::Gelu(up1_normed);
  BasicTensor<T> up2_pre = up2.Forward(up1_act, 2 * h, 2 * w);
  BasicTensor<T> pixels = numerics::Gelu(up2_pre);

  const std::vector<std::size_t> slots = MaskQuerySlots(occupancy);
  BasicTensor<T> pooled({1, channels_});
  const T inv = T{1} / static_cast<T>(slots.size());
  for (std::size_t s : slots) {
    for (std::size_t c = 0; c < channels_; ++c) pooled[c] += sparse.at(s, c) * inv;
  }
  BasicTensor<T> mlp_pre =
      numerics::AddRowBias(MatMul(pooled, mlp_w1.value), mlp_b1.value);
  BasicTensor<T> mlp_act = numerics::Gelu(mlp_pre);
  BasicTensor<T> embedding =
      numerics::AddRowBias(MatMul(mlp_act, mlp_w2.value), mlp_b2.value);

  const std::size_t lh = 4 * h, lw = 4 * w;
  BasicTensor<T> low =
      numerics::MatMulTransB(pixels, embedding).Reshaped({lh, lw, 1});
  BasicTensor<T> logits =
      numerics::BilinearResize(low, out_h, out_w).Reshaped({out_h, out_w});
  if (cache != nullptr) {
    cache->features = features;
    cache->up1_pre = std::move(up1_pre);
    cache->up1_norm = std::move(norm_cache);
    cache->up1_normed = std::move(up1_normed);
    cache->up1_act = std::move(up1_act);
    cache->up2_pre = std::move(up2_pre);
    cache->pixels = std::move(pixels);
    cache->pooled_slots = slots;
    cache->pooled = std::move(pooled);
    cache->mlp_pre = std::move(mlp_pre);
    cache->mlp_act = std::move(mlp_act);
    cache->mask_embedding = std::move(embedding);
    cache->h = h;
    cache->w = w;
    cache->out_h = out_h;
    cache->out_w = out_w;
  }
  return logits;
}

template <typename T>
typename MaskDecoder<T>::Grads MaskDecoder<T>::Backward(
    const DecoderCache<T>& cache, const BasicTensor<T>& grad_logits) {
  const std::size_t h = cache.h, w = cache.w;
  const BasicTensor<T> g_low = numerics::BilinearResizeBackward(
      grad_logits.Reshaped({cache.out_h, cache.out_w, 1}), 4 * h, 4 * w);
  const auto g_dot = numerics::MatMulTransBBackward(
      cache.pixels, cache.mask_embedding, g_low.Reshaped({16 * h * w, 1}));

  // Mask-embedding branch.
  const auto g_m2 = MatMulBackward(cache.mlp_act, mlp_w2.value, g_dot.b);
  AddInPlace(mlp_w2.grad, g_m2.b);
  numerics::AccumulateRowBiasGrad(g_dot.b, mlp_b2.grad);
  const BasicTensor<T> g_mpre = numerics::GeluBackward(cache.mlp_pre, g_m2.a);
  const auto g_m1 = MatMulBackward(cache.pooled, mlp_w1.value, g_mpre);
  AddInPlace(mlp_w1.grad, g_m1.b);
  numerics::AccumulateRowBiasGrad(g_mpre, mlp_b1.grad);
  Grads g;
  g.sparse = BasicTensor<T>({kNumSlots, channels_});
  const T inv = T{1} / static_cast<T>(cache.pooled_slots.size());
  for (std::size_t s : cache.pooled_slots) {
    for (std::size_t c = 0; c < channels_; ++c) g.sparse.at(s, c) += g_m1.a[c] * inv;
  }

  // Pixel branch.
  const BasicTensor<T> g_up2 = numerics::GeluBackward(cache.up2_pre, g_dot.a);
  const BasicTensor<T> g_act1 = up2.Backward(cache.up1_act, 2 * h, 2 * w, g_up2);
  const BasicTensor<T> g_norm1 = numerics::GeluBackward(cache.up1_normed, g_act1);
  const auto g_ln = numerics::LayerNormBackward(cache.up1_norm,
                                                up1_norm_gain.value, g_norm1);
  AddInPlace(up1_norm_gain.grad, g_ln.gain);
  AddInPlace(up1_norm_bias.grad, g_ln.bias);
  g.features = up1.Backward(cache.features, h, w, g_ln.x);
  return g;
}

template <typename T>
void MaskDecoder<T>::VisitParameters(const std::string& prefix,
                                     const ParamVisitor<T>& v) {
  up1.VisitParameters(prefix + "up1.", v);
  v(prefix + "up1.norm.gain", up1_norm_gain);
  v(prefix + "up1.norm.bias", up1_norm_bias);
  up2.VisitParameters(prefix + "up2.", v);
  v(prefix + "mlp.w1", mlp_w1);
  v(prefix + "mlp.b1", mlp_b1);
  v(prefix + "mlp.w2", mlp_w2);
  v(prefix + "mlp.b2", mlp_b2);
}

template class UpConv2x<float>;
template class UpConv2x<double>;
template class MaskDecoder<float>;
template class MaskDecoder<double>;

}  // namespace ois
