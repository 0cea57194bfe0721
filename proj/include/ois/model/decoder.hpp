#pragma once

#include <random>
#include <string>

#include "ois/model/config.hpp"
#include "ois/numerics/ops.hpp"
#include "ois/numerics/params.hpp"
#include "ois/prompts/prompt_encoder.hpp"

namespace ois {

// Stride-2, kernel-2 transposed convolution on [h x w x Cin] stored as
// [h*w x Cin]; output is [2h*2w x Cout].
template <typename T>
class UpConv2x {
 public:
  UpConv2x() = default;
  UpConv2x(std::size_t in_channels, std::size_t out_channels,
           std::mt19937_64& rng);

  BasicTensor<T> Forward(const BasicTensor<T>& x, std::size_t h,
                         std::size_t w) const;
  // Returns dL/dx; accumulates weight and bias gradients.
  BasicTensor<T> Backward(const BasicTensor<T>& x, std::size_t h,
                          std::size_t w, const BasicTensor<T>& grad_out);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  Parameter<T> weight;  // [Cin x 4*Cout], column = (dy*2 + dx)*Cout + c
  Parameter<T> bias;    // [Cout]

 private:
  std::size_t out_channels_ = 0;
};

template <typename T>
struct DecoderCache {
  BasicTensor<T> features;  // F_fused
  BasicTensor<T> up1_pre;
  numerics::LayerNormCache<T> up1_norm;
  BasicTensor<T> up1_normed;
  BasicTensor<T> up1_act;
  BasicTensor<T> up2_pre;
  BasicTensor<T> pixels;  // [4h*4w x D]
  std::vector<std::size_t> pooled_slots;
  BasicTensor<T> pooled;  // [1 x C]
  BasicTensor<T> mlp_pre;
  BasicTensor<T> mlp_act;
  BasicTensor<T> mask_embedding;  // [1 x D]
  std::size_t h = 0, w = 0;
  std::size_t out_h = 0, out_w = 0;
};

// Slots whose final embeddings form the mask query: occupied positive slots,
// else every occupied slot, else all slots.
std::vector<std::size_t> MaskQuerySlots(const SlotOccupancy& occupancy);

// Per-pixel features: two UpConv2x stages (LN + GELU after the first, GELU
// after the second). Mask embedding: 2-layer MLP over the mean of the query
// slots. Logits: per-pixel inner product, bilinearly resized to image size.
template <typename T>
class MaskDecoder {
 public:
  MaskDecoder() = default;
  MaskDecoder(const ModelConfig& config, std::mt19937_64& rng);

  BasicTensor<T> Forward(const BasicTensor<T>& features, std::size_t h,
                         std::size_t w, const BasicTensor<T>& sparse,
                         const SlotOccupancy& occupancy, std::size_t out_h,
                         std::size_t out_w,
                         DecoderCache<T>* cache = nullptr) const;

  struct Grads {
    BasicTensor<T> features;
    BasicTensor<T> sparse;
  };
  Grads Backward(const DecoderCache<T>& cache, const BasicTensor<T>& grad_logits);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  UpConv2x<T> up1, up2;
  Parameter<T> up1_norm_gain, up1_norm_bias;
  Parameter<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;

 private:
  std::size_t channels_ = 0;
};

}  // namespace ois
