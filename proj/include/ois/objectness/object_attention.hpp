#pragma once

#include <optional>
#include <random>
#include <string>

#include "ois/numerics/cross_attention.hpp"
#include "ois/numerics/ops.hpp"
#include "ois/numerics/params.hpp"
#include "ois/prompts/clicks.hpp"

namespace ois {

// Binary mask predicted in an earlier round, at feature resolution [h x w].
struct PreviousMask {
  Tensor values;
  int round = 0;
};

// Resizes a full-resolution binary mask [H x W] to [h x w] bilinearly and
// thresholds at 0.5.
PreviousMask DownsamplePreviousMask(const Tensor& mask, std::size_t feat_h,
                                    std::size_t feat_w, int round);

// [kNumSlots x h*w] additive mask with entries in {0, -inf}. Positive-half rows
// allow the previous foreground, negative-half rows allow its complement.
struct ObjectMaskStack {
  Tensor values;
};

ObjectMaskStack BuildObjectStack(const PreviousMask& prev);

template <typename T>
struct ObjectAttentionCache {
  CrossAttentionCache<T> attention;
  numerics::LayerNormCache<T> norm;
};

template <typename T>
struct ObjectAttentionGrads {
  BasicTensor<T> sparse;
  BasicTensor<T> features;
};

// Foreground/background separated cross-attention followed by LayerNorm:
//   S' = LN(softmax(Q K^T / sqrt(C) + H) V + S).
// Without a stack (first round) H is zero, i.e. plain cross-attention. A slot
// whose allowed region is empty gets a zero attention term, so S' = LN(S).
template <typename T>
class ObjectAttention {
 public:
  ObjectAttention() = default;
  ObjectAttention(std::size_t channels, std::mt19937_64& rng);

  BasicTensor<T> Forward(const BasicTensor<T>& sparse,
                         const BasicTensor<T>& features,
                         const ObjectMaskStack* stack,
                         ObjectAttentionCache<T>* cache = nullptr) const;

  ObjectAttentionGrads<T> Backward(const ObjectAttentionCache<T>& cache,
                                   const BasicTensor<T>& grad_out);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  CrossAttention<T> attention;
  Parameter<T> norm_gain;
  Parameter<T> norm_bias;
};

}  // namespace ois
