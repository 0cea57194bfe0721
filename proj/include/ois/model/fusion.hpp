#pragma once

#include <random>
#include <string>
#include <vector>

#include "ois/model/encoder.hpp"
#include "ois/objectness/object_attention.hpp"
#include "ois/order/order_attention.hpp"
#include "ois/order/order_map.hpp"
#include "ois/prompts/prompt_encoder.hpp"

namespace ois {

template <typename T>
struct FusionBlockCache {
  OrderAttentionCache<T> order;
  ObjectAttentionCache<T> object;
  BasicTensor<T> ffn_in;
  BasicTensor<T> ffn_pre;
  BasicTensor<T> ffn_act;
  numerics::LayerNormCache<T> ffn_norm;
};

// One order + object understanding block over the sparse embeddings:
//   S <- OrderAttention(S, F)      (includes LayerNorm)
//   S <- ObjectAttention(S, F)     (includes LayerNorm)
//   S <- LN(S + MLP(S))
template <typename T>
class FusionBlock {
 public:
  FusionBlock() = default;
  FusionBlock(std::size_t channels, std::size_t hidden, std::mt19937_64& rng);

  BasicTensor<T> Forward(const BasicTensor<T>& sparse,
                         const BasicTensor<T>& features,
                         const BasicTensor<T>& order_stack,
                         const ObjectMaskStack* object_stack,
                         FusionBlockCache<T>* cache = nullptr) const;

  // Returns dL/dS; adds dL/dF into `grad_features`.
  BasicTensor<T> Backward(const FusionBlockCache<T>& cache,
                          const BasicTensor<T>& grad_out,
                          BasicTensor<T>& grad_features);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  OrderAttention<T> order;
  ObjectAttention<T> object;
  Parameter<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Parameter<T> ffn_norm_gain, ffn_norm_bias;
};

template <typename T>
struct FuseCache {
  std::vector<FusionBlockCache<T>> blocks;
};

template <typename T>
struct FuseResult {
  BasicTensor<T> sparse;    // S_final [kNumSlots x C]
  BasicTensor<T> features;  // F_fused [h*w x C]
};

// F_fused = F + D, then every block updates S against F_fused.
template <typename T>
FuseResult<T> Fuse(const std::vector<FusionBlock<T>>& blocks,
                   const BasicTensor<T>& features,
                   const BasicTensor<T>* dense, const BasicTensor<T>& sparse,
                   const BasicTensor<T>& order_stack,
                   const ObjectMaskStack* object_stack,
                   FuseCache<T>* cache = nullptr);

}  // namespace ois
