#pragma once

#include <random>
#include <string>

#include "ois/numerics/cross_attention.hpp"
#include "ois/numerics/ops.hpp"
#include "ois/numerics/params.hpp"

namespace ois {

template <typename T>
struct OrderAttentionCache {
  CrossAttentionCache<T> attention;
  numerics::LayerNormCache<T> norm;
  BasicTensor<T> stack;
};

template <typename T>
struct OrderAttentionGrads {
  BasicTensor<T> sparse;    // dL/dS
  BasicTensor<T> features;  // dL/dF
};

// Cross-attention from sparse slots to image features whose logits are
// penalized by sigma * order mask, followed by residual and LayerNorm:
//   S' = LN(softmax(Q K^T / sqrt(C) - sigma M) V + S)
// sigma = softplus(sigma_raw) keeps the scale strictly positive.
template <typename T>
class OrderAttention {
 public:
  OrderAttention() = default;
  OrderAttention(std::size_t channels, std::mt19937_64& rng);

  // `stack` is [kNumSlots x hw]. With order_enabled() false the mask term is
  // dropped (sigma treated as 0).
  BasicTensor<T> Forward(const BasicTensor<T>& sparse,
                         const BasicTensor<T>& features,
                         const BasicTensor<T>& stack,
                         OrderAttentionCache<T>* cache = nullptr) const;

  OrderAttentionGrads<T> Backward(const OrderAttentionCache<T>& cache,
                                  const BasicTensor<T>& grad_out);

  // Attention weights with and without the order penalty, for inspection.
  BasicTensor<T> Weights(const BasicTensor<T>& sparse,
                         const BasicTensor<T>& features,
                         const BasicTensor<T>& stack, bool apply_order) const;

  T sigma() const;
  void set_order_enabled(bool enabled) { order_enabled_ = enabled; }
  bool order_enabled() const { return order_enabled_; }

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  CrossAttention<T> attention;
  Parameter<T> sigma_raw;  // scalar, shape [1]
  Parameter<T> norm_gain;
  Parameter<T> norm_bias;

 private:
  BasicTensor<T> PenaltyMask(const BasicTensor<T>& stack) const;

  bool order_enabled_ = true;
};

double Softplus(double x);
double InverseSoftplus(double y);

}  // namespace ois
