#pragma once

#include "ois/model/config.hpp"
#include "ois/numerics/tensor.hpp"

namespace ois {

template <typename T>
struct LossResult {
  T value = 0;
  BasicTensor<T> grad;  // dL/dlogits
};

// Normalized focal loss over sigmoid logits. With p_t the probability of the
// true class and w = (1 - p_t)^gamma,
//   L = sum(w * -log p_t) / (sum(w) + eps).
// The gradient is exact, including the dependence of the normalizer on the
// logits. Throws ValidationError for a non-binary target, DimensionError for a
// shape mismatch.
template <typename T>
LossResult<T> NormalizedFocalLoss(const BasicTensor<T>& logits,
                                  const Tensor& target, const LossConfig& cfg);

}  // namespace ois
