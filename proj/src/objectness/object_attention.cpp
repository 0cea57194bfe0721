#include "ois/objectness/object_attention.hpp"

#include <limits>

#include "ois/prompts/clicks.hpp"

namespace ois {

PreviousMask DownsamplePreviousMask(const Tensor& mask, std::size_t feat_h,
                                    std::size_t feat_w, int round) {
  if (mask.rank() != 2) {
    throw DimensionError("previous mask must be H x W");
  }
  const Tensor resized = numerics::BilinearResize(
      mask.Reshaped({mask.dim(0), mask.dim(1), 1}), feat_h, feat_w);
  PreviousMask prev{Tensor({feat_h, feat_w}), round};
  for (std::size_t i = 0; i < resized.size(); ++i) {
    prev.values[i] = resized[i] >= 0.5f ? 1.0f : 0.0f;
  }
  return prev;
}

ObjectMaskStack BuildObjectStack(const PreviousMask& prev) {
  const std::size_t hw = prev.values.size();
  constexpr float kBlocked = -std::numeric_limits<float>::infinity();
  ObjectMaskStack stack{Tensor({kNumSlots, hw})};
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    const bool positive_half = s < kSlotsPerPolarity;
    auto row = stack.values.row(s);
    for (std::size_t p = 0; p < hw; ++p) {
      const bool foreground = prev.values[p] >= 0.5f;
      row[p] = (foreground == positive_half) ? 0.0f : kBlocked;
    }
  }
  return stack;
}

template <typename T>
ObjectAttention<T>::ObjectAttention(std::size_t channels, std::mt19937_64& rng)
    : attention(channels, rng),
      norm_gain(ConstantParameter<T>({channels}, T{1})),
      norm_bias(ConstantParameter<T>({channels}, T{0})) {}

template <typename T>
BasicTensor<T> ObjectAttention<T>::Forward(const BasicTensor<T>& sparse,
                                           const BasicTensor<T>& features,
                                           const ObjectMaskStack* stack,
                                           ObjectAttentionCache<T>* cache) const {
  const BasicTensor<T> mask =
      stack != nullptr ? stack->values.template Cast<T>()
                       : BasicTensor<T>({sparse.rows(), features.rows()});
  BasicTensor<T> attended = attention.Forward(
      sparse, features, mask, cache ? &cache->attention : nullptr);
  return numerics::LayerNorm(attended, norm_gain.value, norm_bias.value,
                             cache ? &cache->norm : nullptr);
}

template <typename T>
ObjectAttentionGrads<T> ObjectAttention<T>::Backward(
    const ObjectAttentionCache<T>& cache, const BasicTensor<T>& grad_out) {
  const auto gn =
      numerics::LayerNormBackward(cache.norm, norm_gain.value, grad_out);
  numerics::AddInPlace(norm_gain.grad, gn.gain);
  numerics::AddInPlace(norm_bias.grad, gn.bias);
  const auto ga = attention.Backward(cache.attention, gn.x);
  return {ga.queries, ga.keys};
}

template <typename T>
void ObjectAttention<T>::VisitParameters(const std::string& prefix,
                                         const ParamVisitor<T>& v) {
  attention.VisitParameters(prefix + "attn.", v);
  v(prefix + "norm.gain", norm_gain);
  v(prefix + "norm.bias", norm_bias);
}

template class ObjectAttention<float>;
template class ObjectAttention<double>;

}  // namespace ois
