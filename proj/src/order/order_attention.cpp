#include "ois/order/order_attention.hpp"

#include <cmath>

namespace ois {

double Softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double InverseSoftplus(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}

template <typename T>
OrderAttention<T>::OrderAttention(std::size_t channels, std::mt19937_64& rng)
    : attention(channels, rng),
      sigma_raw(ConstantParameter<T>({1}, static_cast<T>(InverseSoftplus(1.0)))),
      norm_gain(ConstantParameter<T>({channels}, T{1})),
      norm_bias(ConstantParameter<T>({channels}, T{0})) {}

template <typename T>
T OrderAttention<T>::sigma() const {
  return static_cast<T>(Softplus(static_cast<double>(sigma_raw.value[0])));
}

template <typename T>
BasicTensor<T> OrderAttention<T>::PenaltyMask(
    const BasicTensor<T>& stack) const {
  if (!order_enabled_) return BasicTensor<T>(stack.shape());
  return numerics::Scale(stack, -sigma());
}

template <typename T>
BasicTensor<T> OrderAttention<T>::Forward(const BasicTensor<T>& sparse,
                                          const BasicTensor<T>& features,
                                          const BasicTensor<T>& stack,
                                          OrderAttentionCache<T>* cache) const {
  const BasicTensor<T> mask = PenaltyMask(stack);
  BasicTensor<T> attended = attention.Forward(
      sparse, features, mask, cache ? &cache->attention : nullptr);
  if (cache != nullptr) cache->stack = stack;
  return numerics::LayerNorm(attended, norm_gain.value, norm_bias.value,
                             cache ? &cache->norm : nullptr);
}

template <typename T>
OrderAttentionGrads<T> OrderAttention<T>::Backward(
    const OrderAttentionCache<T>& cache, const BasicTensor<T>& grad_out) {
  const auto gn =
      numerics::LayerNormBackward(cache.norm, norm_gain.value, grad_out);
  numerics::AddInPlace(norm_gain.grad, gn.gain);
  numerics::AddInPlace(norm_bias.grad, gn.bias);
  const auto ga = attention.Backward(cache.attention, gn.x);
  if (order_enabled_) {
    // mask = -softplus(raw) * M  =>  dL/draw = -sum(dL/dmask * M) * sigmoid(raw)
    T dot = 0;
    for (std::size_t i = 0; i < ga.mask.size(); ++i) {
      dot += ga.mask[i] * cache.stack[i];
    }
    sigma_raw.grad[0] += -dot * numerics::Sigmoid(sigma_raw.value[0]);
  }
  return {ga.queries, ga.keys};
}

template <typename T>
BasicTensor<T> OrderAttention<T>::Weights(const BasicTensor<T>& sparse,
                                          const BasicTensor<T>& features,
                                          const BasicTensor<T>& stack,
                                          bool apply_order) const {
  const BasicTensor<T> logits = attention.Logits(sparse, features);
  const BasicTensor<T> mask = apply_order ? numerics::Scale(stack, -sigma())
                                          : BasicTensor<T>(stack.shape());
  return numerics::MaskedSoftmax(logits, mask);
}

template <typename T>
void OrderAttention<T>::VisitParameters(const std::string& prefix,
                                        const ParamVisitor<T>& v) {
  attention.VisitParameters(prefix + "attn.", v);
  v(prefix + "sigma_raw", sigma_raw);
  v(prefix + "norm.gain", norm_gain);
  v(prefix + "norm.bias", norm_bias);
}

template class OrderAttention<float>;
template class OrderAttention<double>;

}  // namespace ois
