#include "ois/model/fusion.hpp"

namespace ois {

using numerics::AddInPlace;
using numerics::MatMul;
using numerics::MatMulBackward;

template <typename T>
FusionBlock<T>::FusionBlock(std::size_t channels, std::size_t hidden,
                            std::mt19937_64& rng)
    : order(channels, rng),
      object(channels, rng),
      ffn_w1(XavierParameter<T>(channels, hidden, rng)),
      ffn_b1(ConstantParameter<T>({hidden}, T{0})),
      ffn_w2(XavierParameter<T>(hidden, channels, rng)),
      ffn_b2(ConstantParameter<T>({channels}, T{0})),
      ffn_norm_gain(ConstantParameter<T>({channels}, T{1})),
      ffn_norm_bias(ConstantParameter<T>({channels}, T{0})) {}

template <typename T>
BasicTensor<T> FusionBlock<T>::Forward(const BasicTensor<T>& sparse,
                                       const BasicTensor<T>& features,
                                       const BasicTensor<T>& order_stack,
                                       const ObjectMaskStack* object_stack,
                                       FusionBlockCache<T>* cache) const {
  BasicTensor<T> s = order.Forward(sparse, features, order_stack,
                                   cache ? &cache->order : nullptr);
  s = object.Forward(s, features, object_stack,
                     cache ? &cache->object : nullptr);
  BasicTensor<T> pre = numerics::AddRowBias(MatMul(s, ffn_w1.value), ffn_b1.value);
  BasicTensor<T> act = numerics::Gelu(pre);
  BasicTensor<T> res = numerics::Add(
      s, numerics::AddRowBias(MatMul(act, ffn_w2.value), ffn_b2.value));
  BasicTensor<T> out =
      numerics::LayerNorm(res, ffn_norm_gain.value, ffn_norm_bias.value,
                          cache ? &cache->ffn_norm : nullptr);
  if (cache != nullptr) {
    cache->ffn_in = std::move(s);
    cache->ffn_pre = std::move(pre);
    cache->ffn_act = std::move(act);
  }
  return out;
}

template <typename T>
BasicTensor<T> FusionBlock<T>::Backward(const FusionBlockCache<T>& cache,
                                        const BasicTensor<T>& grad_out,
                                        BasicTensor<T>& grad_features) {
  const auto g_norm = numerics::LayerNormBackward(
      cache.ffn_norm, ffn_norm_gain.value, grad_out);
  AddInPlace(ffn_norm_gain.grad, g_norm.gain);
  AddInPlace(ffn_norm_bias.grad, g_norm.bias);
  BasicTensor<T> g_s = g_norm.x;
  const auto g2 = MatMulBackward(cache.ffn_act, ffn_w2.value, g_norm.x);
  AddInPlace(ffn_w2.grad, g2.b);
  numerics::AccumulateRowBiasGrad(g_norm.x, ffn_b2.grad);
  const BasicTensor<T> g_pre = numerics::GeluBackward(cache.ffn_pre, g2.a);
  const auto g1 = MatMulBackward(cache.ffn_in, ffn_w1.value, g_pre);
  AddInPlace(ffn_w1.grad, g1.b);
  numerics::AccumulateRowBiasGrad(g_pre, ffn_b1.grad);
  AddInPlace(g_s, g1.a);

  const auto g_obj = object.Backward(cache.object, g_s);
  AddInPlace(grad_features, g_obj.features);
  const auto g_ord = order.Backward(cache.order, g_obj.sparse);
  AddInPlace(grad_features, g_ord.features);
  return g_ord.sparse;
}

template <typename T>
void FusionBlock<T>::VisitParameters(const std::string& prefix,
                                     const ParamVisitor<T>& v) {
  order.VisitParameters(prefix + "order.", v);
  object.VisitParameters(prefix + "object.", v);
  v(prefix + "ffn.w1", ffn_w1);
  v(prefix + "ffn.b1", ffn_b1);
  v(prefix + "ffn.w2", ffn_w2);
  v(prefix + "ffn.b2", ffn_b2);
  v(prefix + "ffn.norm.gain", ffn_norm_gain);
  v(prefix + "ffn.norm.bias", ffn_norm_bias);
}

template <typename T>
FuseResult<T> Fuse(const std::vector<FusionBlock<T>>& blocks,
                   const BasicTensor<T>& features,
                   const BasicTensor<T>* dense, const BasicTensor<T>& sparse,
                   const BasicTensor<T>& order_stack,
                   const ObjectMaskStack* object_stack, FuseCache<T>* cache) {
  FuseResult<T> out;
  out.features = dense != nullptr ? numerics::Add(features, *dense) : features;
  out.sparse = sparse;
  if (cache != nullptr) cache->blocks.resize(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    out.sparse = blocks[b].Forward(out.sparse, out.features, order_stack,
                                   object_stack,
                                   cache ? &cache->blocks[b] : nullptr);
  }
  return out;
}

template class FusionBlock<float>;
template class FusionBlock<double>;
template FuseResult<float> Fuse(const std::vector<FusionBlock<float>>&,
                                const BasicTensor<float>&,
                                const BasicTensor<float>*,
                                const BasicTensor<float>&,
                                const BasicTensor<float>&,
                                const ObjectMaskStack*, FuseCache<float>*);
template FuseResult<double> Fuse(const std::vector<FusionBlock<double>>&,
                                 const BasicTensor<double>&,
                                 const BasicTensor<double>*,
                                 const BasicTensor<double>&,
                                 const BasicTensor<double>&,
                                 const ObjectMaskStack*, FuseCache<double>*);

}  // namespace ois
