#include "ois/numerics/cross_attention.hpp"

#include <cmath>

#include "ois/numerics/ops.hpp"

namespace ois {

using numerics::MatMul;
using numerics::MatMulTransB;

template <typename T>
CrossAttention<T>::CrossAttention(std::size_t channels, std::mt19937_64& rng)
    : wq(XavierParameter<T>(channels, channels, rng)),
      wk(XavierParameter<T>(channels, channels, rng)),
      wv(XavierParameter<T>(channels, channels, rng)),
      scale_(T{1} / std::sqrt(static_cast<T>(channels))) {}

template <typename T>
BasicTensor<T> CrossAttention<T>::Logits(const BasicTensor<T>& queries,
                                         const BasicTensor<T>& keys) const {
  return numerics::Scale(
      MatMulTransB(MatMul(queries, wq.value), MatMul(keys, wk.value)), scale_);
}

template <typename T>
BasicTensor<T> CrossAttention<T>::Forward(const BasicTensor<T>& queries,
                                          const BasicTensor<T>& keys,
                                          const BasicTensor<T>& additive_mask,
                                          CrossAttentionCache<T>* cache) const {
  if (queries.cols() != wq.value.dim(0) || keys.cols() != wk.value.dim(0)) {
    throw DimensionError("cross attention: channel mismatch");
  }
  if (additive_mask.rank() != 2 || additive_mask.dim(0) != queries.rows() ||
      additive_mask.dim(1) != keys.rows()) {
    throw DimensionError("cross attention: mask " +
                         ShapeToString(additive_mask.shape()) +
                         " does not match " + std::to_string(queries.rows()) +
                         " queries x " + std::to_string(keys.rows()) + " keys");
  }
  BasicTensor<T> q = MatMul(queries, wq.value);
  BasicTensor<T> k = MatMul(keys, wk.value);
  BasicTensor<T> v = MatMul(keys, wv.value);
  BasicTensor<T> logits = numerics::Scale(MatMulTransB(q, k), scale_);
  BasicTensor<T> probs = numerics::MaskedSoftmax(logits, additive_mask);
  BasicTensor<T> out = numerics::Add(MatMul(probs, v), queries);
  numerics::CheckFinite(out, "cross_attention");
  if (cache != nullptr) {
    cache->queries_in = queries;
    cache->keys_in = keys;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
  }
  return out;
}

template <typename T>
CrossAttentionGrads<T> CrossAttention<T>::Backward(
    const CrossAttentionCache<T>& cache, const BasicTensor<T>& grad_out) {
  CrossAttentionGrads<T> g;
  // out = P V + S
  const auto g_pv = numerics::MatMulBackward(cache.probs, cache.v, grad_out);
  BasicTensor<T> g_pre = numerics::SoftmaxBackward(cache.probs, g_pv.a);
  g.mask = g_pre;
  const auto g_qk = numerics::MatMulTransBBackward(
      cache.q, cache.k, numerics::Scale(g_pre, scale_));
  const auto g_wq = numerics::MatMulBackward(cache.queries_in, wq.value, g_qk.a);
  const auto g_wk = numerics::MatMulBackward(cache.keys_in, wk.value, g_qk.b);
  const auto g_wv = numerics::MatMulBackward(cache.keys_in, wv.value, g_pv.b);
  numerics::AddInPlace(wq.grad, g_wq.b);
  numerics::AddInPlace(wk.grad, g_wk.b);
  numerics::AddInPlace(wv.grad, g_wv.b);
  g.queries = numerics::Add(grad_out, g_wq.a);
  g.keys = numerics::Add(g_wk.a, g_wv.a);
  return g;
}

template <typename T>
void CrossAttention<T>::VisitParameters(const std::string& prefix,
                                        const ParamVisitor<T>& v) {
  v(prefix + "wq", wq);
  v(prefix + "wk", wk);
  v(prefix + "wv", wv);
}

template class CrossAttention<float>;
template class CrossAttention<double>;

}  // namespace ois
