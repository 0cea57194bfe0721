#pragma once

#include <random>
#include <string>

#include "ois/numerics/params.hpp"
#include "ois/numerics/tensor.hpp"

namespace ois {

template <typename T>
struct CrossAttentionCache {
  BasicTensor<T> queries_in;  // S
  BasicTensor<T> keys_in;     // F
  BasicTensor<T> q, k, v;
  BasicTensor<T> probs;       // softmax weights [N x hw]
};

template <typename T>
struct CrossAttentionGrads {
  BasicTensor<T> queries;  // dL/dS
  BasicTensor<T> keys;     // dL/dF
  BasicTensor<T> mask;     // dL/d(additive mask)
};

// Single-head masked cross-attention with residual:
//   out = softmax(Q K^T / sqrt(C) + mask) V + S,
// Q = S Wq, K = F Wk, V = F Wv. Rows of `mask` that are entirely -inf
// contribute a zero attention term.
template <typename T>
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(std::size_t channels, std::mt19937_64& rng);

  BasicTensor<T> Forward(const BasicTensor<T>& queries,
                         const BasicTensor<T>& keys,
                         const BasicTensor<T>& additive_mask,
                         CrossAttentionCache<T>* cache = nullptr) const;

  // Scaled logits Q K^T / sqrt(C), before any mask.
  BasicTensor<T> Logits(const BasicTensor<T>& queries,
                        const BasicTensor<T>& keys) const;

  CrossAttentionGrads<T> Backward(const CrossAttentionCache<T>& cache,
                                  const BasicTensor<T>& grad_out);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  Parameter<T> wq, wk, wv;  // [C x C] each

 private:
  T scale_ = T{1};
};

}  // namespace ois
