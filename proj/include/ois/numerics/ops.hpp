#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "ois/numerics/tensor.hpp"

// Dense-array math used by every layer of the model. Each differentiable op
// has a matching *Backward function that maps the gradient of the output to
// gradients of the inputs. All functions are explicitly instantiated for
// float and double.
namespace ois::numerics {

// Throws NumericError naming `op` if any element is NaN or Inf.
template <typename T>
void CheckFinite(const BasicTensor<T>& x, std::string_view op);

// Raw GEMM over row-major buffers: c (+)= op(a) * op(b), with op(a) m x k and
// op(b) k x n. Backed by Eigen.
template <typename T>
void Gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate);

// [m x k] * [k x n] -> [m x n].
template <typename T>
BasicTensor<T> MatMul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
struct MatMulGrads {
  BasicTensor<T> a;
  BasicTensor<T> b;
};

template <typename T>
MatMulGrads<T> MatMulBackward(const BasicTensor<T>& a, const BasicTensor<T>& b,
                              const BasicTensor<T>& grad_out);

// [m x k] * [n x k]^T -> [m x n].
template <typename T>
BasicTensor<T> MatMulTransB(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
MatMulGrads<T> MatMulTransBBackward(const BasicTensor<T>& a,
                                    const BasicTensor<T>& b,
                                    const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> Add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
void AddInPlace(BasicTensor<T>& acc, const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> Scale(const BasicTensor<T>& x, T factor);

// Adds `bias` (length = last dim) to every row.
template <typename T>
BasicTensor<T> AddRowBias(const BasicTensor<T>& x, const BasicTensor<T>& bias);

// Column sums of a row-major matrix view, accumulated into `bias_grad`.
template <typename T>
void AccumulateRowBiasGrad(const BasicTensor<T>& grad_out,
                           BasicTensor<T>& bias_grad);

// Row-wise softmax of (logits + additive_mask). Mask entries may be -inf.
// A row whose every entry is -inf yields an all-zero row.
template <typename T>
BasicTensor<T> MaskedSoftmax(const BasicTensor<T>& logits,
                             const BasicTensor<T>& additive_mask);

// Gradient w.r.t. the pre-softmax sum (logits + mask), given the softmax
// output `probs`. Rows that were all -inf receive zero gradient.
template <typename T>
BasicTensor<T> SoftmaxBackward(const BasicTensor<T>& probs,
                               const BasicTensor<T>& grad_out);

template <typename T>
struct LayerNormCache {
  BasicTensor<T> normalized;
  std::vector<T> inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

// Normalizes each row over the last axis, then applies gain and bias.
template <typename T>
BasicTensor<T> LayerNorm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                         const BasicTensor<T>& bias,
                         LayerNormCache<T>* cache = nullptr);

template <typename T>
struct LayerNormGrads {
  BasicTensor<T> x;
  BasicTensor<T> gain;
  BasicTensor<T> bias;
};

template <typename T>
LayerNormGrads<T> LayerNormBackward(const LayerNormCache<T>& cache,
                                    const BasicTensor<T>& gain,
                                    const BasicTensor<T>& grad_out);

// Exact (erf) GELU.
template <typename T>
BasicTensor<T> Gelu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> GeluBackward(const BasicTensor<T>& x,
                            const BasicTensor<T>& grad_out);

template <typename T>
T Sigmoid(T x);

// Bilinear interpolation of an [H x W x C] raster with half-pixel centers
// (align_corners = false). Same-size resizes are exact copies.
template <typename T>
BasicTensor<T> BilinearResize(const BasicTensor<T>& x, std::size_t out_h,
                              std::size_t out_w);

// Adjoint of BilinearResize: scatters an [out_h x out_w x C] gradient back to
// [in_h x in_w x C].
template <typename T>
BasicTensor<T> BilinearResizeBackward(const BasicTensor<T>& grad_out,
                                      std::size_t in_h, std::size_t in_w);

}  // namespace ois::numerics
