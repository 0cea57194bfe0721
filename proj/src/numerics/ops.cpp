#include "ois/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ois {

std::string ShapeToString(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace numerics {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void RequireRank2(const Shape& s, std::string_view op) {
  if (s.size() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         ShapeToString(s));
  }
}

void RequireSameShape(const Shape& a, const Shape& b, std::string_view op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         ShapeToString(a) + " vs " + ShapeToString(b));
  }
}

}  // namespace

template <typename T>
void CheckFinite(const BasicTensor<T>& x, std::string_view op) {
  for (T v : x.values()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite value");
    }
  }
}

template <typename T>
void Gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  using Map = Eigen::Map<const RowMat<T>>;
  Eigen::Map<RowMat<T>> cm(c, m, n);
  const auto am = trans_a ? Map(a, k, m) : Map(a, m, k);
  const auto bm = trans_b ? Map(b, n, k) : Map(b, k, n);
  if (!accumulate) cm.setZero();
  if (trans_a && trans_b) {
    cm.noalias() += am.transpose() * bm.transpose();
  } else if (trans_a) {
    cm.noalias() += am.transpose() * bm;
  } else if (trans_b) {
    cm.noalias() += am * bm.transpose();
  } else {
    cm.noalias() += am * bm;
  }
}

template <typename T>
BasicTensor<T> MatMul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireRank2(a.shape(), "matmul");
  RequireRank2(b.shape(), "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ " +
                         ShapeToString(a.shape()) + " x " +
                         ShapeToString(b.shape()));
  }
  BasicTensor<T> out({a.dim(0), b.dim(1)});
  Gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.data(), b.data(),
       out.data(), false);
  CheckFinite(out, "matmul");
  return out;
}

template <typename T>
MatMulGrads<T> MatMulBackward(const BasicTensor<T>& a, const BasicTensor<T>& b,
                              const BasicTensor<T>& grad_out) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  MatMulGrads<T> g{BasicTensor<T>(a.shape()), BasicTensor<T>(b.shape())};
  Gemm(false, true, m, k, n, grad_out.data(), b.data(), g.a.data(), false);
  Gemm(true, false, k, n, m, a.data(), grad_out.data(), g.b.data(), false);
  return g;
}

template <typename T>
BasicTensor<T> MatMulTransB(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireRank2(a.shape(), "matmul_trans_b");
  RequireRank2(b.shape(), "matmul_trans_b");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_trans_b: inner dimensions differ " +
                         ShapeToString(a.shape()) + " x " +
                         ShapeToString(b.shape()) + "^T");
  }
  BasicTensor<T> out({a.dim(0), b.dim(0)});
  Gemm(false, true, a.dim(0), b.dim(0), a.dim(1), a.data(), b.data(),
       out.data(), false);
  CheckFinite(out, "matmul_trans_b");
  return out;
}

template <typename T>
MatMulGrads<T> MatMulTransBBackward(const BasicTensor<T>& a,
                                    const BasicTensor<T>& b,
                                    const BasicTensor<T>& grad_out) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  MatMulGrads<T> g{BasicTensor<T>(a.shape()), BasicTensor<T>(b.shape())};
  Gemm(false, false, m, k, n, grad_out.data(), b.data(), g.a.data(), false);
  Gemm(true, false, n, k, m, grad_out.data(), a.data(), g.b.data(), false);
  return g;
}

template <typename T>
BasicTensor<T> Add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSameShape(a.shape(), b.shape(), "add");
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
void AddInPlace(BasicTensor<T>& acc, const BasicTensor<T>& x) {
  RequireSameShape(acc.shape(), x.shape(), "add_in_place");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

template <typename T>
BasicTensor<T> Scale(const BasicTensor<T>& x, T factor) {
  BasicTensor<T> out = x;
  for (T& v : out.values()) v *= factor;
  return out;
}

template <typename T>
BasicTensor<T> AddRowBias(const BasicTensor<T>& x, const BasicTensor<T>& bias) {
  if (bias.size() != x.cols()) {
    throw DimensionError("add_row_bias: bias length " +
                         std::to_string(bias.size()) + " vs " +
                         std::to_string(x.cols()) + " columns");
  }
  BasicTensor<T> out = x;
  const std::size_t c = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    T* row = out.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) row[j] += bias[j];
  }
  return out;
}

template <typename T>
void AccumulateRowBiasGrad(const BasicTensor<T>& grad_out,
                           BasicTensor<T>& bias_grad) {
  const std::size_t c = grad_out.cols();
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    const T* row = grad_out.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) bias_grad[j] += row[j];
  }
}

template <typename T>
BasicTensor<T> MaskedSoftmax(const BasicTensor<T>& logits,
                             const BasicTensor<T>& additive_mask) {
  RequireSameShape(logits.shape(), additive_mask.shape(), "masked_softmax");
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i]) || std::isnan(additive_mask[i]) ||
        additive_mask[i] == std::numeric_limits<T>::infinity()) {
      throw NumericError("masked_softmax: NaN or +inf input");
    }
  }
  const std::size_t cols = logits.cols();
  BasicTensor<T> out(logits.shape());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const T* l = logits.data() + r * cols;
    const T* m = additive_mask.data() + r * cols;
    T* o = out.data() + r * cols;
    T max_v = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < cols; ++j) max_v = std::max(max_v, l[j] + m[j]);
    if (max_v == -std::numeric_limits<T>::infinity()) continue;  // zero row
    T sum = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(l[j] + m[j] - max_v);
      sum += o[j];
    }
    const T inv = T{1} / sum;
    for (std::size_t j = 0; j < cols; ++j) o[j] *= inv;
  }
  return out;
}

template <typename T>
BasicTensor<T> SoftmaxBackward(const BasicTensor<T>& probs,
                               const BasicTensor<T>& grad_out) {
  RequireSameShape(probs.shape(), grad_out.shape(), "softmax_backward");
  const std::size_t cols = probs.cols();
  BasicTensor<T> g(probs.shape());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const T* p = probs.data() + r * cols;
    const T* go = grad_out.data() + r * cols;
    T* gi = g.data() + r * cols;
    T dot = 0;
    for (std::size_t j = 0; j < cols; ++j) dot += p[j] * go[j];
    for (std::size_t j = 0; j < cols; ++j) gi[j] = p[j] * (go[j] - dot);
  }
  return g;
}

template <typename T>
BasicTensor<T> LayerNorm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                         const BasicTensor<T>& bias, LayerNormCache<T>* cache) {
  const std::size_t c = x.cols();
  if (gain.size() != c || bias.size() != c) {
    throw DimensionError("layer_norm: affine length does not match last dim " +
                         std::to_string(c));
  }
  BasicTensor<T> normalized(x.shape());
  BasicTensor<T> out(x.shape());
  std::vector<T> inv_std(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const T* xr = x.data() + r * c;
    T mean = 0;
    for (std::size_t j = 0; j < c; ++j) mean += xr[j];
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(c);
    const T is = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEps));
    inv_std[r] = is;
    T* nr = normalized.data() + r * c;
    T* orow = out.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) {
      nr[j] = (xr[j] - mean) * is;
      orow[j] = nr[j] * gain[j] + bias[j];
    }
  }
  CheckFinite(out, "layer_norm");
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename T>
LayerNormGrads<T> LayerNormBackward(const LayerNormCache<T>& cache,
                                    const BasicTensor<T>& gain,
                                    const BasicTensor<T>& grad_out) {
  const BasicTensor<T>& xhat = cache.normalized;
  const std::size_t c = xhat.cols();
  LayerNormGrads<T> g{BasicTensor<T>(xhat.shape()), BasicTensor<T>({c}),
                      BasicTensor<T>({c})};
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    const T* xr = xhat.data() + r * c;
    const T* gr = grad_out.data() + r * c;
    T* gx = g.x.data() + r * c;
    T sum_g = 0, sum_gx = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const T gh = gr[j] * gain[j];
      sum_g += gh;
      sum_gx += gh * xr[j];
      g.gain[j] += gr[j] * xr[j];
      g.bias[j] += gr[j];
    }
    const T inv_c = T{1} / static_cast<T>(c);
    for (std::size_t j = 0; j < c; ++j) {
      const T gh = gr[j] * gain[j];
      gx[j] = cache.inv_std[r] * (gh - inv_c * sum_g - xr[j] * inv_c * sum_gx);
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> Gelu(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = T{0.5} * x[i] * (T{1} + std::erf(x[i] * inv_sqrt2));
  }
  return out;
}

template <typename T>
BasicTensor<T> GeluBackward(const BasicTensor<T>& x,
                            const BasicTensor<T>& grad_out) {
  BasicTensor<T> g(x.shape());
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  const T inv_sqrt2pi = static_cast<T>(0.39894228040143267794);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T cdf = T{0.5} * (T{1} + std::erf(x[i] * inv_sqrt2));
    const T pdf = inv_sqrt2pi * std::exp(T{-0.5} * x[i] * x[i]);
    g[i] = grad_out[i] * (cdf + x[i] * pdf);
  }
  return g;
}

template <typename T>
T Sigmoid(T x) {
  if (x >= 0) {
    return T{1} / (T{1} + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T{1} + e);
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

// Source taps for one output coordinate, half-pixel centers.
std::vector<Tap> ResizeTaps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    std::size_t lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
BasicTensor<T> BilinearResize(const BasicTensor<T>& x, std::size_t out_h,
                              std::size_t out_w) {
  if (x.rank() != 3) {
    throw DimensionError("bilinear_resize: expected HxWxC, got " +
                         ShapeToString(x.shape()));
  }
  const std::size_t in_h = x.dim(0), in_w = x.dim(1), c = x.dim(2);
  if (out_h == 0 || out_w == 0 || in_h == 0 || in_w == 0) {
    throw DimensionError("bilinear_resize: zero-sized raster");
  }
  if (in_h == out_h && in_w == out_w) return x;
  const auto ty = ResizeTaps(in_h, out_h);
  const auto tx = ResizeTaps(in_w, out_w);
  BasicTensor<T> out({out_h, out_w, c});
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const T fy = static_cast<T>(ty[oy].frac);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const T fx = static_cast<T>(tx[ox].frac);
      const T* p00 = &x.at(ty[oy].lo, tx[ox].lo, 0);
      const T* p01 = &x.at(ty[oy].lo, tx[ox].hi, 0);
      const T* p10 = &x.at(ty[oy].hi, tx[ox].lo, 0);
      const T* p11 = &x.at(ty[oy].hi, tx[ox].hi, 0);
      T* o = &out.at(oy, ox, 0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T top = p00[ch] + (p01[ch] - p00[ch]) * fx;
        const T bottom = p10[ch] + (p11[ch] - p10[ch]) * fx;
        o[ch] = top + (bottom - top) * fy;
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> BilinearResizeBackward(const BasicTensor<T>& grad_out,
                                      std::size_t in_h, std::size_t in_w) {
  const std::size_t out_h = grad_out.dim(0), out_w = grad_out.dim(1),
                    c = grad_out.dim(2);
  if (in_h == out_h && in_w == out_w) return grad_out;
  const auto ty = ResizeTaps(in_h, out_h);
  const auto tx = ResizeTaps(in_w, out_w);
  BasicTensor<T> g({in_h, in_w, c});
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const T fy = static_cast<T>(ty[oy].frac);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const T fx = static_cast<T>(tx[ox].frac);
      const T* go = &grad_out.at(oy, ox, 0);
      T* p00 = &g.at(ty[oy].lo, tx[ox].lo, 0);
      T* p01 = &g.at(ty[oy].lo, tx[ox].hi, 0);
      T* p10 = &g.at(ty[oy].hi, tx[ox].lo, 0);
      T* p11 = &g.at(ty[oy].hi, tx[ox].hi, 0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        p00[ch] += go[ch] * (1 - fx) * (1 - fy);
        p01[ch] += go[ch] * fx * (1 - fy);
        p10[ch] += go[ch] * (1 - fx) * fy;
        p11[ch] += go[ch] * fx * fy;
      }
    }
  }
  return g;
}

#define OIS_INSTANTIATE_OPS(T)                                                \
  template void CheckFinite<T>(const BasicTensor<T>&, std::string_view);      \
  template void Gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t,    \
                        const T*, const T*, T*, bool);                        \
  template BasicTensor<T> MatMul<T>(const BasicTensor<T>&,                    \
                                    const BasicTensor<T>&);                   \
  template MatMulGrads<T> MatMulBackward<T>(                                  \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> MatMulTransB<T>(const BasicTensor<T>&,              \
                                          const BasicTensor<T>&);             \
  template MatMulGrads<T> MatMulTransBBackward<T>(                            \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> Add<T>(const BasicTensor<T>&,                       \
                                 const BasicTensor<T>&);                      \
  template void AddInPlace<T>(BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> Scale<T>(const BasicTensor<T>&, T);                 \
  template BasicTensor<T> AddRowBias<T>(const BasicTensor<T>&,                \
                                        const BasicTensor<T>&);               \
  template void AccumulateRowBiasGrad<T>(const BasicTensor<T>&,               \
                                         BasicTensor<T>&);                    \
  template BasicTensor<T> MaskedSoftmax<T>(const BasicTensor<T>&,             \
                                           const BasicTensor<T>&);            \
  template BasicTensor<T> SoftmaxBackward<T>(const BasicTensor<T>&,           \
                                             const BasicTensor<T>&);          \
  template BasicTensor<T> LayerNorm<T>(const BasicTensor<T>&,                 \
                                       const BasicTensor<T>&,                 \
                                       const BasicTensor<T>&,                 \
                                       LayerNormCache<T>*);                   \
  template LayerNormGrads<T> LayerNormBackward<T>(                            \
      const LayerNormCache<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> Gelu<T>(const BasicTensor<T>&);                     \
  template BasicTensor<T> GeluBackward<T>(const BasicTensor<T>&,              \
                                          const BasicTensor<T>&);             \
  template T Sigmoid<T>(T);                                                   \
  template BasicTensor<T> BilinearResize<T>(const BasicTensor<T>&,            \
                                            std::size_t, std::size_t);        \
  template BasicTensor<T> BilinearResizeBackward<T>(                          \
      const BasicTensor<T>&, std::size_t, std::size_t);

OIS_INSTANTIATE_OPS(float)
OIS_INSTANTIATE_OPS(double)

#undef OIS_INSTANTIATE_OPS

}  // namespace numerics
}  // namespace ois
