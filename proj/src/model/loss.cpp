#include "ois/model/loss.hpp"

#include <cmath>

#include "ois/common/errors.hpp"
#include "ois/numerics/ops.hpp"

namespace ois {

template <typename T>
LossResult<T> NormalizedFocalLoss(const BasicTensor<T>& logits,
                                  const Tensor& target, const LossConfig& cfg) {
  if (logits.shape() != target.shape()) {
    throw DimensionError("focal loss: logits " + ShapeToString(logits.shape()) +
                         " vs target " + ShapeToString(target.shape()));
  }
  if (cfg.gamma < 0) throw ValidationError("focal loss: gamma must be >= 0");
  for (float t : target.values()) {
    if (t != 0.0f && t != 1.0f) {
      throw ValidationError("focal loss: target must be binary");
    }
  }
  const T gamma = static_cast<T>(cfg.gamma);
  const std::size_t n = logits.size();
  // Per pixel: z = +-logit so that p_t = sigmoid(z).
  std::vector<T> w(n), nll(n), dw_dz(n), dnll_dz(n);
  T sum_w = 0, sum_wl = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T z = target[i] > 0.5f ? logits[i] : -logits[i];
    const T pt = numerics::Sigmoid(z);
    const T one_minus = numerics::Sigmoid(-z);
    // -log sigmoid(z), stable for large |z|.
    const T l = z >= 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    const T wi = gamma == T{0} ? T{1} : std::pow(one_minus, gamma);
    w[i] = wi;
    nll[i] = l;
    // d(1-p)/dz = -p(1-p); dw/dz = -gamma (1-p)^gamma p.
    dw_dz[i] = gamma == T{0} ? T{0} : -gamma * wi * pt;
    dnll_dz[i] = -one_minus;
    sum_w += wi;
    sum_wl += wi * l;
  }
  const T denom = sum_w + static_cast<T>(cfg.eps);
  LossResult<T> out;
  out.value = sum_wl / denom;
  out.grad = BasicTensor<T>(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T dz = (dw_dz[i] * nll[i] + w[i] * dnll_dz[i]) / denom -
                 sum_wl * dw_dz[i] / (denom * denom);
    out.grad[i] = target[i] > 0.5f ? dz : -dz;
  }
  if (!std::isfinite(out.value)) throw NumericError("focal loss: non-finite");
  return out;
}

template LossResult<float> NormalizedFocalLoss(const BasicTensor<float>&,
                                               const Tensor&, const LossConfig&);
template LossResult<double> NormalizedFocalLoss(const BasicTensor<double>&,
                                                const Tensor&, const LossConfig&);

}  // namespace ois
