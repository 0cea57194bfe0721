#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "ois/numerics/tensor.hpp"

namespace ois {

template <typename T>
using ParamVisitor = std::function<void(const std::string&, Parameter<T>&)>;

// Gaussian init with the given standard deviation. Draws in double so float and
// double models built from the same seed hold the same values up to rounding.
template <typename T>
Parameter<T> NormalParameter(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  BasicTensor<T> v(std::move(shape));
  for (T& x : v.values()) x = static_cast<T>(dist(rng));
  return Parameter<T>(std::move(v));
}

// Xavier/Glorot normal init for a [fan_in x fan_out] weight.
template <typename T>
Parameter<T> XavierParameter(std::size_t fan_in, std::size_t fan_out,
                             std::mt19937_64& rng) {
  const double stddev =
      std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  return NormalParameter<T>({fan_in, fan_out}, stddev, rng);
}

template <typename T>
Parameter<T> ConstantParameter(Shape shape, T value) {
  return Parameter<T>(BasicTensor<T>(std::move(shape), value));
}

}  // namespace ois
