#pragma once

#include <random>
#include <string>
#include <vector>

#include "ois/model/config.hpp"
#include "ois/numerics/ops.hpp"
#include "ois/numerics/params.hpp"
#include "ois/order/order_map.hpp"

namespace ois {

// Spatial image features [h*w x C] at model resolution.
template <typename T>
struct FeatureMap {
  BasicTensor<T> values;
  std::size_t height = 0;  // h = H / patch
  std::size_t width = 0;   // w = W / patch
  int image_height = 0;
  int image_width = 0;
};

// Stacks RGB [H x W x 3] (values in [0,1]) and depth [H x W] into the
// encoder input [H x W x 4]: centered colour plus depth scaled by its maximum.
Tensor EncoderInput(const Tensor& image, const DepthMap& depth);

// 2-D sinusoidal table [h*w x C] evaluated at cell centers.
template <typename T>
BasicTensor<T> GridPositionalEncoding(std::size_t h, std::size_t w,
                                      std::size_t channels);

template <typename T>
struct EncoderBlockCache {
  BasicTensor<T> x_in;
  numerics::LayerNormCache<T> ln1;
  BasicTensor<T> h1;
  BasicTensor<T> qkv;
  std::vector<BasicTensor<T>> q, k, v, probs;
  BasicTensor<T> attn_concat;
  BasicTensor<T> x_mid;
  numerics::LayerNormCache<T> ln2;
  BasicTensor<T> h2;
  BasicTensor<T> pre_act;
  BasicTensor<T> act;
};

// Pre-norm transformer block: x += MHSA(LN(x)); x += MLP(LN(x)).
template <typename T>
class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(std::size_t channels, std::size_t heads, std::size_t hidden,
               std::mt19937_64& rng);

  BasicTensor<T> Forward(const BasicTensor<T>& x,
                         EncoderBlockCache<T>* cache = nullptr) const;
  BasicTensor<T> Backward(const EncoderBlockCache<T>& cache,
                          const BasicTensor<T>& grad_out);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  Parameter<T> ln1_gain, ln1_bias;
  Parameter<T> w_qkv, b_qkv;  // [C x 3C], [3C]
  Parameter<T> w_out, b_out;  // [C x C], [C]
  Parameter<T> ln2_gain, ln2_bias;
  Parameter<T> w_mlp1, b_mlp1;  // [C x hidden]
  Parameter<T> w_mlp2, b_mlp2;  // [hidden x C]

 private:
  std::size_t channels_ = 0;
  std::size_t heads_ = 0;
};

template <typename T>
struct EncoderCache {
  BasicTensor<T> patches;
  std::vector<EncoderBlockCache<T>> blocks;
  numerics::LayerNormCache<T> final_norm;
};

template <typename T>
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const ModelConfig& config, std::mt19937_64& rng);

  // `input` is [H x W x input_channels]; H and W must be divisible by the
  // patch size.
  FeatureMap<T> Forward(const BasicTensor<T>& input,
                        EncoderCache<T>* cache = nullptr) const;

  void Backward(const EncoderCache<T>& cache, const BasicTensor<T>& grad);

  void VisitParameters(const std::string& prefix, const ParamVisitor<T>& v);

  Parameter<T> patch_weight, patch_bias;
  std::vector<EncoderBlock<T>> blocks;
  Parameter<T> norm_gain, norm_bias;

 private:
  std::size_t patch_ = 8;
  std::size_t channels_ = 0;
  std::size_t in_channels_ = 0;
};

}  // namespace ois
