#include "ois/model/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "ois/prompts/prompt_encoder.hpp"

namespace ois {

using numerics::AddInPlace;
using numerics::MatMul;
using numerics::MatMulBackward;

Tensor EncoderInput(const Tensor& image, const DepthMap& depth) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw DimensionError("image must be H x W x 3, got " +
                         ShapeToString(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1);
  if (depth.values.rank() != 2 || depth.values.dim(0) != h ||
      depth.values.dim(1) != w) {
    throw DimensionError("depth map size does not match the image");
  }
  const float max_depth = *std::max_element(depth.values.values().begin(),
                                            depth.values.values().end());
  const float inv = max_depth > 0.0f ? 1.0f / max_depth : 0.0f;
  Tensor out({h, w, 4});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(y, x, c) = image.at(y, x, c) - 0.5f;
      }
      out.at(y, x, 3) = depth.values.at(y, x) * inv;
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> GridPositionalEncoding(std::size_t h, std::size_t w,
                                      std::size_t channels) {
  BasicTensor<T> pe({h * w, channels});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto row = PositionalEncoding2d(
          (static_cast<double>(x) + 0.5) / static_cast<double>(w),
          (static_cast<double>(y) + 0.5) / static_cast<double>(h), channels);
      for (std::size_t c = 0; c < channels; ++c) {
        pe.at(y * w + x, c) = static_cast<T>(row[c]);
      }
    }
  }
  return pe;
}

namespace {

template <typename T>
BasicTensor<T> SliceCols(const BasicTensor<T>& x, std::size_t begin,
                         std::size_t count) {
  BasicTensor<T> out({x.rows(), count});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy_n(x.data() + r * x.cols() + begin, count, out.data() + r * count);
  }
  return out;
}

template <typename T>
void AddIntoCols(BasicTensor<T>& dst, const BasicTensor<T>& src,
                 std::size_t begin) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    T* d = dst.data() + r * dst.cols() + begin;
    const T* s = src.data() + r * src.cols();
    for (std::size_t c = 0; c < src.cols(); ++c) d[c] += s[c];
  }
}

}  // namespace

template <typename T>
EncoderBlock<T>::EncoderBlock(std::size_t channels, std::size_t heads,
                              std::size_t hidden, std::mt19937_64& rng)
    : ln1_gain(ConstantParameter<T>({channels}, T{1})),
      ln1_bias(ConstantParameter<T>({channels}, T{0})),
      w_qkv(XavierParameter<T>(channels, 3 * channels, rng)),
      b_qkv(ConstantParameter<T>({3 * channels}, T{0})),
      w_out(XavierParameter<T>(channels, channels, rng)),
      b_out(ConstantParameter<T>({channels}, T{0})),
      ln2_gain(ConstantParameter<T>({channels}, T{1})),
      ln2_bias(ConstantParameter<T>({channels}, T{0})),
      w_mlp1(XavierParameter<T>(channels, hidden, rng)),
      b_mlp1(ConstantParameter<T>({hidden}, T{0})),
      w_mlp2(XavierParameter<T>(hidden, channels, rng)),
      b_mlp2(ConstantParameter<T>({channels}, T{0})),
      channels_(channels),
      heads_(heads) {}

template <typename T>
BasicTensor<T> EncoderBlock<T>::Forward(const BasicTensor<T>& x,
                                        EncoderBlockCache<T>* cache) const {
  const std::size_t head_dim = channels_ / heads_;
  const T scale = T{1} / std::sqrt(static_cast<T>(head_dim));
  numerics::LayerNormCache<T> ln1;
  BasicTensor<T> h1 = numerics::LayerNorm(x, ln1_gain.value, ln1_bias.value,
                                          cache ? &ln1 : nullptr);
  BasicTensor<T> qkv = numerics::AddRowBias(MatMul(h1, w_qkv.value), b_qkv.value);
  BasicTensor<T> concat({x.rows(), channels_});
  const BasicTensor<T> no_mask({x.rows(), x.rows()});
  if (cache != nullptr) {
    cache->q.resize(heads_);
    cache->k.resize(heads_);
    cache->v.resize(heads_);
    cache->probs.resize(heads_);
  }
  for (std::size_t hd = 0; hd < heads_; ++hd) {
    BasicTensor<T> q = SliceCols(qkv, hd * head_dim, head_dim);
    BasicTensor<T> k = SliceCols(qkv, channels_ + hd * head_dim, head_dim);
    BasicTensor<T> v = SliceCols(qkv, 2 * channels_ + hd * head_dim, head_dim);
    BasicTensor<T> probs = numerics::MaskedSoftmax(
        numerics::Scale(numerics::MatMulTransB(q, k), scale), no_mask);
    AddIntoCols(concat, MatMul(probs, v), hd * head_dim);
    if (cache != nullptr) {
      cache->q[hd] = std::move(q);
      cache->k[hd] = std::move(k);
      cache->v[hd] = std::move(v);
      cache->probs[hd] = std::move(probs);
    }
  }
  BasicTensor<T> x_mid = numerics::Add(
      x, numerics::AddRowBias(MatMul(concat, w_out.value), b_out.value));
  numerics::LayerNormCache<T> ln2;
  BasicTensor<T> h2 = numerics::LayerNorm(x_mid, ln2_gain.value,
                                          ln2_bias.value, cache ? &ln2 : nullptr);
  BasicTensor<T> pre_act =
      numerics::AddRowBias(MatMul(h2, w_mlp1.value), b_mlp1.value);
  BasicTensor<T> act = numerics::Gelu(pre_act);
  BasicTensor<T> out = numerics::Add(
      x_mid, numerics::AddRowBias(MatMul(act, w_mlp2.value), b_mlp2.value));
  numerics::CheckFinite(out, "encoder_block");
  if (cache != nullptr) {
    cache->x_in = x;
    cache->ln1 = std::move(ln1);
    cache->h1 = std::move(h1);
    cache->qkv = std::move(qkv);
    cache->attn_concat = std::move(concat);
    cache->x_mid = std::move(x_mid);
    cache->ln2 = std::move(ln2);
    cache->h2 = std::move(h2);
    cache->pre_act = std::move(pre_act);
    cache->act = std::move(act);
  }
  return out;
}

template <typename T>
BasicTensor<T> EncoderBlock<T>::Backward(const EncoderBlockCache<T>& cache,
                                         const BasicTensor<T>& grad_out) {
  const std::size_t head_dim = channels_ / heads_;
  const T scale = T{1} / std::sqrt(static_cast<T>(head_dim));

  // MLP branch.
  BasicTensor<T> g_mid = grad_out;
  const auto g_m2 = MatMulBackward(cache.act, w_mlp2.value, grad_out);
  AddInPlace(w_mlp2.grad, g_m2.b);
  numerics::AccumulateRowBiasGrad(grad_out, b_mlp2.grad);
  const BasicTensor<T> g_pre = numerics::GeluBackward(cache.pre_act, g_m2.a);
  const auto g_m1 = MatMulBackward(cache.h2, w_mlp1.value, g_pre);
  AddInPlace(w_mlp1.grad, g_m1.b);
  numerics::AccumulateRowBiasGrad(g_pre, b_mlp1.grad);
  const auto g_ln2 = numerics::LayerNormBackward(cache.ln2, ln2_gain.value, g_m1.a);
  AddInPlace(ln2_gain.grad, g_ln2.gain);
  AddInPlace(ln2_bias.grad, g_ln2.bias);
  AddInPlace(g_mid, g_ln2.x);

  // Attention branch.
  BasicTensor<T> g_x = g_mid;
  const auto g_o = MatMulBackward(cache.attn_concat, w_out.value, g_mid);
  AddInPlace(w_out.grad, g_o.b);
  numerics::AccumulateRowBiasGrad(g_mid, b_out.grad);
  BasicTensor<T> g_qkv(cache.qkv.shape());
  for (std::size_t hd = 0; hd < heads_; ++hd) {
    const BasicTensor<T> g_head = SliceCols(g_o.a, hd * head_dim, head_dim);
    const auto g_pv = MatMulBackward(cache.probs[hd], cache.v[hd], g_head);
    const BasicTensor<T> g_logits = numerics::Scale(
        numerics::SoftmaxBackward(cache.probs[hd], g_pv.a), scale);
    const auto g_qk =
        numerics::MatMulTransBBackward(cache.q[hd], cache.k[hd], g_logits);
    AddIntoCols(g_qkv, g_qk.a, hd * head_dim);
    AddIntoCols(g_qkv, g_qk.b, channels_ + hd * head_dim);
    AddIntoCols(g_qkv, g_pv.b, 2 * channels_ + hd * head_dim);
  }
  const auto g_in = MatMulBackward(cache.h1, w_qkv.value, g_qkv);
  AddInPlace(w_qkv.grad, g_in.b);
  numerics::AccumulateRowBiasGrad(g_qkv, b_qkv.grad);
  const auto g_ln1 = numerics::LayerNormBackward(cache.ln1, ln1_gain.value, g_in.a);
  AddInPlace(ln1_gain.grad, g_ln1.gain);
  AddInPlace(ln1_bias.grad, g_ln1.bias);
  AddInPlace(g_x, g_ln1.x);
  return g_x;
}

template <typename T>
void EncoderBlock<T>::VisitParameters(const std::string& prefix,
                                      const ParamVisitor<T>& v) {
  v(prefix + "ln1.gain", ln1_gain);
  v(prefix + "ln1.bias", ln1_bias);
  v(prefix + "attn.w_qkv", w_qkv);
  v(prefix + "attn.b_qkv", b_qkv);
  v(prefix + "attn.w_out", w_out);
  v(prefix + "attn.b_out", b_out);
  v(prefix + "ln2.gain", ln2_gain);
  v(prefix + "ln2.bias", ln2_bias);
  v(prefix + "mlp.w1", w_mlp1);
  v(prefix + "mlp.b1", b_mlp1);
  v(prefix + "mlp.w2", w_mlp2);
  v(prefix + "mlp.b2", b_mlp2);
}

template <typename T>
ImageEncoder<T>::ImageEncoder(const ModelConfig& config, std::mt19937_64& rng)
    : patch_weight(XavierParameter<T>(
          static_cast<std::size_t>(config.patch_size * config.patch_size *
                                   config.input_channels),
          static_cast<std::size_t>(config.embed_dim), rng)),
      patch_bias(ConstantParameter<T>(
          {static_cast<std::size_t>(config.embed_dim)}, T{0})),
      norm_gain(ConstantParameter<T>(
          {static_cast<std::size_t>(config.embed_dim)}, T{1})),
      norm_bias(ConstantParameter<T>(
          {static_cast<std::size_t>(config.embed_dim)}, T{0})),
      patch_(static_cast<std::size_t>(config.patch_size)),
      channels_(static_cast<std::size_t>(config.embed_dim)),
      in_channels_(static_cast<std::size_t>(config.input_channels)) {
  for (int b = 0; b < config.encoder_blocks; ++b) {
    blocks.emplace_back(channels_, static_cast<std::size_t>(config.encoder_heads),
                        static_cast<std::size_t>(config.ffn_hidden), rng);
  }
}

template <typename T>
FeatureMap<T> ImageEncoder<T>::Forward(const BasicTensor<T>& input,
                                       EncoderCache<T>* cache) const {
  if (input.rank() != 3 || input.dim(2) != in_channels_) {
    throw DimensionError("encoder input must be H x W x " +
                         std::to_string(in_channels_) + ", got " +
                         ShapeToString(input.shape()));
  }
  const std::size_t H = input.dim(0), W = input.dim(1);
  if (H % patch_ != 0 || W % patch_ != 0 || H == 0 || W == 0) {
    throw DimensionError("image size " + std::to_string(W) + "x" +
                         std::to_string(H) + " not divisible by patch size " +
                         std::to_string(patch_));
  }
  const std::size_t h = H / patch_, w = W / patch_;
  const std::size_t patch_len = patch_ * patch_ * in_channels_;
  BasicTensor<T> patches({h * w, patch_len});
  for (std::size_t py = 0; py < h; ++py) {
    for (std::size_t px = 0; px < w; ++px) {
      T* dst = patches.data() + (py * w + px) * patch_len;
      for (std::size_t dy = 0; dy < patch_; ++dy) {
        for (std::size_t dx = 0; dx < patch_; ++dx) {
          for (std::size_t c = 0; c < in_channels_; ++c) {
            *dst++ = input.at(py * patch_ + dy, px * patch_ + dx, c);
          }
        }
      }
    }
  }
  BasicTensor<T> x = numerics::Add(
      numerics::AddRowBias(MatMul(patches, patch_weight.value), patch_bias.value),
      GridPositionalEncoding<T>(h, w, channels_));
  if (cache != nullptr) cache->blocks.resize(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    x = blocks[b].Forward(x, cache ? &cache->blocks[b] : nullptr);
  }
  FeatureMap<T> out;
  out.values = numerics::LayerNorm(x, norm_gain.value, norm_bias.value,
                                   cache ? &cache->final_norm : nullptr);
  out.height = h;
  out.width = w;
  out.image_height = static_cast<int>(H);
  out.image_width = static_cast<int>(W);
  if (cache != nullptr) cache->patches = std::move(patches);
  return out;
}

template <typename T>
void ImageEncoder<T>::Backward(const EncoderCache<T>& cache,
                               const BasicTensor<T>& grad) {
  const auto g_norm =
      numerics::LayerNormBackward(cache.final_norm, norm_gain.value, grad);
  AddInPlace(norm_gain.grad, g_norm.gain);
  AddInPlace(norm_bias.grad, g_norm.bias);
  BasicTensor<T> g = g_norm.x;
  for (std::size_t b = blocks.size(); b-- > 0;) {
    g = blocks[b].Backward(cache.blocks[b], g);
  }
  const auto g_patch = MatMulBackward(cache.patches, patch_weight.value, g);
  AddInPlace(patch_weight.grad, g_patch.b);
  numerics::AccumulateRowBiasGrad(g, patch_bias.grad);
}

template <typename T>
void ImageEncoder<T>::VisitParameters(const std::string& prefix,
                                      const ParamVisitor<T>& v) {
  v(prefix + "patch.weight", patch_weight);
  v(prefix + "patch.bias", patch_bias);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].VisitParameters(prefix + "block" + std::to_string(b) + ".", v);
  }
  v(prefix + "norm.gain", norm_gain);
  v(prefix + "norm.bias", norm_bias);
}

template BasicTensor<float> GridPositionalEncoding(std::size_t, std::size_t,
                                                   std::size_t);
template BasicTensor<double> GridPositionalEncoding(std::size_t, std::size_t,
                                                    std::size_t);
template class EncoderBlock<float>;
template class EncoderBlock<double>;
template class ImageEncoder<float>;
template class ImageEncoder<double>;

}  // namespace ois
