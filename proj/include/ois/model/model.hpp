#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ois/common/mask.hpp"
#include "ois/model/config.hpp"
#include "ois/model/decoder.hpp"
#include "ois/model/encoder.hpp"
#include "ois/model/fusion.hpp"
#include "ois/objectness/object_attention.hpp"
#include "ois/order/order_map.hpp"
#include "ois/prompts/prompt_encoder.hpp"

namespace ois {

// Everything the prompt side produces for one interaction round.
template <typename T>
struct RoundPrompts {
  SparseEmbeddings<T> sparse;
  std::optional<DenseEmbedding<T>> dense;
  BasicTensor<T> order_stack;  // [kNumSlots x h*w]
  std::optional<ObjectMaskStack> object_stack;
};

template <typename T>
struct RoundCache {
  RoundPrompts<T> prompts;
  DenseEncoderCache<T> dense;
  FuseCache<T> fuse;
  DecoderCache<T> decoder;
};

// The interactive segmentation network. The image encoder runs once per
// image; every click round reuses the cached FeatureMap and only re-runs the
// prompt encoders, the fusion blocks and the decoder.
template <typename T>
class OisModel {
 public:
  OisModel(const ModelConfig& config, std::uint64_t seed);

  OisModel(OisModel&&) noexcept = default;
  OisModel& operator=(OisModel&&) noexcept = default;

  const ModelConfig& config() const { return config_; }

  // `image` is [H x W x 3] in [0,1]; `depth` matches its size.
  FeatureMap<T> EncodeImage(const Tensor& image, const DepthMap& depth,
                            EncoderCache<T>* cache = nullptr) const;

  // Builds sparse/dense embeddings and the order/object stacks for the
  // configured arm. `previous` is the prior round's full-resolution mask, or
  // null in the first round.
  RoundPrompts<T> PreparePrompts(const FeatureMap<T>& features,
                                 const ClickSet& clicks, const DepthMap& depth,
                                 const BinaryMask* previous,
                                 DenseEncoderCache<T>* dense_cache = nullptr) const;

  // Mask logits [H x W].
  BasicTensor<T> PredictLogits(const FeatureMap<T>& features,
                               const ClickSet& clicks, const DepthMap& depth,
                               const BinaryMask* previous,
                               RoundCache<T>* cache = nullptr) const;

  // Logits > 0.
  BinaryMask Predict(const FeatureMap<T>& features, const ClickSet& clicks,
                     const DepthMap& depth, const BinaryMask* previous) const;

  // Backpropagates one round; returns dL/dF for the cached image features.
  BasicTensor<T> BackwardRound(const RoundCache<T>& cache,
                               const BasicTensor<T>& grad_logits);
  void BackwardEncoder(const EncoderCache<T>& cache,
                       const BasicTensor<T>& grad_features);

  // Weights of the first block's order attention [kNumSlots x h*w], with or
  // without the order penalty.
  BasicTensor<T> FirstBlockOrderWeights(const FeatureMap<T>& features,
                                        const ClickSet& clicks,
                                        const DepthMap& depth,
                                        bool apply_order) const;

  void VisitParameters(const ParamVisitor<T>& v);
  void ZeroGrad();
  std::size_t ParameterCount();

  std::int64_t encode_calls() const { return encode_calls_->load(); }
  void ResetEncodeCalls() { encode_calls_->store(0); }

  // Same configuration and weights at another precision.
  template <typename U>
  OisModel<U> Cast() const;

  ImageEncoder<T> encoder;
  SparsePromptEncoder<T> sparse_encoder;
  DensePromptEncoder<T> dense_encoder;
  std::vector<FusionBlock<T>> blocks;
  MaskDecoder<T> decoder;

 private:
  ModelConfig config_;
  std::unique_ptr<std::atomic<std::int64_t>> encode_calls_;
};

template <typename T>
template <typename U>
OisModel<U> OisModel<T>::Cast() const {
  OisModel<U> out(config_, 0);
  std::vector<Parameter<T>*> src;
  const_cast<OisModel<T>*>(this)->VisitParameters(
      [&](const std::string&, Parameter<T>& p) { src.push_back(&p); });
  std::size_t i = 0;
  out.VisitParameters([&](const std::string&, Parameter<U>& p) {
    p.value = src[i++]->value.template Cast<U>();
    p.grad = BasicTensor<U>(p.value.shape());
  });
  return out;
}

extern template class OisModel<float>;
extern template class OisModel<double>;

}  // namespace ois
