#include "ois/model/model.hpp"

#include <random>

namespace ois {

template <typename T>
OisModel<T>::OisModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      encode_calls_(std::make_unique<std::atomic<std::int64_t>>(0)) {
  config_.Validate();
  std::mt19937_64 rng(seed);
  const auto c = static_cast<std::size_t>(config.embed_dim);
  encoder = ImageEncoder<T>(config, rng);
  sparse_encoder = SparsePromptEncoder<T>(c, rng);
  dense_encoder = DensePromptEncoder<T>(c, rng);
  for (int b = 0; b < config.fusion_blocks; ++b) {
    blocks.emplace_back(c, static_cast<std::size_t>(config.ffn_hidden), rng);
    blocks.back().order.set_order_enabled(config_.use_order());
  }
  decoder = MaskDecoder<T>(config, rng);
}

template <typename T>
FeatureMap<T> OisModel<T>::EncodeImage(const Tensor& image,
                                       const DepthMap& depth,
                                       EncoderCache<T>* cache) const {
  encode_calls_->fetch_add(1);
  return encoder.Forward(EncoderInput(image, depth).template Cast<T>(), cache);
}

template <typename T>
RoundPrompts<T> OisModel<T>::PreparePrompts(
    const FeatureMap<T>& features, const ClickSet& clicks,
    const DepthMap& depth, const BinaryMask* previous,
    DenseEncoderCache<T>* dense_cache) const {
  const int width = features.image_width, height = features.image_height;
  if (depth.width() != width || depth.height() != height) {
    throw DimensionError("depth map size does not match the encoded image");
  }
  const std::size_t h = features.height, w = features.width;
  RoundPrompts<T> p;
  if (config_.use_sparse()) {
    p.sparse = sparse_encoder.Encode(clicks, width, height);
  } else {
    clicks.CheckBounds(width, height);
    p.sparse = sparse_encoder.EncodeEmpty();
  }
  if (config_.use_dense()) {
    p.dense = dense_encoder.Encode(clicks, width, height, h, w,
                                   config_.click_radius, dense_cache);
  }
  if (config_.use_order()) {
    p.order_stack = BuildOrderStack(depth, clicks, h, w,
                                    config_.order_normalization)
                        .values.template Cast<T>();
  } else {
    p.order_stack = BasicTensor<T>({kNumSlots, h * w});
  }
  if (config_.use_object() && previous != nullptr) {
    if (previous->width != width || previous->height != height) {
      throw DimensionError("previous mask size does not match the image");
    }
    p.object_stack = BuildObjectStack(
        DownsamplePreviousMask(previous->ToTensor(), h, w, 0));
  }
  return p;
}

template <typename T>
BasicTensor<T> OisModel<T>::PredictLogits(const FeatureMap<T>& features,
                                          const ClickSet& clicks,
                                          const DepthMap& depth,
                                          const BinaryMask* previous,
                                          RoundCache<T>* cache) const {
  RoundPrompts<T> prompts = PreparePrompts(features, clicks, depth, previous,
                                           cache ? &cache->dense : nullptr);
  const FuseResult<T> fused =
      Fuse(blocks, features.values,
           prompts.dense ? &prompts.dense->values : nullptr,
           prompts.sparse.values, prompts.order_stack,
           prompts.object_stack ? &*prompts.object_stack : nullptr,
           cache ? &cache->fuse : nullptr);
  BasicTensor<T> logits = decoder.Forward(
      fused.features, features.height, features.width, fused.sparse,
      prompts.sparse.occupancy,
      static_cast<std::size_t>(features.image_height),
      static_cast<std::size_t>(features.image_width),
      cache ? &cache->decoder : nullptr);
  if (cache != nullptr) cache->prompts = std::move(prompts);
  return logits;
}

template <typename T>
BinaryMask OisModel<T>::Predict(const FeatureMap<T>& features,
                                const ClickSet& clicks, const DepthMap& depth,
                                const BinaryMask* previous) const {
  const BasicTensor<T> logits =
      PredictLogits(features, clicks, depth, previous, nullptr);
  BinaryMask mask(features.image_width, features.image_height);
  for (std::size_t i = 0; i < logits.size(); ++i) mask.bits[i] = logits[i] > 0;
  return mask;
}

template <typename T>
BasicTensor<T> OisModel<T>::BackwardRound(const RoundCache<T>& cache,
                                          const BasicTensor<T>& grad_logits) {
  auto g_dec = decoder.Backward(cache.decoder, grad_logits);
  BasicTensor<T> g_fused = std::move(g_dec.features);
  BasicTensor<T> g_sparse = std::move(g_dec.sparse);
  for (std::size_t b = blocks.size(); b-- > 0;) {
    g_sparse = blocks[b].Backward(cache.fuse.blocks[b], g_sparse, g_fused);
  }
  if (config_.use_sparse()) {
    sparse_encoder.Backward(cache.prompts.sparse.occupancy, g_sparse);
  } else {
    SlotOccupancy all_free;
    all_free.fill(SlotKind::kNonPoint);
    sparse_encoder.Backward(all_free, g_sparse);
  }
  if (cache.prompts.dense.has_value()) {
    dense_encoder.Backward(cache.dense, g_fused);
  }
  return g_fused;
}

template <typename T>
void OisModel<T>::BackwardEncoder(const EncoderCache<T>& cache,
                                  const BasicTensor<T>& grad_features) {
  encoder.Backward(cache, grad_features);
}

template <typename T>
BasicTensor<T> OisModel<T>::FirstBlockOrderWeights(
    const FeatureMap<T>& features, const ClickSet& clicks,
    const DepthMap& depth, bool apply_order) const {
  const RoundPrompts<T> p =
      PreparePrompts(features, clicks, depth, nullptr, nullptr);
  const BasicTensor<T> fused =
      p.dense ? numerics::Add(features.values, p.dense->values)
              : features.values;
  // Inspection uses the real order stack even for arms that train without it.
  const BasicTensor<T> stack =
      BuildOrderStack(depth, clicks, features.height, features.width,
                      config_.order_normalization)
          .values.template Cast<T>();
  return blocks.front().order.Weights(p.sparse.values, fused, stack,
                                      apply_order);
}

template <typename T>
void OisModel<T>::VisitParameters(const ParamVisitor<T>& v) {
  encoder.VisitParameters("encoder.", v);
  sparse_encoder.VisitParameters("prompt.sparse.", v);
  dense_encoder.VisitParameters("prompt.dense.", v);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].VisitParameters("fusion" + std::to_string(b) + ".", v);
  }
  decoder.VisitParameters("decoder.", v);
}

template <typename T>
void OisModel<T>::ZeroGrad() {
  VisitParameters([](const std::string&, Parameter<T>& p) { p.ZeroGrad(); });
}

template <typename T>
std::size_t OisModel<T>::ParameterCount() {
  std::size_t n = 0;
  VisitParameters(
      [&](const std::string&, Parameter<T>& p) { n += p.value.size(); });
  return n;
}

template class OisModel<float>;
template class OisModel<double>;

}  // namespace ois
