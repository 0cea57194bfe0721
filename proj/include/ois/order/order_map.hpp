#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ois/numerics/tensor.hpp"
#include "ois/prompts/clicks.hpp"
#include "ois/prompts/prompt_encoder.hpp"

namespace ois {

enum class DepthProvenance { kSynthetic, kFile, kFlat };

// Per-pixel depth raster [H x W]. Values are finite and non-negative.
struct DepthMap {
  Tensor values;
  DepthProvenance provenance = DepthProvenance::kSynthetic;

  int width() const { return static_cast<int>(values.dim(1)); }
  int height() const { return static_cast<int>(values.dim(0)); }
  float at(int x, int y) const {
    return values.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  }

  // Throws ValidationError unless the raster is rank 2, finite, non-negative.
  void Validate() const;

  static DepthMap Flat(int width, int height, float value = 1.0f);
};

// Relative-depth raster [H x W] in [0, 1]; 0 where depth matches the prompt
// reference depth.
struct OrderMap {
  Tensor values;
};

enum class OrderNormalization {
  // Divide by the map's own maximum (all zeros when that maximum < 1e-8).
  kPerMapMax,
  // Divide by the depth map's value range (max - min).
  kDepthRange,
};

// |R - mean of R over the positive clicks|, before normalization. Throws
// PromptError when there are no positive clicks.
Tensor RawPositiveOrderMap(const DepthMap& depth, const ClickSet& clicks);

// |R - R at the click|, before normalization. Throws PromptError for a
// positive click.
Tensor RawNegativeOrderMap(const DepthMap& depth, const Click& click);

OrderMap NormalizeOrderMap(const Tensor& raw, const DepthMap& depth,
                           OrderNormalization mode);

OrderMap PositiveOrderMap(
    const DepthMap& depth, const ClickSet& clicks,
    OrderNormalization mode = OrderNormalization::kPerMapMax);

OrderMap NegativeOrderMap(
    const DepthMap& depth, const Click& click,
    OrderNormalization mode = OrderNormalization::kPerMapMax);

// [kNumSlots x h*w]: rows of the positive half all carry the shared positive
// map, row kSlotsPerPolarity + i carries the i-th negative map, free slots and
// a missing positive map give zero rows.
struct OrderMaskStack {
  Tensor values;
};

// Maps are bilinearly resized to (feat_h, feat_w) before flattening.
OrderMaskStack AssembleOrderStack(const std::optional<OrderMap>& positive_map,
                                  const std::vector<OrderMap>& negative_maps,
                                  const SlotOccupancy& occupancy,
                                  std::size_t feat_h, std::size_t feat_w);

// Order maps for every click in `clicks`, assembled into a stack.
OrderMaskStack BuildOrderStack(
    const DepthMap& depth, const ClickSet& clicks, std::size_t feat_h,
    std::size_t feat_w,
    OrderNormalization mode = OrderNormalization::kPerMapMax);

}  // namespace ois
