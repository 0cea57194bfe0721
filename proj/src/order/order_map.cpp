#include "ois/order/order_map.hpp"

#include <algorithm>
#include <cmath>

#include "ois/common/errors.hpp"
#include "ois/numerics/ops.hpp"

namespace ois {

void DepthMap::Validate() const {
  if (values.rank() != 2 || values.empty()) {
    throw ValidationError("depth map must be a non-empty H x W raster");
  }
  for (float v : values.values()) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw ValidationError("depth map holds a negative or non-finite value");
    }
  }
}

DepthMap DepthMap::Flat(int width, int height, float value) {
  return DepthMap{Tensor({static_cast<std::size_t>(height),
                          static_cast<std::size_t>(width)},
                         value),
                  DepthProvenance::kFlat};
}

namespace {

void CheckInside(const DepthMap& depth, const Click& c) {
  if (c.x < 0 || c.y < 0 || c.x >= depth.width() || c.y >= depth.height()) {
    throw ValidationError("click outside the depth map");
  }
}

std::vector<double> AbsDifference(const DepthMap& depth, double reference) {
  std::vector<double> out(depth.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::abs(static_cast<double>(depth.values[i]) - reference);
  }
  return out;
}

Tensor ToTensor(const DepthMap& depth, const std::vector<double>& v) {
  Tensor out(depth.values.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

double Denominator(const std::vector<double>& raw, const DepthMap& depth,
                   OrderNormalization mode) {
  if (mode == OrderNormalization::kPerMapMax) {
    return *std::max_element(raw.begin(), raw.end());
  }
  const auto [lo, hi] = std::minmax_element(depth.values.values().begin(),
                                            depth.values.values().end());
  return static_cast<double>(*hi) - static_cast<double>(*lo);
}

OrderMap Normalize(const std::vector<double>& raw, const DepthMap& depth,
                   OrderNormalization mode) {
  const double denom = Denominator(raw, depth, mode);
  OrderMap out{Tensor(depth.values.shape())};
  if (denom < 1e-8) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.values[i] = static_cast<float>(std::min(1.0, raw[i] / denom));
  }
  return out;
}

double PositiveReference(const DepthMap& depth, const ClickSet& clicks) {
  if (clicks.positives().empty()) {
    throw PromptError("positive order map needs at least one positive click");
  }
  double sum = 0.0;
  for (const Click& c : clicks.positives()) {
    CheckInside(depth, c);
    sum += depth.at(c.x, c.y);
  }
  return sum / static_cast<double>(clicks.positives().size());
}

double NegativeReference(const DepthMap& depth, const Click& click) {
  if (click.polarity != Polarity::kNegative) {
    throw PromptError("negative order map given a positive click");
  }
  CheckInside(depth, click);
  return depth.at(click.x, click.y);
}

}  // namespace

Tensor RawPositiveOrderMap(const DepthMap& depth, const ClickSet& clicks) {
  return ToTensor(depth, AbsDifference(depth, PositiveReference(depth, clicks)));
}

Tensor RawNegativeOrderMap(const DepthMap& depth, const Click& click) {
  return ToTensor(depth, AbsDifference(depth, NegativeReference(depth, click)));
}

OrderMap NormalizeOrderMap(const Tensor& raw, const DepthMap& depth,
                           OrderNormalization mode) {
  std::vector<double> r(raw.values().begin(), raw.values().end());
  return Normalize(r, depth, mode);
}

OrderMap PositiveOrderMap(const DepthMap& depth, const ClickSet& clicks,
                          OrderNormalization mode) {
  return Normalize(AbsDifference(depth, PositiveReference(depth, clicks)),
                   depth, mode);
}

OrderMap NegativeOrderMap(const DepthMap& depth, const Click& click,
                          OrderNormalization mode) {
  return Normalize(AbsDifference(depth, NegativeReference(depth, click)), depth,
                   mode);
}

namespace {

Tensor ResizeFlat(const OrderMap& map, std::size_t feat_h, std::size_t feat_w) {
  const Tensor as3 =
      map.values.Reshaped({map.values.dim(0), map.values.dim(1), 1});
  return numerics::BilinearResize(as3, feat_h, feat_w)
      .Reshaped({feat_h * feat_w});
}

}  // namespace

OrderMaskStack AssembleOrderStack(const std::optional<OrderMap>& positive_map,
                                  const std::vector<OrderMap>& negative_maps,
                                  const SlotOccupancy& occupancy,
                                  std::size_t feat_h, std::size_t feat_w) {
  const std::size_t hw = feat_h * feat_w;
  OrderMaskStack stack{Tensor({kNumSlots, hw})};
  if (positive_map.has_value()) {
    const Tensor flat = ResizeFlat(*positive_map, feat_h, feat_w);
    for (std::size_t s = 0; s < kSlotsPerPolarity; ++s) {
      std::copy(flat.values().begin(), flat.values().end(),
                stack.values.row(s).begin());
    }
  }
  std::size_t next = 0;
  for (std::size_t s = kSlotsPerPolarity; s < kNumSlots; ++s) {
    if (occupancy[s] != SlotKind::kNegative) continue;
    if (next >= negative_maps.size()) {
      throw DimensionError("order stack: fewer negative maps than slots");
    }
    const Tensor flat = ResizeFlat(negative_maps[next++], feat_h, feat_w);
    std::copy(flat.values().begin(), flat.values().end(),
              stack.values.row(s).begin());
  }
  return stack;
}

OrderMaskStack BuildOrderStack(const DepthMap& depth, const ClickSet& clicks,
                               std::size_t feat_h, std::size_t feat_w,
                               OrderNormalization mode) {
  std::optional<OrderMap> positive;
  if (!clicks.positives().empty()) {
    positive = PositiveOrderMap(depth, clicks, mode);
  }
  std::vector<OrderMap> negatives;
  negatives.reserve(clicks.negatives().size());
  for (const Click& c : clicks.negatives()) {
    negatives.push_back(NegativeOrderMap(depth, c, mode));
  }
  return AssembleOrderStack(positive, negatives, OccupancyOf(clicks), feat_h,
                            feat_w);
}

}  // namespace ois
