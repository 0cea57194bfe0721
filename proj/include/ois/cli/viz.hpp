#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ois/io/png.hpp"
#include "ois/model/model.hpp"
#include "ois/scenegen/scene.hpp"

namespace ois {

// Grayscale rendering of a [0,1] raster at its own resolution.
Image8 RasterToGray(const Tensor& raster);

// Heat colouring (black -> red -> yellow -> white) of `values` [h*w],
// scaled by their maximum and upsampled with nearest neighbours to
// out_w x out_h.
Image8 Heatmap(const std::vector<double>& values, std::size_t h, std::size_t w,
               int out_h, int out_w);

// Image with the mask tinted and clicks drawn as green (positive) or red
// (negative) squares.
Image8 MaskOverlay(const Tensor& image, const BinaryMask& mask,
                   const ClickSet& clicks);

// Side-by-side panel; all images must share height and channel count.
Image8 HStack(const std::vector<Image8>& images);

struct VizPanels {
  std::vector<Image8> order_maps;  // one per click, in click order
  Image8 attention_before;
  Image8 attention_after;
  std::vector<Image8> overlays;  // one per round
  std::vector<double> ious;
};

// Plays `rounds` protocol rounds on `scene`'s instance `instance` and renders
// every panel family.
VizPanels RenderViz(const OisModel<float>& model, const Scene& scene,
                    int instance, int rounds);

// Writes order_maps.png, order_round_KK.png, attention_before.png,
// attention_after.png, overlay_round_KK.png into `dir`.
void WriteVizPanels(const std::filesystem::path& dir, const VizPanels& panels);

}  // namespace ois
