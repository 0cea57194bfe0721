#include "ois/cli/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ois/simharness/click_sim.hpp"
#include "ois/simharness/protocol.hpp"

namespace ois {

namespace fs = std::filesystem;

namespace {

std::uint8_t ToByte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::string Numbered(const char* stem, std::size_t k) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%02zu.png", stem, k);
  return buf;
}

}  // namespace

Image8 RasterToGray(const Tensor& raster) {
  Image8 img{static_cast<int>(raster.dim(1)), static_cast<int>(raster.dim(0)), 1, {}};
  img.data.resize(raster.size());
  for (std::size_t i = 0; i < raster.size(); ++i) img.data[i] = ToByte(raster[i]);
  return img;
}

Image8 Heatmap(const std::vector<double>& values, std::size_t h, std::size_t w,
               int out_h, int out_w) {
  if (values.size() != h * w) throw DimensionError("heatmap: value count");
  const double top = *std::max_element(values.begin(), values.end());
  Image8 img{out_w, out_h, 3, std::vector<std::uint8_t>(3 * out_w * out_h)};
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const std::size_t cy = static_cast<std::size_t>(y) * h / out_h;
      const std::size_t cx = static_cast<std::size_t>(x) * w / out_w;
      const double t = top > 0.0 ? values[cy * w + cx] / top : 0.0;
      std::uint8_t* px = &img.data[3 * (y * out_w + x)];
      px[0] = ToByte(3.0 * t);
      px[1] = ToByte(3.0 * t - 1.0);
      px[2] = ToByte(3.0 * t - 2.0);
    }
  }
  return img;
}

Image8 MaskOverlay(const Tensor& image, const BinaryMask& mask,
                   const ClickSet& clicks) {
  Image8 img = TensorToImage(image);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!mask.at(x, y)) continue;
      std::uint8_t* px = &img.data[3 * (y * img.width + x)];
      px[0] = static_cast<std::uint8_t>((px[0] + 0) / 2);
      px[1] = static_cast<std::uint8_t>((px[1] + 120) / 2);
      px[2] = static_cast<std::uint8_t>((px[2] + 255) / 2);
    }
  }
  for (const Click& c : clicks.history()) {
    const bool pos = c.polarity == Polarity::kPositive;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = c.x + dx, y = c.y + dy;
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
        std::uint8_t* px = &img.data[3 * (y * img.width + x)];
        px[0] = pos ? 0 : 255;
        px[1] = pos ? 255 : 0;
        px[2] = 0;
      }
    }
  }
  return img;
}

Image8 HStack(const std::vector<Image8>& images) {
  if (images.empty()) throw ValidationError("hstack: no images");
  Image8 out{0, images.front().height, images.front().channels, {}};
  for (const Image8& im : images) {
    if (im.height != out.height || im.channels != out.channels) {
      throw DimensionError("hstack: images differ in height or channels");
    }
    out.width += im.width;
  }
  out.data.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  int x0 = 0;
  for (const Image8& im : images) {
    for (int y = 0; y < im.height; ++y) {
      std::copy_n(&im.data[static_cast<std::size_t>(y) * im.width * im.channels],
                  im.width * im.channels,
                  &out.data[(static_cast<std::size_t>(y) * out.width + x0) * out.channels]);
    }
    x0 += im.width;
  }
  return out;
}

VizPanels RenderViz(const OisModel<float>& model, const Scene& scene,
                    int instance, int rounds) {
  if (instance < 0 || instance >= static_cast<int>(scene.masks.size())) {
    throw ValidationError("viz: instance index out of range");
  }
  const BinaryMask& gt = scene.masks[instance];
  const FeatureMap<float> features = model.EncodeImage(scene.image, scene.depth);
  const OrderNormalization mode = model.config().order_normalization;
  VizPanels panels;
  ClickSet clicks;
  BinaryMask pred(gt.width, gt.height);
  std::optional<BinaryMask> previous;
  for (int round = 0; round < rounds; ++round) {
    const std::optional<Click> click = NextClick(pred, gt, round);
    if (!click || !clicks.HasRoom(click->polarity)) break;
    clicks.Add(*click);
    const OrderMap map = click->polarity == Polarity::kPositive
                             ? PositiveOrderMap(scene.depth, clicks, mode)
                             : NegativeOrderMap(scene.depth, *click, mode);
    panels.order_maps.push_back(RasterToGray(map.values));
    if (round == 0) {
      const std::size_t h = features.height, w = features.width;
      for (bool apply : {false, true}) {
        const Tensor wts =
            model.FirstBlockOrderWeights(features, clicks, scene.depth, apply);
        std::vector<double> row(h * w);
        for (std::size_t i = 0; i < h * w; ++i) row[i] = wts.at(0, i);
        (apply ? panels.attention_after : panels.attention_before) =
            Heatmap(row, h, w, features.image_height, features.image_width);
      }
    }
    pred = model.Predict(features, clicks, scene.depth,
                         previous ? &*previous : nullptr);
    previous = pred;
    panels.overlays.push_back(MaskOverlay(scene.image, pred, clicks));
    panels.ious.push_back(Iou(pred, gt));
  }
  return panels;
}

void WriteVizPanels(const fs::path& dir, const VizPanels& panels) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < panels.order_maps.size(); ++k) {
    WritePng(dir / Numbered("order_round", k), panels.order_maps[k]);
  }
  if (!panels.order_maps.empty()) {
    WritePng(dir / "order_maps.png", HStack(panels.order_maps));
  }
  if (panels.attention_before.width > 0) {
    WritePng(dir / "attention_before.png", panels.attention_before);
    WritePng(dir / "attention_after.png", panels.attention_after);
  }
  for (std::size_t k = 0; k < panels.overlays.size(); ++k) {
    WritePng(dir / Numbered("overlay_round", k), panels.overlays[k]);
  }
}

}  // namespace ois
