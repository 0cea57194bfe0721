#include "ois/scenegen/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

namespace ois {

const char* SplitName(SceneSplit split) {
  switch (split) {
    case SceneSplit::kPlain: return "plain";
    case SceneSplit::kOverlap: return "overlap";
    case SceneSplit::kSameDepth: return "same_depth";
  }
  return "plain";
}

SceneSplit ParseSplit(const std::string& name) {
  if (name == "plain") return SceneSplit::kPlain;
  if (name == "overlap") return SceneSplit::kOverlap;
  if (name == "same_depth" || name == "same-depth") return SceneSplit::kSameDepth;
  throw ValidationError("unknown split '" + name + "'");
}

double BoxIou(const Box& a, const Box& b) {
  const Box inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0),
                  std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  const int i = inter.Area();
  const int u = a.Area() + b.Area() - i;
  return u > 0 ? static_cast<double>(i) / u : 0.0;
}

namespace {

using Rgb = std::array<float, 3>;

enum class Texture { kFlat, kGradient, kNoise };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::kDisk;
  double cx = 0, cy = 0, r = 0;
  double hx = 0, hy = 0;                        // rectangle half extents
  std::vector<std::array<double, 2>> polygon;   // convex, counter-clockwise
  Rgb color{};
  Rgb color2{};
  Texture texture = Texture::kFlat;
  double gx = 1, gy = 0;                         // gradient direction
  int layer = 0;
};

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int UniformInt(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Rgb RandomColor(std::mt19937_64& rng) {
  return {static_cast<float>(Uniform(rng, 0.1, 0.9)),
          static_cast<float>(Uniform(rng, 0.1, 0.9)),
          static_cast<float>(Uniform(rng, 0.1, 0.9))};
}

// Andrew's monotone chain; returns the hull counter-clockwise.
std::vector<std::array<double, 2>> ConvexHull(std::vector<std::array<double, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::array<double, 2>> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

void SampleGeometry(std::mt19937_64& rng, int size, ShapeSpec& s) {
  s.kind = static_cast<ShapeKind>(UniformInt(rng, 0, 2));
  s.cx = Uniform(rng, 0.15 * size, 0.85 * size);
  s.cy = Uniform(rng, 0.15 * size, 0.85 * size);
  s.r = Uniform(rng, 0.12 * size, 0.25 * size);
  s.hx = s.r * Uniform(rng, 0.6, 1.0);
  s.hy = s.r * Uniform(rng, 0.6, 1.0);
  s.polygon.clear();
  if (s.kind == ShapeKind::kPolygon) {
    const int n = UniformInt(rng, 3, 7);
    std::vector<std::array<double, 2>> pts;
    for (int i = 0; i < n; ++i) {
      const double a = Uniform(rng, 0.0, 2.0 * M_PI);
      const double rad = s.r * Uniform(rng, 0.7, 1.0);
      pts.push_back({s.cx + rad * std::cos(a), s.cy + rad * std::sin(a)});
    }
    s.polygon = ConvexHull(std::move(pts));
    if (s.polygon.size() < 3) {
      s.kind = ShapeKind::kDisk;
      s.polygon.clear();
    }
  }
}

void MoveTo(ShapeSpec& s, double cx, double cy) {
  const double sx = cx - s.cx, sy = cy - s.cy;
  s.cx = cx;
  s.cy = cy;
  for (auto& p : s.polygon) {
    p[0] += sx;
    p[1] += sy;
  }
}

void SampleAppearance(std::mt19937_64& rng, ShapeSpec& s) {
  s.color = RandomColor(rng);
  s.color2 = RandomColor(rng);
  s.texture = static_cast<Texture>(UniformInt(rng, 0, 2));
  const double a = Uniform(rng, 0.0, 2.0 * M_PI);
  s.gx = std::cos(a);
  s.gy = std::sin(a);
}

bool Contains(const ShapeSpec& s, double px, double py) {
  switch (s.kind) {
    case ShapeKind::kDisk: {
      const double dx = px - s.cx, dy = py - s.cy;
      return dx * dx + dy * dy <= s.r * s.r;
    }
    case ShapeKind::kRect:
      return std::abs(px - s.cx) <= s.hx && std::abs(py - s.cy) <= s.hy;
    case ShapeKind::kPolygon: {
      const std::size_t n = s.polygon.size();
      for (std::size_t i = 0; i < n; ++i) {
        const auto& a = s.polygon[i];
        const auto& b = s.polygon[(i + 1) % n];
        if ((b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]) < 0) {
          return false;
        }
      }
      return true;
    }
  }
  return false;
}

BinaryMask Rasterize(const ShapeSpec& s, int size) {
  BinaryMask m(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (Contains(s, x + 0.5, y + 0.5)) m.set(x, y, true);
    }
  }
  return m;
}

Box BoundingBox(const BinaryMask& m) {
  Box b{m.width, m.height, 0, 0};
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x + 1);
      b.y1 = std::max(b.y1, y + 1);
    }
  }
  if (b.x1 == 0) return Box{};
  return b;
}

float Quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::lround(c * 255.0)) / 255.0f;
}

Rgb ShadePixel(const ShapeSpec& s, int x, int y, int size,
               std::mt19937_64& noise) {
  switch (s.texture) {
    case Texture::kFlat:
      return s.color;
    case Texture::kGradient: {
      const double t = std::clamp(
          0.5 + ((x + 0.5 - s.cx) * s.gx + (y + 0.5 - s.cy) * s.gy) /
                    (2.0 * std::max(s.r, 1.0)),
          0.0, 1.0);
      Rgb c;
      for (int k = 0; k < 3; ++k) {
        c[k] = static_cast<float>((1.0 - t) * s.color[k] + t * s.color2[k]);
      }
      return c;
    }
    case Texture::kNoise: {
      const float d = static_cast<float>(Uniform(noise, -0.08, 0.08));
      return {s.color[0] + d, s.color[1] + d, s.color[2] + d};
    }
  }
  return s.color;
}

bool Adjacent(const BinaryMask& a, const BinaryMask& b) {
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!a.at(x, y)) continue;
      if ((x + 1 < a.width && b.at(x + 1, y)) || (x > 0 && b.at(x - 1, y)) ||
          (y + 1 < a.height && b.at(x, y + 1)) || (y > 0 && b.at(x, y - 1))) {
        return true;
      }
    }
  }
  return false;
}

// One composition attempt; nullopt when the split constraints fail.
std::optional<Scene> TryCompose(std::mt19937_64& rng, int size,
                                SceneSplit split, const SceneOptions& opt) {
  const int n = UniformInt(rng, opt.min_shapes, opt.max_shapes);
  std::vector<ShapeSpec> shapes(n);
  for (ShapeSpec& s : shapes) {
    SampleGeometry(rng, size, s);
    SampleAppearance(rng, s);
    s.layer = UniformInt(rng, 0, opt.depth_layers - 1);
  }
  if (split == SceneSplit::kOverlap) {
    ShapeSpec& a = shapes[0];
    ShapeSpec& b = shapes[1];
    a.texture = Texture::kFlat;
    const double cx =
        std::clamp(a.cx + Uniform(rng, -0.7, 0.7) * a.r, 0.1 * size, 0.9 * size);
    const double cy =
        std::clamp(a.cy + Uniform(rng, -0.7, 0.7) * a.r, 0.1 * size, 0.9 * size);
    MoveTo(b, cx, cy);
    b.color = a.color;
    b.texture = Texture::kFlat;
    while (b.layer == a.layer) b.layer = UniformInt(rng, 0, opt.depth_layers - 1);
  } else if (split == SceneSplit::kSameDepth) {
    ShapeSpec& a = shapes[0];
    ShapeSpec& b = shapes[1];
    const double angle = Uniform(rng, 0.0, 2.0 * M_PI);
    const double dist = a.r + b.r * Uniform(rng, 0.6, 1.0);
    const double cx = std::clamp(a.cx + dist * std::cos(angle), 0.1 * size, 0.9 * size);
    const double cy = std::clamp(a.cy + dist * std::sin(angle), 0.1 * size, 0.9 * size);
    MoveTo(b, cx, cy);
    b.layer = a.layer;
  }

  std::vector<BinaryMask> full(n);
  for (int i = 0; i < n; ++i) full[i] = Rasterize(shapes[i], size);

  // Painter's algorithm: farther layers first, ties drawn in index order.
  std::vector<int> draw(n);
  for (int i = 0; i < n; ++i) draw[i] = i;
  std::stable_sort(draw.begin(), draw.end(), [&](int a, int b) {
    return shapes[a].layer > shapes[b].layer;
  });
  std::vector<int> owner(static_cast<std::size_t>(size) * size, -1);
  for (int i : draw) {
    for (std::size_t p = 0; p < owner.size(); ++p) {
      if (full[i].bits[p]) owner[p] = i;
    }
  }

  std::vector<BinaryMask> modal(n, BinaryMask(size, size));
  for (std::size_t p = 0; p < owner.size(); ++p) {
    if (owner[p] >= 0) modal[owner[p]].bits[p] = 1;
  }

  std::optional<std::pair<int, int>> pair;
  if (split != SceneSplit::kPlain) {
    if (static_cast<int>(modal[0].Count()) < opt.min_pair_area ||
        static_cast<int>(modal[1].Count()) < opt.min_pair_area) {
      return std::nullopt;
    }
    if (split == SceneSplit::kOverlap &&
        BoxIou(BoundingBox(full[0]), BoundingBox(full[1])) <
            opt.overlap_min_box_iou) {
      return std::nullopt;
    }
    if (split == SceneSplit::kSameDepth && !Adjacent(modal[0], modal[1])) {
      return std::nullopt;
    }
    pair = std::make_pair(0, 1);
  }

  // Drop fully hidden shapes; they own no pixel.
  std::vector<int> remap(n, -1);
  Scene scene;
  scene.split = split;
  scene.background_depth = opt.background_depth;
  for (int i = 0; i < n; ++i) {
    if (modal[i].Empty()) continue;
    remap[i] = static_cast<int>(scene.masks.size());
    scene.masks.push_back(modal[i]);
    scene.layer_depths.push_back(1.0f + static_cast<float>(shapes[i].layer));
    scene.kinds.push_back(shapes[i].kind);
    scene.boxes.push_back(BoundingBox(full[i]));
  }
  if (scene.masks.empty()) return std::nullopt;
  if (pair) scene.designated_pair = std::make_pair(remap[0], remap[1]);

  ShapeSpec background;
  background.color = RandomColor(rng);
  background.texture = Texture::kNoise;
  std::mt19937_64 noise(rng());
  scene.image = Tensor({static_cast<std::size_t>(size),
                        static_cast<std::size_t>(size), 3});
  scene.depth.values =
      Tensor({static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
  scene.depth.provenance = DepthProvenance::kSynthetic;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * size + x;
      const int o = owner[p];
      const Rgb c = o >= 0 ? ShadePixel(shapes[o], x, y, size, noise)
                           : ShadePixel(background, x, y, size, noise);
      for (int k = 0; k < 3; ++k) scene.image[p * 3 + k] = Quantize(c[k]);
      scene.depth.values[p] =
          o >= 0 ? 1.0f + static_cast<float>(shapes[o].layer) : opt.background_depth;
    }
  }
  return scene;
}

}  // namespace

Scene GenerateScene(std::mt19937_64& rng, int size, SceneSplit split,
                    const SceneOptions& options) {
  if (size < 32) throw ValidationError("scene size must be at least 32");
  if (options.min_shapes < 2 || options.max_shapes < options.min_shapes) {
    throw ValidationError("invalid shape count range");
  }
  if (static_cast<float>(options.depth_layers) >= options.background_depth) {
    throw ValidationError("background must lie behind every depth layer");
  }
  for (int attempt = 0; attempt < options.max_retries; ++attempt) {
    std::optional<Scene> scene = TryCompose(rng, size, split, options);
    if (scene) return std::move(*scene);
  }
  throw DataError(std::string("could not generate a '") + SplitName(split) +
                  "' scene within the retry budget");
}

void ValidateScene(const Scene& scene) {
  const int size = scene.size();
  if (scene.image.rank() != 3 || scene.image.dim(1) != static_cast<std::size_t>(size) ||
      scene.image.dim(2) != 3) {
    throw ValidationError("scene image must be square H x W x 3");
  }
  if (scene.depth.width() != size || scene.depth.height() != size) {
    throw ValidationError("scene depth size differs from the image");
  }
  const std::size_t n = scene.masks.size();
  if (scene.layer_depths.size() != n) {
    throw ValidationError("one layer depth per instance required");
  }
  for (float d : scene.layer_depths) {
    if (!(d < scene.background_depth)) {
      throw ValidationError("background must be farther than every instance");
    }
  }
  for (std::size_t p = 0; p < static_cast<std::size_t>(size) * size; ++p) {
    int owner = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (scene.masks[i].size() != static_cast<std::size_t>(size) * size) {
        throw ValidationError("instance mask size differs from the image");
      }
      if (!scene.masks[i].bits[p]) continue;
      if (owner >= 0) throw ValidationError("instance masks overlap");
      owner = static_cast<int>(i);
    }
    const float expected =
        owner >= 0 ? scene.layer_depths[owner] : scene.background_depth;
    if (scene.depth.values[p] != expected) {
      throw ValidationError("depth disagrees with the owning layer");
    }
  }
  if (scene.designated_pair) {
    const auto [a, b] = *scene.designated_pair;
    if (a < 0 || b < 0 || a >= static_cast<int>(n) || b >= static_cast<int>(n)) {
      throw ValidationError("designated pair out of range");
    }
  }
}

std::mt19937_64 SceneRng(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5ce9u};
  return std::mt19937_64(seq);
}

namespace {

void CheckManifest(const DatasetManifest& m) {
  if (m.count < 0) throw ValidationError("dataset count must be non-negative");
  if (m.size < 32) throw ValidationError("scene size must be at least 32");
  if (m.plain_ratio < 0 || m.overlap_ratio < 0 || m.same_depth_ratio < 0 ||
      m.plain_ratio + m.overlap_ratio + m.same_depth_ratio <= 0) {
    throw ValidationError("split ratios must be non-negative and not all zero");
  }
  if (m.generator_version != kGeneratorVersion) {
    throw ValidationError("unsupported generator version " +
                          std::to_string(m.generator_version));
  }
}

}  // namespace

Scene GenerateDatasetScene(const DatasetManifest& manifest, int index) {
  CheckManifest(manifest);
  std::mt19937_64 rng = SceneRng(manifest.seed, index);
  const double total =
      manifest.plain_ratio + manifest.overlap_ratio + manifest.same_depth_ratio;
  const double u = Uniform(rng, 0.0, total);
  SceneSplit split = SceneSplit::kSameDepth;
  if (u < manifest.plain_ratio) {
    split = SceneSplit::kPlain;
  } else if (u < manifest.plain_ratio + manifest.overlap_ratio) {
    split = SceneSplit::kOverlap;
  }
  return GenerateScene(rng, manifest.size, split);
}

std::vector<Scene> GenerateDataset(const DatasetManifest& manifest, int jobs) {
  CheckManifest(manifest);
  std::vector<Scene> scenes(manifest.count);
  jobs = std::max(1, jobs);
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&, j]() {
      try {
        for (int i = j; i < manifest.count; i += jobs) {
          scenes[i] = GenerateDatasetScene(manifest, i);
        }
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return scenes;
}

}  // namespace ois
