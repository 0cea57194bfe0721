#include "ois/simharness/click_sim.hpp"

#include <algorithm>
#include <limits>

namespace ois {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Stand-in for +inf inside the transform; the padded border guarantees every
// line holds at least one zero, so no result stays at this value.
constexpr double kFar = 1e20;

// 1-D squared distance transform of a sampled function (lower envelope of
// parabolas, Felzenszwalb & Huttenlocher).
void Transform1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto meet = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) -
            (f[p] + static_cast<double>(p) * p)) /
           (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = meet(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = meet(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace

std::vector<double> SquaredDistanceToBoundary(const BinaryMask& mask) {
  // Pad by one pixel so the image border counts as outside.
  const int w = mask.width + 2, h = mask.height + 2;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) grid[(y + 1) * w + (x + 1)] = kFar;
    }
  }
  std::vector<double> f, d;
  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[y * w + x];
    Transform1d(f, d);
    for (int y = 0; y < h; ++y) grid[y * w + x] = d[y];
  }
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = grid[y * w + x];
    Transform1d(f, d);
    for (int x = 0; x < w; ++x) grid[y * w + x] = d[x];
  }
  std::vector<double> out(mask.size());
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      out[static_cast<std::size_t>(y) * mask.width + x] =
          grid[(y + 1) * w + (x + 1)];
    }
  }
  return out;
}

std::vector<ErrorRegion> ErrorRegions(const BinaryMask& pred,
                                      const BinaryMask& gt) {
  RequireSameSize(pred, gt);
  const int w = gt.width, h = gt.height;
  const std::size_t n = gt.size();
  // 0 = no error, 1 = false negative, 2 = false positive.
  std::vector<std::uint8_t> kind(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.bits[i] && !pred.bits[i]) kind[i] = 1;
    if (!gt.bits[i] && pred.bits[i]) kind[i] = 2;
  }
  std::vector<int> label(n, -1);
  std::vector<ErrorRegion> regions;
  std::vector<int> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (kind[start] == 0 || label[start] >= 0) continue;
    const int id = static_cast<int>(regions.size());
    ErrorRegion region;
    region.polarity = kind[start] == 1 ? Polarity::kPositive : Polarity::kNegative;
    stack.assign(1, static_cast<int>(start));
    label[start] = id;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      region.pixels.push_back(p);
      const int px = p % w, py = p / w;
      const int nbrs[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
      for (const auto& nb : nbrs) {
        if (nb[0] < 0 || nb[1] < 0 || nb[0] >= w || nb[1] >= h) continue;
        const int q = nb[1] * w + nb[0];
        if (kind[q] == kind[start] && label[q] < 0) {
          label[q] = id;
          stack.push_back(q);
        }
      }
    }
    std::sort(region.pixels.begin(), region.pixels.end());
    regions.push_back(std::move(region));
  }
  return regions;
}

std::optional<Click> NextClick(const BinaryMask& pred, const BinaryMask& gt,
                               int round) {
  const std::vector<ErrorRegion> regions = ErrorRegions(pred, gt);
  if (regions.empty()) return std::nullopt;
  // Regions are ordered by their first pixel, so strict > keeps the
  // lexicographically smallest on ties.
  const ErrorRegion* best = &regions.front();
  for (const ErrorRegion& r : regions) {
    if (r.pixels.size() > best->pixels.size()) best = &r;
  }
  BinaryMask component(gt.width, gt.height);
  for (int p : best->pixels) component.bits[p] = 1;
  const std::vector<double> dist = SquaredDistanceToBoundary(component);
  int arg = best->pixels.front();
  for (int p : best->pixels) {
    if (dist[p] > dist[arg]) arg = p;
  }
  return Click{arg % gt.width, arg / gt.width, best->polarity, round};
}

std::optional<Click> SampleTrainClick(const BinaryMask& gt,
                                      const BinaryMask* pred, int round,
                                      std::mt19937_64& rng,
                                      double random_click_prob) {
  if (gt.Empty()) throw DataError("click sampling: empty ground-truth mask");
  if (round == 0 || pred == nullptr) {
    const std::vector<double> dist = SquaredDistanceToBoundary(gt);
    std::vector<int> interior, any;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!gt.bits[i]) continue;
      any.push_back(static_cast<int>(i));
      if (dist[i] >= 4.0) interior.push_back(static_cast<int>(i));
    }
    const std::vector<int>& pool = interior.empty() ? any : interior;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const int p = pool[pick(rng)];
    return Click{p % gt.width, p / gt.width, Polarity::kPositive, round};
  }
  RequireSameSize(*pred, gt);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < random_click_prob) {
    std::vector<int> errors;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt.bits[i] != pred->bits[i]) errors.push_back(static_cast<int>(i));
    }
    if (errors.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, errors.size() - 1);
    const int p = errors[pick(rng)];
    return Click{p % gt.width, p / gt.width,
                 gt.bits[p] ? Polarity::kPositive : Polarity::kNegative, round};
  }
  return NextClick(*pred, gt, round);
}

}  // namespace ois
