#pragma once

#include <optional>
#include <random>
#include <vector>

#include "ois/common/mask.hpp"
#include "ois/prompts/clicks.hpp"

namespace ois {

// Squared Euclidean distance from every pixel to the nearest pixel outside
// `mask` (pixels beyond the image border count as outside). Zero for pixels
// not in the mask. Exact (separable lower-envelope transform).
std::vector<double> SquaredDistanceToBoundary(const BinaryMask& mask);

struct ErrorRegion {
  Polarity polarity = Polarity::kPositive;  // positive = false negative area
  std::vector<int> pixels;                  // row-major indices, ascending
};

// 4-connected components of the false-negative area (gt & !pred) and of the
// false-positive area (pred & !gt), each component holding one error type.
// Sorted by their smallest pixel index.
std::vector<ErrorRegion> ErrorRegions(const BinaryMask& pred,
                                      const BinaryMask& gt);

// Simulated user: click the pixel farthest from the boundary of the largest
// error component. Ties between components go to the one holding the smallest
// (y, x) pixel; ties between pixels to the smallest (y, x). Returns nullopt
// when pred == gt. Throws DimensionError for mismatched sizes.
std::optional<Click> NextClick(const BinaryMask& pred, const BinaryMask& gt,
                               int round = 0);

// Training-time click sampler. Round 0 (or no prediction): a uniformly random
// gt pixel at distance >= 2 from the gt boundary, falling back to any gt
// pixel. Later rounds: NextClick, replaced with probability
// `random_click_prob` by a uniformly random error pixel. Throws DataError for
// an empty gt; returns nullopt when the prediction is already exact.
std::optional<Click> SampleTrainClick(const BinaryMask& gt,
                                      const BinaryMask* pred, int round,
                                      std::mt19937_64& rng,
                                      double random_click_prob = 0.3);

}  // namespace ois
