#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ois {

enum class Polarity { kPositive, kNegative };

inline const char* PolarityName(Polarity p) {
  return p == Polarity::kPositive ? "positive" : "negative";
}

struct Click {
  int x = 0;
  int y = 0;
  Polarity polarity = Polarity::kPositive;
  int round = 0;

  friend bool operator==(const Click&, const Click&) = default;
};

// Sparse slot layout: the first half of the slots belongs to positive clicks,
// the second half to negative clicks.
inline constexpr std::size_t kSlotsPerPolarity = 24;
inline constexpr std::size_t kNumSlots = 2 * kSlotsPerPolarity;

class ClickSet {
 public:
  ClickSet() = default;

  // Appends a click to the list matching its polarity. Throws CapacityError
  // when that list already holds kSlotsPerPolarity clicks, and
  // ValidationError when the round index decreases.
  void Add(const Click& click);

  // True if one more click of this polarity still fits.
  bool HasRoom(Polarity p) const;

  // Removes the most recently added click (either polarity).
  void PopLast();

  const std::vector<Click>& positives() const { return positives_; }
  const std::vector<Click>& negatives() const { return negatives_; }
  // Clicks in insertion order.
  const std::vector<Click>& history() const { return history_; }
  std::size_t size() const { return history_.size(); }
  bool empty() const { return history_.empty(); }

  // Throws ValidationError if any click lies outside a width x height image.
  void CheckBounds(int width, int height) const;

  friend bool operator==(const ClickSet&, const ClickSet&) = default;

 private:
  std::vector<Click> positives_;
  std::vector<Click> negatives_;
  std::vector<Click> history_;
};

}  // namespace ois
