#include "ois/prompts/clicks.hpp"

#include "ois/common/errors.hpp"

namespace ois {

void ClickSet::Add(const Click& click) {
  if (!history_.empty() && click.round < history_.back().round) {
    throw ValidationError("click round index decreased from " +
                          std::to_string(history_.back().round) + " to " +
                          std::to_string(click.round));
  }
  auto& list =
      click.polarity == Polarity::kPositive ? positives_ : negatives_;
  if (list.size() >= kSlotsPerPolarity) {
    throw CapacityError(std::string("no free ") +
                        PolarityName(click.polarity) + " click slot (limit " +
                        std::to_string(kSlotsPerPolarity) + ")");
  }
  list.push_back(click);
  history_.push_back(click);
}

bool ClickSet::HasRoom(Polarity p) const {
  const auto& list = p == Polarity::kPositive ? positives_ : negatives_;
  return list.size() < kSlotsPerPolarity;
}

void ClickSet::PopLast() {
  if (history_.empty()) return;
  const Click last = history_.back();
  history_.pop_back();
  auto& list = last.polarity == Polarity::kPositive ? positives_ : negatives_;
  list.pop_back();
}

void ClickSet::CheckBounds(int width, int height) const {
  for (const Click& c : history_) {
    if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height) {
      throw ValidationError("click (" + std::to_string(c.x) + ", " +
                            std::to_string(c.y) + ") outside " +
                            std::to_string(width) + "x" +
                            std::to_string(height) + " image");
    }
  }
}

}  // namespace ois
