#include <algorithm>

#include "qtransfer/errors.hpp"
#include "qtransfer/replay.hpp"

namespace qtransfer {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), base_(1) {
  if (capacity == 0) throw ConfigError("sum tree capacity must be positive");
  while (base_ < capacity) base_ <<= 1;
  nodes_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
  std::size_t i = base_ + leaf;
  nodes_[i] = value;
  // Parents are recomputed from both children so no rounding drift builds up.
  for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

std::size_t SumTree::find(double prefix) const {
  prefix = std::clamp(prefix, 0.0, total());
  std::size_t i = 1;
  while (i < base_) {
    const double left = nodes_[2 * i];
    if (prefix < left || nodes_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      prefix -= left;
      i = 2 * i + 1;
    }
  }
  std::size_t leaf = i - base_;
  // Rounding at the very top of the range can land past the last populated
  // leaf; walk back to a non-empty one.
  while (leaf > 0 && nodes_[base_ + leaf] <= 0.0) --leaf;
  return std::min(leaf, capacity_ - 1);
}

}  // namespace qtransfer
