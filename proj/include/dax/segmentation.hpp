#pragma once

#include <cstdint>
#include <vector>

#include "dax/image.hpp"

namespace dax::seg {

// Quick-shift parameters. Distances live in a joint feature space
// (row, col, ratio * kColorScale * channel values), so `kernel_size` and
// `max_dist` read as pixels when colors agree.
struct QuickShiftConfig {
  double kernel_size = 1.5;  // Parzen bandwidth (sigma)
  double max_dist = 6.0;     // longest allowed parent link
  double ratio = 0.3;        // color vs. space weighting, in [0, 1]
  // Recorded for reproducibility manifests. Density ties are broken by pixel
  // index, so the result does not depend on it.
  std::uint64_t seed = 0;
};

// Channel values in [0, 1] are stretched to [0, kColorScale] before the ratio
// is applied, putting a full-range color step on the scale of an image side.
inline constexpr double kColorScale = 100.0;

void validate(const QuickShiftConfig& cfg);

// Per-pixel labels 1..count; a partition of the grid.
class SegmentMap {
 public:
  SegmentMap() = default;
  // Labels must already be 1..count with every label present.
  SegmentMap(int height, int width, std::vector<int> labels);

  int height() const { return height_; }
  int width() const { return width_; }
  int count() const { return count_; }
  int at(int row, int col) const { return labels_[static_cast<std::size_t>(row) * width_ + col]; }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  // sizes()[s - 1] is the pixel count of label s.
  const std::vector<int>& sizes() const { return sizes_; }

  bool operator==(const SegmentMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int count_ = 0;
  std::vector<int> labels_;
  std::vector<int> sizes_;
};

// Mode seeking: each pixel gets a Gaussian Parzen density over the joint
// feature space (window radius ceil(3 * kernel_size)), then links to the
// nearest pixel within max_dist that ranks strictly higher, where rank is
// (density, then lower pixel index). Unlinked pixels are roots and each tree
// becomes one segment. Labels follow the raster order of the roots.
SegmentMap quick_shift(const Image& image, const QuickShiftConfig& cfg);

struct SegmentStats {
  int label = 0;
  int size = 0;
  int min_row = 0;
  int min_col = 0;
  int max_row = 0;
  int max_col = 0;
};

std::vector<SegmentStats> segment_stats(const SegmentMap& map);

// Relabels arbitrary positive ids to 1..S in raster order of first
// appearance.
SegmentMap compact_labels(int height, int width, const std::vector<int>& raw);

}  // namespace dax::seg
