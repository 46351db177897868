#include "dax/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dax/errors.hpp"

namespace dax::seg {

void validate(const QuickShiftConfig& cfg) {
  if (!(cfg.kernel_size > 0.0)) throw ConfigError("quick shift kernel_size must be > 0");
  if (!(cfg.max_dist >= cfg.kernel_size)) throw ConfigError("quick shift max_dist must be >= kernel_size");
  if (!(cfg.ratio >= 0.0 && cfg.ratio <= 1.0)) throw ConfigError("quick shift ratio must lie in [0, 1]");
}

SegmentMap::SegmentMap(int height, int width, std::vector<int> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (labels_.size() != static_cast<std::size_t>(height) * width) throw ConfigError("segment map size mismatch");
  count_ = labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
  sizes_.assign(static_cast<std::size_t>(count_), 0);
  for (int l : labels_) {
    if (l < 1) throw ConfigError("segment labels must be >= 1");
    ++sizes_[static_cast<std::size_t>(l - 1)];
  }
  for (int s : sizes_) {
    if (s == 0) throw ConfigError("segment labels must cover 1..S without gaps");
  }
}

SegmentMap compact_labels(int height, int width, const std::vector<int>& raw) {
  std::unordered_map<int, int> remap;
  std::vector<int> labels(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(raw[i], static_cast<int>(remap.size()) + 1);
    labels[i] = it->second;
  }
  return SegmentMap(height, width, std::move(labels));
}

SegmentMap quick_shift(const Image& image, const QuickShiftConfig& cfg) {
  validate(cfg);
  if (image.empty()) throw ConfigError("quick shift needs a non-empty image");
  if (image.channels() > 4) throw ConfigError("quick shift supports at most 4 channels");

  const int h = image.height(), w = image.width(), nc = image.channels();
  const std::size_t n = image.shape().pixels();
  const double color_weight = cfg.ratio * kColorScale;

  auto color_dist2 = [&](std::size_t a, std::size_t b) {
    const auto d = image.data();
    double s = 0.0;
    for (int c = 0; c < nc; ++c) {
      const double diff = color_weight * (d[a * nc + c] - d[b * nc + c]);
      s += diff * diff;
    }
    return s;
  };

  // Parzen density. Offsets are visited in a fixed order so pixels with the
  // same neighbourhood get bit-identical sums and ties resolve by index.
  const double sigma = cfg.kernel_size;
  const int window = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> density(n, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      double e = 0.0;
      for (int dr = -window; dr <= window; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= h) continue;
        for (int dc = -window; dc <= window; ++dc) {
          const int cc = c + dc;
          if (cc < 0 || cc >= w) continue;
          const std::size_t j = static_cast<std::size_t>(rr) * w + cc;
          const double d2 = dr * dr + dc * dc + color_dist2(i, j);
          e += std::exp(-d2 / (2.0 * sigma * sigma));
        }
      }
      density[i] = e;
    }
  }

  auto ranks_higher = [&](std::size_t j, std::size_t i) {
    return density[j] > density[i] || (density[j] == density[i] && j < i);
  };

  // Parent links.
  const double max_d2 = cfg.max_dist * cfg.max_dist;
  const int reach = static_cast<int>(std::floor(cfg.max_dist));
  std::vector<std::size_t> parent(n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      std::size_t best = i;
      double best_d2 = INFINITY;
      for (int dr = -reach; dr <= reach; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= h) continue;
        for (int dc = -reach; dc <= reach; ++dc) {
          const int cc = c + dc;
          if (cc < 0 || cc >= w) continue;
          const std::size_t j = static_cast<std::size_t>(rr) * w + cc;
          if (j == i || !ranks_higher(j, i)) continue;
          const double d2 = dr * dr + dc * dc + color_dist2(i, j);
          if (d2 > max_d2) continue;
          if (d2 < best_d2 || (d2 == best_d2 && j < best)) {
            best_d2 = d2;
            best = j;
          }
        }
      }
      parent[i] = best;
    }
  }

  // Resolve roots with path compression. Links always point up the rank
  // order, so there are no cycles.
  std::vector<int> root(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = i;
    while (parent[k] != k) k = parent[k];
    std::size_t j = i;
    while (parent[j] != j) {
      const std::size_t next = parent[j];
      parent[j] = k;
      j = next;
    }
    root[i] = static_cast<int>(k) + 1;
  }
  // Label roots in raster order.
  std::vector<int> root_label(n + 1, 0);
  int next_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (parent[i] == i) root_label[i + 1] = ++next_label;
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = root_label[static_cast<std::size_t>(root[i])];
  return SegmentMap(h, w, std::move(labels));
}

std::vector<SegmentStats> segment_stats(const SegmentMap& map) {
  std::vector<SegmentStats> stats(static_cast<std::size_t>(map.count()));
  for (int s = 0; s < map.count(); ++s) {
    stats[s].label = s + 1;
    stats[s].min_row = map.height();
    stats[s].min_col = map.width();
    stats[s].max_row = -1;
    stats[s].max_col = -1;
  }
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      SegmentStats& st = stats[static_cast<std::size_t>(map.at(r, c) - 1)];
      ++st.size;
      st.min_row = std::min(st.min_row, r);
      st.min_col = std::min(st.min_col, c);
      st.max_row = std::max(st.max_row, r);
      st.max_col = std::max(st.max_col, c);
    }
  }
  return stats;
}

}  // namespace dax::seg
