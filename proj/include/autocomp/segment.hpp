#pragma once

// Fallback raw-mask estimator for images shot against a roughly uniform
// backdrop: the backdrop color is the per-channel median of the border pixels
// and a pixel's foreground score ramps with its color distance from it.

#include <algorithm>
#include <cmath>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/imgcore.hpp"

namespace autocomp {

struct ThresholdSegmenterConfig {
  double low = 0.08;   // distance at or below which a pixel is backdrop
  double high = 0.2;   // distance at or above which a pixel is foreground
  int border = 2;      // border width sampled for the backdrop color
};

inline SoftMask threshold_segment(const Image& img, const ThresholdSegmenterConfig& cfg = {}) {
  if (!(cfg.high > cfg.low) || cfg.low < 0.0 || cfg.border < 1)
    throw UsageError("threshold segmenter needs 0 <= low < high and border >= 1");
  const Image rgb = to_rgb(img);
  const int h = rgb.height();
  const int w = rgb.width();
  const int b = std::min({cfg.border, h, w});

  float backdrop[3];
  for (int c = 0; c < 3; ++c) {
    std::vector<float> samples;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (y < b || x < b || y >= h - b || x >= w - b) samples.push_back(rgb.at(y, x, c));
    auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
    std::nth_element(samples.begin(), mid, samples.end());
    backdrop[c] = *mid;
  }

  SoftMask mask(h, w);
  bool any_fg = false;
  bool any_bg = false;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = rgb.at(y, x, c) - backdrop[c];
        d2 += d * d;
      }
      const double t = std::clamp((std::sqrt(d2) - cfg.low) / (cfg.high - cfg.low), 0.0, 1.0);
      const float v = static_cast<float>(t * t * (3.0 - 2.0 * t));
      mask.at(y, x) = v;
      any_fg = any_fg || v >= 0.5f;
      any_bg = any_bg || v < 0.5f;
    }
  if (!any_fg) throw DataError("threshold segmenter found no foreground (image matches its border color)");
  if (!any_bg) throw DataError("threshold segmenter found no background");
  return mask;
}

}  // namespace autocomp
