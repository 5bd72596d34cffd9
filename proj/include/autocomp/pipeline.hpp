#pragma once

// End-to-end automatic compositing: raw mask (given or segmented) ->
// multi-scale refinement -> fusion network on a square canvas.

#include <functional>
#include <optional>
#include <vector>

#include "autocomp/composite.hpp"
#include "autocomp/error.hpp"
#include "autocomp/imgcore.hpp"
#include "autocomp/mlf.hpp"
#include "autocomp/segment.hpp"

namespace autocomp {

// (fg, mask, bg) -> composite at the input resolution.
using MaskCompositor = std::function<Image(const Image&, const SoftMask&, const Image&)>;

inline MaskCompositor alpha_compositor() {
  return [](const Image& fg, const SoftMask& mask, const Image& bg) { return alpha_composite(fg, bg, mask); };
}

template <class T>
MaskCompositor mlf_compositor(const MlfNetwork<T>& net, int canvas = 768) {
  return [&net, canvas](const Image& fg, const SoftMask& mask, const Image& bg) {
    return mlf_composite(net, fg, mask, bg, canvas);
  };
}

struct PipelineConfig {
  std::vector<int> refine_scales{320, 640};
  ThresholdSegmenterConfig segmenter;
};

struct PipelineResult {
  SoftMask raw_mask;
  SoftMask refined_mask;
  Image composite;
};

// The background is resized to the foreground size when they differ.
inline PipelineResult run_pipeline(const Image& fg, const Image& bg, const std::optional<SoftMask>& raw,
                                   const Refiner& refiner, const MaskCompositor& compositor,
                                   const PipelineConfig& cfg = {}) {
  if (!refiner || !compositor) throw UsageError("pipeline needs a refiner and a compositor");
  const Image fg_rgb = to_rgb(fg);
  const Image bg_rgb = to_rgb(bg.same_size(fg) ? bg : resize_bilinear(bg, fg.width(), fg.height()));
  PipelineResult r;
  r.raw_mask = raw ? *raw : threshold_segment(fg_rgb, cfg.segmenter);
  if (!r.raw_mask.same_size(fg)) throw DataError("raw mask dimensions differ from the foreground");
  r.refined_mask = refine_mask_multiscale(fg_rgb, r.raw_mask, refiner, cfg.refine_scales);
  r.composite = compositor(fg_rgb, r.refined_mask, bg_rgb);
  if (!r.composite.same_size(fg)) throw DataError("compositor changed the image dimensions");
  return r;
}

}  // namespace autocomp
