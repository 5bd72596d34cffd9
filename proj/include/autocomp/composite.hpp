#pragma once

// Classical compositing baselines and mask plumbing.

#include <functional>
#include <string>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/imgcore.hpp"
#include "autocomp/log.hpp"

namespace autocomp {

struct CompositeConfig {
  double feather_sigma = 2.0;
  int trimap_band = 16;
  double binarize_threshold = 0.5;
  std::vector<int> refine_scales{320, 640};

  void validate() const {
    if (!(feather_sigma > 0.0)) throw UsageError("feather_sigma must be positive");
    if (trimap_band < 2 || trimap_band % 2 != 0) throw UsageError("trimap_band must be an even number >= 2");
    if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0))
      throw UsageError("binarize_threshold must lie strictly between 0 and 1");
    if (refine_scales.empty()) throw UsageError("refine_scales must not be empty");
    for (std::size_t i = 0; i < refine_scales.size(); ++i) {
      if (refine_scales[i] < 1) throw UsageError("refine scales must be positive");
      if (i > 0 && refine_scales[i] <= refine_scales[i - 1])
        throw UsageError("refine scales must be strictly increasing");
    }
  }
};

// Mask refinement: (image, mask) -> mask of the same dimensions.
using Refiner = std::function<SoftMask(const Image&, const SoftMask&)>;

inline Refiner identity_refiner() {
  return [](const Image&, const SoftMask& mask) { return mask; };
}

// out = alpha * fg + (1 - alpha) * bg
inline Image alpha_composite(const Image& fg, const Image& bg, const SoftMask& alpha) {
  if (!fg.same_size(bg) || fg.channels() != bg.channels() || !alpha.same_size(fg))
    throw DataError("alpha_composite needs foreground, background and alpha of equal dimensions");
  Image out(fg.height(), fg.width(), fg.channels());
  for (int y = 0; y < fg.height(); ++y)
    for (int x = 0; x < fg.width(); ++x) {
      const float a = alpha.at(y, x);
      for (int c = 0; c < fg.channels(); ++c) out.at(y, x, c) = a * fg.at(y, x, c) + (1.0f - a) * bg.at(y, x, c);
    }
  return out;
}

inline SoftMask feather_mask(const SoftMask& mask, double sigma) {
  SoftMask out = gaussian_blur(mask, sigma);
  out.clamp();
  return out;
}

// Ties (mask == threshold) go to foreground.
inline SoftMask binarize(const SoftMask& mask, double threshold) {
  SoftMask out(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) out.data()[i] = mask.data()[i] >= threshold ? 1.0f : 0.0f;
  return out;
}

inline SoftMask invert_mask(const SoftMask& mask) {
  SoftMask out(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) out.data()[i] = 1.0f - mask.data()[i];
  return out;
}

// A band of total width `band` around the binarized boundary becomes UNKNOWN:
// every pixel within band/2 of a pixel of the opposite label.
inline Trimap make_trimap(const SoftMask& mask, int band, double threshold) {
  if (band < 2 || band % 2 != 0) throw DataError("trimap band must be an even number >= 2");
  const DistanceField dist = boundary_distance(mask, threshold);
  const double half = band / 2;
  Trimap out(mask.height(), mask.width());
  std::size_t unknown = 0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (dist.at(y, x) <= half) {
        out.at(y, x) = TrimapLabel::Unknown;
        ++unknown;
      } else {
        out.at(y, x) = mask.at(y, x) >= threshold ? TrimapLabel::Foreground : TrimapLabel::Background;
      }
    }
  if (unknown == 0 && mask.pixel_count() > 0) warn("uniform mask: trimap has no unknown region");
  return out;
}

inline Image trimap_to_image(const Trimap& trimap) {
  Image out(trimap.height(), trimap.width(), 1);
  for (std::size_t i = 0; i < trimap.pixel_count(); ++i)
    out.data()[i] = static_cast<float>(static_cast<int>(trimap.labels()[i])) / 255.0f;
  return out;
}

// Decodes the 0/128/255 gray encoding; other values snap to the nearest label.
inline Trimap trimap_from_image(const Image& img) {
  Trimap out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const float v = img.at(y, x, 0) * 255.0f;
      out.at(y, x) = v < 64.0f ? TrimapLabel::Background : v < 192.0f ? TrimapLabel::Unknown : TrimapLabel::Foreground;
    }
  return out;
}

// Applies the refiner at each square scale in turn, carrying the refined mask
// forward, then resamples the result back to the source dimensions.
inline SoftMask refine_mask_multiscale(const Image& img, const SoftMask& raw, const Refiner& refiner,
                                       const std::vector<int>& scales) {
  if (!raw.same_size(img)) throw DataError("refinement mask and image dimensions differ");
  if (scales.empty()) throw DataError("refinement needs at least one scale");
  for (std::size_t i = 0; i < scales.size(); ++i)
    if (scales[i] < 1 || (i > 0 && scales[i] <= scales[i - 1]))
      throw DataError("refinement scales must be positive and strictly increasing");

  SoftMask current = raw;
  for (const int s : scales) {
    const Image img_s = resize_bilinear(img, s, s);
    const SoftMask mask_s = resize_bilinear(current, s, s);
    SoftMask refined;
    try {
      refined = refiner(img_s, mask_s);
    } catch (const Error& e) {
      throw Error(e.kind(), "refiner failed at scale " + std::to_string(s) + ": " + e.what());
    }
    if (refined.height() != s || refined.width() != s)
      throw DataError("refiner changed mask dimensions at scale " + std::to_string(s));
    refined.clamp();
    current = std::move(refined);
  }
  return resize_bilinear(current, img.width(), img.height());
}

inline Image copy_paste(const Image& fg, const Image& bg, const SoftMask& refined_mask) {
  return alpha_composite(fg, bg, refined_mask);
}

}  // namespace autocomp
