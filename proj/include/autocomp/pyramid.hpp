#pragma once

// Burt-Adelson Gaussian/Laplacian pyramids and multi-band blending.
//
// Downsampling blurs with the 5-tap binomial kernel (1,4,6,4,1)/16 and keeps
// even-indexed samples, so dims(k+1) = ceil(dims(k)/2). Upsampling is the
// matching interpolator: zero insertion followed by the same kernel scaled by
// 2 per axis, with the coarse grid extended by reflection. Its weights sum to
// exactly one at every fine pixel, so constants survive a round trip.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/imgcore.hpp"

namespace autocomp {

struct GaussianPyramid {
  std::vector<Image> levels;
};

// bands[k] = G_k - up(G_{k+1}); values are signed.
struct LaplacianPyramid {
  std::vector<Image> bands;
  Image residual;
};

inline constexpr std::array<float, 5> kBinomialKernel{1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};

// floor(log2(min(H, W))) - 2, at least 1.
inline int default_pyramid_levels(int height, int width) {
  const int m = std::min(height, width);
  if (m < 1) return 1;
  const int lg = static_cast<int>(std::floor(std::log2(static_cast<double>(m))));
  return std::max(1, lg - 2);
}

namespace detail {

inline void check_levels(int height, int width, int num_levels) {
  if (num_levels < 1) throw DataError("pyramid needs at least one level");
  int h = height;
  int w = width;
  for (int k = 1; k < num_levels; ++k) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  if (std::min(h, w) < 2)
    throw DataError("too many pyramid levels (" + std::to_string(num_levels) + ") for a " + std::to_string(width) +
                    "x" + std::to_string(height) + " image");
}

inline Image downsample(const Image& img) {
  const Image blurred = separable_filter(img, kBinomialKernel);
  const int h = (img.height() + 1) / 2;
  const int w = (img.width() + 1) / 2;
  Image out(h, w, img.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = blurred.at(2 * y, 2 * x, c);
  return out;
}

// Fine sample f receives coarse samples i with |f - 2i| <= 2, weighted by
// 2 * kernel[f - 2i + 2].
inline double upsample_tap(int f, int i) { return 2.0 * kBinomialKernel[static_cast<std::size_t>(f - 2 * i + 2)]; }

inline Image upsample(const Image& coarse, int out_h, int out_w) {
  const int ch = coarse.channels();
  const int ch_h = coarse.height();
  const int ch_w = coarse.width();
  std::vector<double> acc(static_cast<std::size_t>(ch));

  Image rows(ch_h, out_w, ch);
  for (int y = 0; y < ch_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int i = x / 2 - 1; i <= x / 2 + 1; ++i) {
        const int d = x - 2 * i;
        if (d < -2 || d > 2) continue;
        const int si = reflect_index(i, ch_w);
        const double wgt = upsample_tap(x, i);
        for (int c = 0; c < ch; ++c) acc[static_cast<std::size_t>(c)] += wgt * coarse.at(y, si, c);
      }
      for (int c = 0; c < ch; ++c) rows.at(y, x, c) = static_cast<float>(acc[static_cast<std::size_t>(c)]);
    }
  }
  Image out(out_h, out_w, ch);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int i = y / 2 - 1; i <= y / 2 + 1; ++i) {
        const int d = y - 2 * i;
        if (d < -2 || d > 2) continue;
        const int si = reflect_index(i, ch_h);
        const double wgt = upsample_tap(y, i);
        for (int c = 0; c < ch; ++c) acc[static_cast<std::size_t>(c)] += wgt * rows.at(si, x, c);
      }
      for (int c = 0; c < ch; ++c) out.at(y, x, c) = static_cast<float>(acc[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

}  // namespace detail

inline GaussianPyramid build_gaussian(const Image& img, int num_levels) {
  detail::check_levels(img.height(), img.width(), num_levels);
  GaussianPyramid pyr;
  pyr.levels.reserve(static_cast<std::size_t>(num_levels));
  pyr.levels.push_back(img);
  for (int k = 1; k < num_levels; ++k) pyr.levels.push_back(detail::downsample(pyr.levels.back()));
  return pyr;
}

inline LaplacianPyramid build_laplacian(const Image& img, int num_levels) {
  GaussianPyramid g = build_gaussian(img, num_levels);
  LaplacianPyramid pyr;
  for (int k = 0; k + 1 < num_levels; ++k) {
    const Image& fine = g.levels[static_cast<std::size_t>(k)];
    const Image up = detail::upsample(g.levels[static_cast<std::size_t>(k) + 1], fine.height(), fine.width());
    Image band(fine.height(), fine.width(), fine.channels());
    for (std::size_t i = 0; i < band.data().size(); ++i) band.data()[i] = fine.data()[i] - up.data()[i];
    pyr.bands.push_back(std::move(band));
  }
  pyr.residual = std::move(g.levels.back());
  return pyr;
}

inline Image collapse(const LaplacianPyramid& pyr) {
  Image cur = pyr.residual;
  for (auto it = pyr.bands.rbegin(); it != pyr.bands.rend(); ++it) {
    const Image& band = *it;
    if (band.channels() != cur.channels() || (band.height() + 1) / 2 != cur.height() ||
        (band.width() + 1) / 2 != cur.width())
      throw DataError("laplacian pyramid band dimensions do not nest");
    Image up = detail::upsample(cur, band.height(), band.width());
    for (std::size_t i = 0; i < up.data().size(); ++i) up.data()[i] += band.data()[i];
    cur = std::move(up);
  }
  cur.clamp();
  return cur;
}

inline Image pyramid_blend(const Image& fg, const Image& bg, const SoftMask& mask, int num_levels) {
  if (!fg.same_size(bg) || fg.channels() != bg.channels() || !mask.same_size(fg))
    throw DataError("pyramid_blend needs foreground, background and mask of equal dimensions");
  const LaplacianPyramid lf = build_laplacian(fg, num_levels);
  const LaplacianPyramid lb = build_laplacian(bg, num_levels);
  const GaussianPyramid gm = build_gaussian(to_image(mask), num_levels);

  auto mix = [&](const Image& a, const Image& b, const Image& m) {
    Image out(a.height(), a.width(), a.channels());
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) {
        const float w = m.at(y, x, 0);
        for (int c = 0; c < a.channels(); ++c) out.at(y, x, c) = w * a.at(y, x, c) + (1.0f - w) * b.at(y, x, c);
      }
    return out;
  };

  LaplacianPyramid blended;
  for (std::size_t k = 0; k < lf.bands.size(); ++k) blended.bands.push_back(mix(lf.bands[k], lb.bands[k], gm.levels[k]));
  blended.residual = mix(lf.residual, lb.residual, gm.levels.back());
  return collapse(blended);
}

}  // namespace autocomp
