#pragma once

// Image containers, resampling, filtering and distance fields.
//
// Samples are floats in [0,1], stored row-major with interleaved channels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "autocomp/error.hpp"

namespace autocomp {

class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0) throw DataError("image dimensions must be non-negative");
    if (channels != 1 && channels != 3 && channels != 4)
      throw DataError("image channel count must be 1, 3 or 4, got " + std::to_string(channels));
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_size(const Image& o) const noexcept { return height_ == o.height_ && width_ == o.width_; }

  void clamp() noexcept {
    for (auto& s : data_) s = std::clamp(s, 0.0f, 1.0f);
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<float> data_;
};

class SoftMask {
 public:
  SoftMask() = default;
  SoftMask(int height, int width, float fill = 0.0f) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw DataError("mask dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return data_.size(); }

  float& at(int y, int x) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int y, int x) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_size(const Image& o) const noexcept { return height_ == o.height() && width_ == o.width(); }
  bool same_size(const SoftMask& o) const noexcept { return height_ == o.height_ && width_ == o.width_; }

  void clamp() noexcept {
    for (auto& s : data_) s = std::clamp(s, 0.0f, 1.0f);
  }

  friend bool operator==(const SoftMask&, const SoftMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

enum class TrimapLabel : std::uint8_t { Background = 0, Unknown = 128, Foreground = 255 };

class Trimap {
 public:
  Trimap() = default;
  Trimap(int height, int width, TrimapLabel fill = TrimapLabel::Background)
      : height_(height), width_(width), labels_(static_cast<std::size_t>(height) * width, fill) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return labels_.size(); }

  TrimapLabel& at(int y, int x) noexcept { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  TrimapLabel at(int y, int x) const noexcept { return labels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const TrimapLabel> labels() const noexcept { return labels_; }
  std::span<TrimapLabel> labels() noexcept { return labels_; }

  std::size_t count(TrimapLabel label) const noexcept {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
  }

  friend bool operator==(const Trimap&, const Trimap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<TrimapLabel> labels_;
};

// Per-pixel Euclidean distance (in pixels) to the nearest pixel of the
// opposite binarization label. kNoBoundary when the opposite set is empty.
struct DistanceField {
  static constexpr double kNoBoundary = std::numeric_limits<double>::infinity();

  int height = 0;
  int width = 0;
  std::vector<double> distance;

  double at(int y, int x) const noexcept { return distance[static_cast<std::size_t>(y) * width + x]; }
};

// Half-sample symmetric reflection: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
// Valid for any offset and any n >= 1.
inline int reflect_index(int i, int n) noexcept {
  const int period = 2 * n;
  int r = i % period;
  if (r < 0) r += period;
  return r < n ? r : period - 1 - r;
}

inline Image to_image(const SoftMask& mask) {
  Image out(mask.height(), mask.width(), 1);
  std::copy(mask.data().begin(), mask.data().end(), out.data().begin());
  return out;
}

// Takes one channel of an image as a mask.
inline SoftMask to_mask(const Image& img, int channel = 0) {
  if (channel < 0 || channel >= img.channels()) throw DataError("mask channel out of range");
  SoftMask out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(y, x) = img.at(y, x, channel);
  return out;
}

// Drops or keeps channels so the result has exactly 3 (RGB).
inline Image to_rgb(const Image& img) {
  if (img.channels() == 3) return img;
  Image out(img.height(), img.width(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, img.channels() == 1 ? 0 : c);
  return out;
}

inline Image crop(const Image& img, int y0, int x0, int height, int width) {
  if (y0 < 0 || x0 < 0 || height < 1 || width < 1 || y0 + height > img.height() || x0 + width > img.width())
    throw DataError("crop window outside the image");
  Image out(height, width, img.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

inline SoftMask crop(const SoftMask& mask, int y0, int x0, int height, int width) {
  return to_mask(crop(to_image(mask), y0, x0, height, width));
}

namespace detail {

struct LinearTap {
  int i0;
  int i1;
  float w1;  // weight of i1; i0 gets 1 - w1
};

// Half-pixel-centered source coordinates, clamped to the valid range.
inline std::vector<LinearTap> bilinear_taps(int in, int out) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = {i0, i1, static_cast<float>(src - i0)};
  }
  return taps;
}

}  // namespace detail

inline Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw DataError("resize target dimensions must be at least 1");
  if (img.empty()) throw DataError("cannot resize an empty image");
  if (out_w == img.width() && out_h == img.height()) return img;

  const auto xs = detail::bilinear_taps(img.width(), out_w);
  const auto ys = detail::bilinear_taps(img.height(), out_h);
  const int ch = img.channels();
  Image out(out_h, out_w, ch);
  for (int y = 0; y < out_h; ++y) {
    const auto& ty = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      const auto& tx = xs[static_cast<std::size_t>(x)];
      for (int c = 0; c < ch; ++c) {
        const float top = img.at(ty.i0, tx.i0, c) * (1.0f - tx.w1) + img.at(ty.i0, tx.i1, c) * tx.w1;
        const float bot = img.at(ty.i1, tx.i0, c) * (1.0f - tx.w1) + img.at(ty.i1, tx.i1, c) * tx.w1;
        out.at(y, x, c) = top * (1.0f - ty.w1) + bot * ty.w1;
      }
    }
  }
  return out;
}

inline SoftMask resize_bilinear(const SoftMask& mask, int out_w, int out_h) {
  return to_mask(resize_bilinear(to_image(mask), out_w, out_h));
}

// Normalized 1-D Gaussian taps over [-radius, radius], radius = ceil(3 sigma).
inline std::vector<float> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw DataError("gaussian sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  std::vector<float> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<float>(k[i] / sum);
  return out;
}

// Separable correlation with an odd-length symmetric kernel and reflect padding.
inline Image separable_filter(const Image& img, std::span<const float> kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  Image tmp(h, w, ch);
  std::vector<double> acc(static_cast<std::size_t>(ch));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int k = -radius; k <= radius; ++k) {
        const int sx = reflect_index(x + k, w);
        const double kw = kernel[static_cast<std::size_t>(k + radius)];
        for (int c = 0; c < ch; ++c) acc[static_cast<std::size_t>(c)] += kw * img.at(y, sx, c);
      }
      for (int c = 0; c < ch; ++c) tmp.at(y, x, c) = static_cast<float>(acc[static_cast<std::size_t>(c)]);
    }
  }
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int k = -radius; k <= radius; ++k) {
        const int sy = reflect_index(y + k, h);
        const double kw = kernel[static_cast<std::size_t>(k + radius)];
        for (int c = 0; c < ch; ++c) acc[static_cast<std::size_t>(c)] += kw * tmp.at(sy, x, c);
      }
      for (int c = 0; c < ch; ++c) out.at(y, x, c) = static_cast<float>(acc[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

inline Image gaussian_blur(const Image& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  return separable_filter(img, kernel);
}

inline SoftMask gaussian_blur(const SoftMask& mask, double sigma) {
  return to_mask(gaussian_blur(to_image(mask), sigma));
}

namespace detail {

// Felzenszwalb-Huttenlocher 1-D squared distance transform of a sampled
// function f (0 at sites, large elsewhere). Exact for integer grids.
inline void squared_distance_1d(std::span<const double> f, std::span<double> d, std::vector<int>& v,
                                std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    d[q] = double(q - p) * (q - p) + f[p];
  }
}

// Exact squared Euclidean distance to the nearest site.
inline std::vector<double> squared_edt(const std::vector<bool>& site, int h, int w) {
  constexpr double kFar = 1e20;
  std::vector<double> g(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = site[i] ? 0.0 : kFar;

  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(static_cast<std::size_t>(std::max(h, w)));
  std::vector<double> d(f.size());
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = g[static_cast<std::size_t>(y) * w + x];
    squared_distance_1d(std::span(f.data(), static_cast<std::size_t>(h)), std::span(d.data(), static_cast<std::size_t>(h)), v, z);
    for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    std::span<double> row(g.data() + static_cast<std::size_t>(y) * w, static_cast<std::size_t>(w));
    std::copy(row.begin(), row.end(), f.begin());
    squared_distance_1d(std::span(f.data(), static_cast<std::size_t>(w)), std::span(d.data(), static_cast<std::size_t>(w)), v, z);
    std::copy(d.begin(), d.begin() + w, row.begin());
  }
  return g;
}

}  // namespace detail

// Exact Euclidean distance transform across the binarization boundary:
// every pixel gets the distance to the closest pixel whose label
// (mask >= threshold) differs from its own.
inline DistanceField boundary_distance(const SoftMask& mask, double threshold) {
  const int h = mask.height();
  const int w = mask.width();
  DistanceField out{h, w, std::vector<double>(mask.pixel_count(), DistanceField::kNoBoundary)};
  if (mask.pixel_count() == 0) return out;

  std::vector<bool> fg(mask.pixel_count());
  std::size_t fg_count = 0;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    fg[i] = mask.data()[i] >= threshold;
    fg_count += fg[i] ? 1 : 0;
  }
  if (fg_count == 0 || fg_count == fg.size()) return out;

  std::vector<bool> bg(fg.size());
  for (std::size_t i = 0; i < fg.size(); ++i) bg[i] = !fg[i];
  const auto to_bg = detail::squared_edt(bg, h, w);
  const auto to_fg = detail::squared_edt(fg, h, w);
  for (std::size_t i = 0; i < fg.size(); ++i) out.distance[i] = std::sqrt(fg[i] ? to_bg[i] : to_fg[i]);
  return out;
}

}  // namespace autocomp
