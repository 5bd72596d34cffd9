#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "autocomp/imgcore.hpp"

namespace testsupport {

using autocomp::Image;
using autocomp::SoftMask;

inline Image random_image(int h, int w, int c, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Image img(h, w, c);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

inline SoftMask random_mask(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  SoftMask m(h, w);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

// Smooth random blob mask: thresholded sum of a few random Gaussians, then
// softened, so boundaries are irregular but connected.
inline SoftMask blob_mask(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SoftMask m(h, w);
  const int n = 2 + static_cast<int>(u(rng) * 3);
  for (int k = 0; k < n; ++k) {
    const double cx = u(rng) * w, cy = u(rng) * h, s = (0.1 + 0.2 * u(rng)) * std::min(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        m.at(y, x) += static_cast<float>(std::exp(-d2 / (2 * s * s)));
      }
  }
  for (auto& v : m.data()) v = std::clamp((v - 0.4f) * 3.0f + 0.5f, 0.0f, 1.0f);
  return m;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
  return m;
}

inline double max_abs_diff(const SoftMask& a, const SoftMask& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
  return m;
}

// O(n^2) distance from each pixel to the nearest pixel on the other side of
// the threshold.
inline std::vector<double> brute_boundary_distance(const SoftMask& m, double thr) {
  const int h = m.height(), w = m.width();
  std::vector<double> d(static_cast<std::size_t>(h) * w, INFINITY);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
          if ((m.at(v, u) >= thr) != (m.at(y, x) >= thr))
            d[y * w + x] = std::min(d[y * w + x], std::hypot(double(y - v), double(x - u)));
  return d;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("autocomp_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
