#pragma once

// PSNR scoring of compositing methods over whole images or trimap UNKNOWN
// regions. MAX is 1.0 on float samples; zero MSE reports kPsnrCap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "autocomp/augment.hpp"
#include "autocomp/composite.hpp"
#include "autocomp/error.hpp"
#include "autocomp/image_io.hpp"
#include "autocomp/imgcore.hpp"
#include "autocomp/pyramid.hpp"

namespace autocomp {

inline constexpr double kPsnrCap = 99.0;

enum class RegionMode { Whole, Unknown };

inline std::string to_string(RegionMode m) { return m == RegionMode::Whole ? "whole" : "unknown"; }

inline RegionMode region_mode_from_string(const std::string& s) {
  if (s == "whole") return RegionMode::Whole;
  if (s == "unknown") return RegionMode::Unknown;
  throw UsageError("region must be 'whole' or 'unknown', got '" + s + "'");
}

// Per-pixel membership, row-major.
struct Region {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> inside;

  std::size_t count() const { return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), 1)); }

  static Region unknown(const Trimap& t) {
    Region r{t.height(), t.width(), std::vector<std::uint8_t>(static_cast<std::size_t>(t.height()) * t.width())};
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x)
        r.inside[static_cast<std::size_t>(y) * t.width() + x] = t.at(y, x) == TrimapLabel::Unknown ? 1 : 0;
    return r;
  }
};

namespace detail {

inline double psnr_impl(const Image& a, const Image& b, const Region* region) {
  if (!a.same_size(b) || a.channels() != b.channels())
    throw DataError("psnr: images differ in size (" + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
  if (region != nullptr && (region->height != a.height() || region->width != a.width()))
    throw DataError("psnr: region size does not match the images");
  const int c = a.channels();
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (region != nullptr && region->inside[static_cast<std::size_t>(y) * a.width() + x] == 0) continue;
      for (int k = 0; k < c; ++k) {
        const double d = static_cast<double>(a.at(y, x, k)) - static_cast<double>(b.at(y, x, k));
        sum += d * d;
      }
      n += static_cast<std::size_t>(c);
    }
  if (n == 0) throw DataError("psnr: empty region");
  const double mse = sum / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

}  // namespace detail

inline double psnr(const Image& a, const Image& b) { return detail::psnr_impl(a, b, nullptr); }
inline double psnr(const Image& a, const Image& b, const Region& region) { return detail::psnr_impl(a, b, &region); }

// A compositing method: either a function of the sample or a directory of
// predictions named <id>.png.
struct Method {
  std::string name;
  std::function<Image(const DatasetSample&)> predict;

  static Method from_directory(std::string name, std::filesystem::path dir) {
    return {std::move(name), [dir](const DatasetSample& s) {
              const auto path = dir / (s.id + ".png");
              if (!std::filesystem::exists(path)) throw DataError("missing prediction file " + path.string());
              return to_rgb(load_image(path));
            }};
  }
};

// Mask every built-in method receives: the binarized ground-truth alpha,
// standing in for a shared refined mask.
inline SoftMask evaluation_mask(const DatasetSample& s, double threshold = 0.5) {
  return binarize(s.triplet.fg_mask, threshold);
}

inline Method oracle_method() {
  return {"oracle", [](const DatasetSample& s) {
            if (!s.fg_layer) throw DataError("sample " + s.id + " has no fg_layer for the oracle method");
            return alpha_composite(*s.fg_layer, s.triplet.bg, s.triplet.fg_mask);
          }};
}

inline Method copy_paste_method() {
  return {"copy-paste",
          [](const DatasetSample& s) { return copy_paste(s.triplet.fg, s.triplet.bg, evaluation_mask(s)); }};
}

inline Method feather_method(double sigma = 2.0) {
  return {"feather", [sigma](const DatasetSample& s) {
            return alpha_composite(s.triplet.fg, s.triplet.bg, feather_mask(evaluation_mask(s), sigma));
          }};
}

inline Method pyramid_method(int levels = 0) {
  return {"pyramid", [levels](const DatasetSample& s) {
            const int l = levels > 0 ? levels : default_pyramid_levels(s.triplet.fg.height(), s.triplet.fg.width());
            return pyramid_blend(s.triplet.fg, s.triplet.bg, evaluation_mask(s), l);
          }};
}

template <class T>
Method mlf_method(const MlfNetwork<T>& net, int canvas = 0, std::string name = "mlf") {
  return {std::move(name), [&net, canvas](const DatasetSample& s) {
            return mlf_composite(net, s.triplet.fg, evaluation_mask(s), s.triplet.bg, canvas);
          }};
}

struct SampleScore {
  std::string id;
  double psnr = 0.0;
};

struct MethodResult {
  std::string method;
  RegionMode region = RegionMode::Whole;
  std::vector<SampleScore> per_sample;
  double mean = 0.0;
};

inline double mean_psnr(const std::vector<SampleScore>& scores) {
  if (scores.empty()) return 0.0;
  double s = 0.0;
  for (const auto& v : scores) s += v.psnr;
  return s / static_cast<double>(scores.size());
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; the first exception
// (lowest index) is rethrown.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Predictions are snapped to the 8-bit grid before scoring, as if written and
// re-read, so function methods and ingested directories are scored alike.
inline std::vector<MethodResult> run_benchmark(const std::vector<DatasetSample>& dataset,
                                               const std::vector<Method>& methods, RegionMode mode, int threads = 1) {
  std::vector<Region> regions(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    s.triplet.validate();
    if (mode == RegionMode::Unknown) {
      if (!s.trimap) throw DataError("sample " + s.id + " has no trimap for unknown-region scoring");
      regions[i] = Region::unknown(*s.trimap);
      if (regions[i].count() == 0) throw DataError("sample " + s.id + " has an empty unknown region");
    }
  }
  std::vector<MethodResult> out;
  for (const auto& m : methods) {
    MethodResult r;
    r.method = m.name;
    r.region = mode;
    r.per_sample.resize(dataset.size());
    parallel_for(dataset.size(), threads, [&](std::size_t i) {
      const auto& s = dataset[i];
      Image pred;
      try {
        pred = m.predict(s);
      } catch (const Error& e) {
        throw DataError("method " + m.name + ", sample " + s.id + ": " + e.what());
      }
      if (!pred.same_size(s.triplet.target) || pred.channels() != 3)
        throw DataError("method " + m.name + " produced a mismatched prediction for sample " + s.id);
      pred = quantize(pred);
      r.per_sample[i] = {s.id, mode == RegionMode::Unknown ? psnr(pred, s.triplet.target, regions[i])
                                                           : psnr(pred, s.triplet.target)};
    });
    r.mean = mean_psnr(r.per_sample);
    out.push_back(std::move(r));
  }
  return out;
}

// Writes <path> (method,region,mean_psnr,n_samples), <stem>_per_sample.csv
// and <stem>.txt, a table with one column per method.
inline void emit_report(const std::vector<MethodResult>& results, const std::filesystem::path& path) {
  auto open = [](const std::filesystem::path& p) {
    if (p.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write report file " + p.string());
    return out;
  };
  const auto stem = path.parent_path() / path.stem();

  {
    auto out = open(path);
    out << "method,region,mean_psnr,n_samples\n" << std::setprecision(17);
    for (const auto& r : results)
      out << r.method << ',' << to_string(r.region) << ',' << r.mean << ',' << r.per_sample.size() << '\n';
    if (!out) throw DataError("failed writing " + path.string());
  }
  {
    const auto p = std::filesystem::path(stem.string() + "_per_sample.csv");
    auto out = open(p);
    out << "method,region,id,psnr\n" << std::setprecision(17);
    for (const auto& r : results)
      for (const auto& s : r.per_sample) out << r.method << ',' << to_string(r.region) << ',' << s.id << ',' << s.psnr << '\n';
    if (!out) throw DataError("failed writing " + p.string());
  }
  {
    const auto p = std::filesystem::path(stem.string() + ".txt");
    auto out = open(p);
    std::size_t width = 10;
    for (const auto& r : results) width = std::max(width, r.method.size());
    const std::string label = results.empty() || results.front().region == RegionMode::Whole ? "PSNR (dB)"
                                                                                             : "PSNR unknown (dB)";
    const std::size_t first = std::max<std::size_t>(label.size(), 6);
    out << std::left << std::setw(static_cast<int>(first)) << "Method";
    for (const auto& r : results) out << " | " << std::right << std::setw(static_cast<int>(width)) << r.method;
    out << '\n' << std::string(first, '-');
    for (std::size_t i = 0; i < results.size(); ++i) out << "-+-" << std::string(width, '-');
    out << '\n' << std::left << std::setw(static_cast<int>(first)) << label << std::fixed << std::setprecision(2);
    for (const auto& r : results) out << " | " << std::right << std::setw(static_cast<int>(width)) << r.mean;
    out << '\n';
    if (!out) throw DataError("failed writing " + p.string());
  }
}

}  // namespace autocomp
