#pragma once

// Training loops for the fusion network (L1 + perceptual loss against the
// target composite) and the mask refiner (cross-entropy against the true
// mask). Single consumer, sequential sampling: a fixed seed reproduces the
// trajectory bit for bit.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/image_io.hpp"
#include "autocomp/imgcore.hpp"
#include "autocomp/mlf.hpp"
#include "autocomp/nn/optim.hpp"
#include "autocomp/triplet.hpp"

namespace autocomp {

struct TrainConfig {
  double lr = 2e-3;
  int batch_size = 1;
  int crop_size = 384;
  int test_size = 768;
  double lambda_p = 0.8;
  int iterations = 0;
  std::uint64_t seed = 0;
  // Square crops take a side in [min_crop_fraction, 1] * min(H, W).
  double min_crop_fraction = 0.5;
  // Refiner patch sides; each is clipped to the sample size.
  std::vector<int> patch_sizes{32, 48, 64};
  // Where a NaN batch is written before aborting; empty disables dumping.
  std::filesystem::path nan_dump_dir;

  void validate() const {
    if (!(lr > 0.0)) throw UsageError("lr must be positive");
    if (batch_size < 1) throw UsageError("batch_size must be positive");
    if (crop_size < 1 || test_size < 1) throw UsageError("crop_size and test_size must be positive");
    if (lambda_p < 0.0) throw UsageError("lambda_p must be non-negative");
    if (iterations < 0) throw UsageError("iterations must be non-negative");
    if (!(min_crop_fraction > 0.0 && min_crop_fraction <= 1.0)) throw UsageError("min_crop_fraction must be in (0, 1]");
    for (int p : patch_sizes)
      if (p < 1) throw UsageError("patch sizes must be positive");
  }
};

struct LossRecord {
  int iteration = 0;
  double l1 = 0.0;
  double perceptual = 0.0;
  double total = 0.0;
};

using ProgressFn = std::function<void(const LossRecord&)>;

// Mean of the `window` records ending at `iteration` (1-based count of records).
inline double trailing_mean(const std::vector<LossRecord>& log, std::size_t end, std::size_t window,
                            double LossRecord::*field = &LossRecord::l1) {
  if (end > log.size() || end == 0) throw DataError("trailing_mean window outside the log");
  const std::size_t begin = end > window ? end - window : 0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += log[i].*field;
  return s / static_cast<double>(end - begin);
}

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& log, int every = 1) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write loss log: " + path.string());
  out << "iteration,l1,perceptual,total\n";
  out.precision(9);
  for (const auto& r : log)
    if (every <= 1 || r.iteration % every == 0 || &r == &log.back())
      out << r.iteration << ',' << r.l1 << ',' << r.perceptual << ',' << r.total << '\n';
}

namespace detail {

struct CropWindow {
  int y0 = 0;
  int x0 = 0;
  int side = 0;
};

inline CropWindow random_square_crop(int height, int width, double min_fraction, std::mt19937_64& rng) {
  const int full = std::min(height, width);
  const int lo = std::max(1, static_cast<int>(std::ceil(min_fraction * full)));
  CropWindow w;
  w.side = std::uniform_int_distribution<int>(lo, full)(rng);
  w.y0 = std::uniform_int_distribution<int>(0, height - w.side)(rng);
  w.x0 = std::uniform_int_distribution<int>(0, width - w.side)(rng);
  return w;
}

inline void dump_batch(const std::filesystem::path& dir, const Image& fg, const Image& bg, const Image& target,
                       const SoftMask& mask) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  try {
    save_image(fg, dir / "nan_fg.png");
    save_image(bg, dir / "nan_bg.png");
    save_image(target, dir / "nan_target.png");
    save_mask(mask, dir / "nan_mask.png");
  } catch (const Error&) {
    // the NaN report is still raised by the caller
  }
}

}  // namespace detail

// `masks[i]` is the compositing mask fed to the network for dataset[i]; the
// background stream receives its inversion.
template <class T>
std::vector<LossRecord> train_mlf(MlfNetwork<T>& net, std::span<const Triplet> dataset, std::span<const SoftMask> masks,
                                  const TrainConfig& cfg, const FeatureExtractor<T>& extractor,
                                  const ProgressFn& progress = {}) {
  cfg.validate();
  if (dataset.empty()) throw DataError("train_mlf: empty dataset");
  if (masks.size() != dataset.size()) throw DataError("train_mlf: one mask per triplet is required");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    dataset[i].validate();
    if (!masks[i].same_size(dataset[i].fg)) throw DataError("train_mlf: mask " + std::to_string(i) + " size mismatch");
  }
  if (cfg.crop_size % net.config().size_multiple() != 0)
    throw UsageError("crop_size must be a multiple of " + std::to_string(net.config().size_multiple()));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  const nn::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  auto params = net.parameters().all();
  std::vector<LossRecord> log;
  log.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int it = 1; it <= cfg.iterations; ++it) {
    LossRecord rec{it, 0.0, 0.0, 0.0};
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = pick(rng);
      const Triplet& t = dataset[idx];
      const auto win = detail::random_square_crop(t.fg.height(), t.fg.width(), cfg.min_crop_fraction, rng);
      auto prep = [&](const Image& img) {
        return resize_bilinear(crop(img, win.y0, win.x0, win.side, win.side), cfg.crop_size, cfg.crop_size);
      };
      const Image fg = prep(t.fg);
      const Image bg = prep(t.bg);
      const Image target = prep(t.target);
      const SoftMask mask = resize_bilinear(crop(masks[idx], win.y0, win.x0, win.side, win.side), cfg.crop_size,
                                            cfg.crop_size);

      nn::Tape<T> tape;
      const auto pred =
          net.forward(&tape, {stream_tensor<T>(fg, mask), stream_tensor<T>(bg, invert_mask(mask))});
      LossTerms<T> loss = total_loss(&tape, pred, image_to_tensor<T>(target), cfg.lambda_p, extractor);
      const double total = static_cast<double>(loss.total.item());
      if (!std::isfinite(total)) {
        detail::dump_batch(cfg.nan_dump_dir, fg, bg, target, mask);
        throw NumericError("non-finite training loss at iteration " + std::to_string(it) + " (sample " +
                           std::to_string(idx) + ")");
      }
      nn::Tensor<T> scaled =
          cfg.batch_size == 1 ? loss.total : nn::scale(&tape, loss.total, static_cast<T>(1.0 / cfg.batch_size));
      tape.backward(scaled);
      rec.l1 += loss.l1 / cfg.batch_size;
      rec.perceptual += loss.perceptual / cfg.batch_size;
      rec.total += total / cfg.batch_size;
    }
    nn::adam_step<T>(params, adam);
    log.push_back(rec);
    if (progress) progress(rec);
  }
  return log;
}

struct RefinePair {
  Image image;
  SoftMask corrupt;
  SoftMask truth;
};

template <class T>
std::vector<LossRecord> train_refiner(RefineNetwork<T>& net, std::span<const RefinePair> pairs, const TrainConfig& cfg,
                                      const ProgressFn& progress = {}) {
  cfg.validate();
  if (pairs.empty()) throw DataError("train_refiner: no training pairs");
  const int m = net.config().size_multiple();
  for (const auto& p : pairs)
    if (!p.corrupt.same_size(p.image) || !p.truth.same_size(p.image))
      throw DataError("train_refiner: pair dimensions differ");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  const nn::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  auto params = net.parameters().all();
  std::vector<LossRecord> log;

  for (int it = 1; it <= cfg.iterations; ++it) {
    LossRecord rec{it, 0.0, 0.0, 0.0};
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = pick(rng);
      const RefinePair& p = pairs[idx];
      const int full = std::min(p.image.height(), p.image.width()) / m * m;
      if (full < m) throw DataError("train_refiner: sample smaller than the network size multiple");
      std::vector<int> sizes;
      for (int s : cfg.patch_sizes) sizes.push_back(std::max(m, std::min(s, full) / m * m));
      const int side = sizes[std::uniform_int_distribution<std::size_t>(0, sizes.size() - 1)(rng)];
      const int y0 = std::uniform_int_distribution<int>(0, p.image.height() - side)(rng);
      const int x0 = std::uniform_int_distribution<int>(0, p.image.width() - side)(rng);
      const Image img = to_rgb(crop(p.image, y0, x0, side, side));
      const SoftMask raw = crop(p.corrupt, y0, x0, side, side);
      const SoftMask truth = crop(p.truth, y0, x0, side, side);

      nn::Tape<T> tape;
      const auto pred = net.forward(&tape, {stream_tensor<T>(img, raw)});
      nn::Tensor<T> loss = nn::cross_entropy(&tape, pred, image_to_tensor<T>(to_image(truth)));
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        detail::dump_batch(cfg.nan_dump_dir, img, img, to_rgb(to_image(truth)), raw);
        throw NumericError("non-finite refiner loss at iteration " + std::to_string(it));
      }
      tape.backward(cfg.batch_size == 1 ? loss : nn::scale(&tape, loss, static_cast<T>(1.0 / cfg.batch_size)));
      rec.total += value / cfg.batch_size;
    }
    nn::adam_step<T>(params, adam);
    log.push_back(rec);
    if (progress) progress(rec);
  }
  return log;
}

}  // namespace autocomp
