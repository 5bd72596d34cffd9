#pragma once

// Easy-to-hard self-taught triplet generation and the on-disk dataset layout.
//
// Easy triplets come from matting assets (decontaminated foreground F plus
// alpha): FG = a*F + (1-a)*color, BG = bg, C = a*F + (1-a)*bg. Hard triplets
// push one easy foreground through a trained compositor twice, onto bg1 and
// bg2, and keep [compose(bg1), bg2, compose(bg2)] so that
// C' = EasyFG (+) BG2 = FG' (+) BG'.
//
// Layout: <root>/<id>/{fg,bg,target,mask}.png, optional trimap.png and
// fg_layer.png (the decontaminated foreground of SynTest samples), plus
// <root>/manifest.csv with columns id,width,height,kind,seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "autocomp/composite.hpp"
#include "autocomp/error.hpp"
#include "autocomp/image_io.hpp"
#include "autocomp/imgcore.hpp"
#include "autocomp/mlf.hpp"
#include "autocomp/train.hpp"
#include "autocomp/triplet.hpp"

namespace autocomp {

struct MattingAsset {
  Image foreground;  // decontaminated RGB
  SoftMask alpha;

  void validate() const {
    if (!alpha.same_size(foreground) || foreground.channels() != 3)
      throw DataError("matting asset needs an RGB foreground and an alpha of equal size");
  }
};

struct Rgb {
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;
};

// (fg, fg_mask, bg, bg_mask) -> composite
using Compositor = std::function<Image(const Image&, const SoftMask&, const Image&, const SoftMask&)>;

inline Compositor oracle_compositor() {
  return [](const Image& fg, const SoftMask& mask, const Image& bg, const SoftMask&) {
    return alpha_composite(fg, bg, mask);
  };
}

template <class T>
Compositor network_compositor(const MlfNetwork<T>& net) {
  return [&net](const Image& fg, const SoftMask& m, const Image& bg, const SoftMask& bm) {
    return mlf_forward(net, fg, m, bg, bm);
  };
}

inline Image solid_image(int height, int width, Rgb color) {
  Image out(height, width, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      out.at(y, x, 0) = color.r;
      out.at(y, x, 1) = color.g;
      out.at(y, x, 2) = color.b;
    }
  return out;
}

inline Triplet make_easy_triplet(const MattingAsset& asset, const Image& bg, Rgb color) {
  asset.validate();
  if (!bg.same_size(asset.foreground) || bg.channels() != 3)
    throw DataError("easy triplet background must be RGB and match the asset size");
  const Image canvas = solid_image(bg.height(), bg.width(), color);
  Triplet t;
  t.fg = alpha_composite(asset.foreground, canvas, asset.alpha);
  t.bg = bg;
  t.target = alpha_composite(asset.foreground, bg, asset.alpha);
  t.fg_mask = asset.alpha;
  return t;
}

inline Triplet make_hard_triplet(const Image& easy_fg, const SoftMask& fg_mask, const Image& bg1, const Image& bg2,
                                 const Compositor& model) {
  if (!model) throw DataError("hard triplet generation needs a loaded compositing model");
  if (!easy_fg.same_size(bg1) || !easy_fg.same_size(bg2) || !fg_mask.same_size(easy_fg))
    throw DataError("hard triplet inputs must share dimensions");
  const SoftMask inverted = invert_mask(fg_mask);
  Triplet t;
  t.fg = model(easy_fg, fg_mask, bg1, inverted);
  t.target = model(easy_fg, fg_mask, bg2, inverted);
  t.bg = bg2;
  t.fg_mask = fg_mask;
  return t;
}

// ---------------------------------------------------------------------------
// Desk-scale synthetic assets

// Fixed palette for pure-color foreground backdrops; further colors are drawn
// uniformly at random.
inline const std::vector<Rgb>& backdrop_palette() {
  static const std::vector<Rgb> palette{{1.0f, 1.0f, 1.0f}, {0.0f, 0.0f, 0.0f}, {0.0f, 0.69f, 0.31f},
                                        {0.0f, 0.28f, 0.73f}, {0.5f, 0.5f, 0.5f}, {0.85f, 0.1f, 0.1f}};
  return palette;
}

inline Rgb sample_color(std::mt19937_64& rng, double palette_probability = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < palette_probability) {
    const auto& pal = backdrop_palette();
    return pal[std::uniform_int_distribution<std::size_t>(0, pal.size() - 1)(rng)];
  }
  return {static_cast<float>(u(rng)), static_cast<float>(u(rng)), static_cast<float>(u(rng))};
}

namespace detail {

// Smooth random color field: base color, linear gradient and a low-frequency
// sinusoid per channel.
inline Image smooth_texture(int height, int width, std::mt19937_64& rng, double max_freq, double amp) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image out(height, width, 3);
  for (int c = 0; c < 3; ++c) {
    const double base = 0.15 + 0.7 * u(rng);
    const double gx = (u(rng) - 0.5) * 0.4;
    const double gy = (u(rng) - 0.5) * 0.4;
    const double fx = (u(rng) - 0.5) * 2.0 * max_freq;
    const double fy = (u(rng) - 0.5) * 2.0 * max_freq;
    const double phase = u(rng) * 6.283185307179586;
    const double a = amp * u(rng);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double nx = static_cast<double>(x) / width - 0.5;
        const double ny = static_cast<double>(y) / height - 0.5;
        const double v = base + gx * nx + gy * ny + a * std::sin(6.283185307179586 * (fx * nx + fy * ny) + phase);
        out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  }
  return out;
}

}  // namespace detail

// Background image: smooth color field with mid-frequency structure.
inline Image synthetic_background(int height, int width, std::mt19937_64& rng) {
  return detail::smooth_texture(height, width, rng, 6.0, 0.25);
}

// Random blob-shaped foreground: a union of ellipses rasterized with 4x4
// supersampling, softened by a random blur, with a few thin strands reaching
// outward so that fractional alpha appears away from the main edge.
inline MattingAsset synthetic_asset(int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int blobs = 1 + static_cast<int>(u(rng) * 3.0);
  struct Ellipse {
    double cx, cy, rx, ry, cs, sn;
  };
  std::vector<Ellipse> shapes;
  for (int i = 0; i < blobs; ++i) {
    const double th = u(rng) * 3.141592653589793;
    shapes.push_back({width * (0.3 + 0.4 * u(rng)), height * (0.3 + 0.4 * u(rng)), width * (0.12 + 0.18 * u(rng)),
                      height * (0.12 + 0.18 * u(rng)), std::cos(th), std::sin(th)});
  }
  struct Strand {
    double x0, y0, x1, y1, half_width, opacity;
  };
  std::vector<Strand> strands;
  const int n_strands = static_cast<int>(u(rng) * 4.0);
  for (int i = 0; i < n_strands; ++i) {
    const Ellipse& e = shapes[std::uniform_int_distribution<std::size_t>(0, shapes.size() - 1)(rng)];
    const double ang = u(rng) * 6.283185307179586;
    const double len = std::min(width, height) * (0.15 + 0.2 * u(rng));
    strands.push_back({e.cx, e.cy, e.cx + std::cos(ang) * (e.rx + len), e.cy + std::sin(ang) * (e.ry + len),
                       0.4 + 0.5 * u(rng), 0.5 + 0.5 * u(rng)});
  }

  SoftMask alpha(height, width);
  constexpr int kSuper = 4;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double cover = 0.0;
      for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper;
          const double py = y + (sy + 0.5) / kSuper;
          double v = 0.0;
          for (const auto& e : shapes) {
            const double dx = px - e.cx;
            const double dy = py - e.cy;
            const double a = (dx * e.cs + dy * e.sn) / e.rx;
            const double b = (-dx * e.sn + dy * e.cs) / e.ry;
            if (a * a + b * b <= 1.0) v = 1.0;
          }
          for (const auto& s : strands) {
            const double vx = s.x1 - s.x0;
            const double vy = s.y1 - s.y0;
            const double t = std::clamp(((px - s.x0) * vx + (py - s.y0) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
            const double d = std::hypot(px - (s.x0 + t * vx), py - (s.y0 + t * vy));
            if (d <= s.half_width) v = std::max(v, s.opacity);
          }
          cover += v;
        }
      alpha.at(y, x) = static_cast<float>(cover / (kSuper * kSuper));
    }
  const double soften = 1.0 + 2.0 * u(rng);
  alpha = gaussian_blur(alpha, soften);
  alpha.clamp();

  MattingAsset asset;
  asset.foreground = detail::smooth_texture(height, width, rng, 3.0, 0.3);
  asset.alpha = std::move(alpha);
  return asset;
}

// Mask degradation for refiner training: low-resolution round trip, blur and
// a random threshold shift, mimicking an upsampled segmentation output.
inline SoftMask corrupt_mask(const SoftMask& truth, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int factor = 3 + static_cast<int>(u(rng) * 4.0);
  const int lw = std::max(2, truth.width() / factor);
  const int lh = std::max(2, truth.height() / factor);
  SoftMask low = resize_bilinear(truth, lw, lh);
  SoftMask up = resize_bilinear(low, truth.width(), truth.height());
  up = gaussian_blur(up, 1.0 + 1.5 * u(rng));
  const double shift = (u(rng) - 0.5) * 0.3;
  for (auto& v : up.data()) v = static_cast<float>(std::clamp(v + shift, 0.0, 1.0));
  return up;
}

// ---------------------------------------------------------------------------
// Dataset files

enum class SampleKind { Easy, Hard, SynTest };

inline std::string to_string(SampleKind k) {
  switch (k) {
    case SampleKind::Easy:
      return "easy";
    case SampleKind::Hard:
      return "hard";
    case SampleKind::SynTest:
      return "syntest";
  }
  return "easy";
}

inline SampleKind sample_kind_from_string(const std::string& s) {
  if (s == "easy") return SampleKind::Easy;
  if (s == "hard") return SampleKind::Hard;
  if (s == "syntest") return SampleKind::SynTest;
  throw DataError("unknown sample kind '" + s + "'");
}

struct DatasetSample {
  std::string id;
  SampleKind kind = SampleKind::Easy;
  std::uint64_t seed = 0;
  Triplet triplet;
  std::optional<Trimap> trimap;
  std::optional<Image> fg_layer;
};

struct ManifestRow {
  std::string id;
  int width = 0;
  int height = 0;
  SampleKind kind = SampleKind::Easy;
  std::uint64_t seed = 0;
};

inline std::string sample_id(std::size_t index) {
  std::ostringstream os;
  os.width(6);
  os.fill('0');
  os << index;
  return os.str();
}

inline void write_sample(const std::filesystem::path& root, const DatasetSample& s) {
  s.triplet.validate();
  const auto dir = root / s.id;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create sample directory " + dir.string() + ": " + ec.message());
  save_image(s.triplet.fg, dir / "fg.png");
  save_image(s.triplet.bg, dir / "bg.png");
  save_image(s.triplet.target, dir / "target.png");
  save_mask(s.triplet.fg_mask, dir / "mask.png");
  if (s.trimap) save_image(trimap_to_image(*s.trimap), dir / "trimap.png");
  if (s.fg_layer) save_image(*s.fg_layer, dir / "fg_layer.png");
}

inline void write_manifest(const std::filesystem::path& root, const std::vector<ManifestRow>& rows) {
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  std::ofstream out(root / "manifest.csv");
  if (!out) throw DataError("cannot write manifest in " + root.string());
  out << "id,width,height,kind,seed\n";
  for (const auto& r : rows) out << r.id << ',' << r.width << ',' << r.height << ',' << to_string(r.kind) << ',' << r.seed << '\n';
  if (!out) throw DataError("failed writing manifest in " + root.string());
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.csv");
  if (!in) throw DataError("no manifest.csv in " + root.string());
  std::string line;
  std::getline(in, line);
  if (line != "id,width,height,kind,seed") throw DataError("unexpected manifest header in " + root.string());
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::array<std::string, 5> f;
    for (auto& field : f)
      if (!std::getline(ls, field, ',')) throw DataError("malformed manifest row: " + line);
    try {
      rows.push_back({f[0], std::stoi(f[1]), std::stoi(f[2]), sample_kind_from_string(f[3]), std::stoull(f[4])});
    } catch (const std::logic_error&) {
      throw DataError("malformed manifest row: " + line);
    }
  }
  return rows;
}

inline DatasetSample read_sample(const std::filesystem::path& root, const ManifestRow& row) {
  const auto dir = root / row.id;
  DatasetSample s;
  s.id = row.id;
  s.kind = row.kind;
  s.seed = row.seed;
  s.triplet.fg = to_rgb(load_image(dir / "fg.png"));
  s.triplet.bg = to_rgb(load_image(dir / "bg.png"));
  s.triplet.target = to_rgb(load_image(dir / "target.png"));
  s.triplet.fg_mask = load_mask(dir / "mask.png");
  s.triplet.validate();
  if (s.triplet.fg.width() != row.width || s.triplet.fg.height() != row.height)
    throw DataError("sample " + row.id + " does not match its manifest dimensions");
  if (std::filesystem::exists(dir / "trimap.png")) s.trimap = trimap_from_image(load_image(dir / "trimap.png"));
  if (std::filesystem::exists(dir / "fg_layer.png")) s.fg_layer = to_rgb(load_image(dir / "fg_layer.png"));
  return s;
}

inline std::vector<DatasetSample> load_dataset(const std::filesystem::path& root) {
  std::vector<DatasetSample> out;
  for (const auto& row : read_manifest(root)) out.push_back(read_sample(root, row));
  return out;
}

// ---------------------------------------------------------------------------
// Dataset synthesis

enum class MaskMode { Soft, Binary };

inline SoftMask apply_mask_mode(const SoftMask& alpha, MaskMode mode, double threshold = 0.5) {
  return mode == MaskMode::Binary ? binarize(alpha, threshold) : alpha;
}

struct SynthesisConfig {
  int n_easy = 0;
  int n_hard = 0;
  std::uint64_t seed = 0;
  // Mask handed to the generator (and stored with hard triplets).
  MaskMode generator_mask = MaskMode::Binary;
  double palette_probability = 0.5;
};

// Builds easy triplets from `assets` and hard triplets from `hard_sources`
// (simple-backdrop foregrounds; defaults to `assets`) through `model`.
// Samples are returned in id order; when `root` is non-empty they are also
// written there with a manifest.
inline std::vector<DatasetSample> synthesize_dataset(const std::vector<MattingAsset>& assets,
                                                     const std::vector<Image>& backgrounds,
                                                     const SynthesisConfig& cfg, const Compositor& model = {},
                                                     const std::filesystem::path& root = {},
                                                     const std::vector<MattingAsset>* hard_sources = nullptr) {
  if (cfg.n_easy < 0 || cfg.n_hard < 0) throw UsageError("sample counts must be non-negative");
  if (cfg.n_hard > 0 && !model) throw UsageError("hard triplets require a trained model");
  const auto& sources = hard_sources != nullptr ? *hard_sources : assets;
  if ((cfg.n_easy > 0 && assets.empty()) || (cfg.n_hard > 0 && sources.empty()))
    throw DataError("synthesis needs at least one matting asset");
  if ((cfg.n_easy > 0 || cfg.n_hard > 0) && backgrounds.empty()) throw DataError("synthesis needs backgrounds");

  std::mt19937_64 rng(cfg.seed);
  auto pick_bg = [&](const MattingAsset& a, std::mt19937_64& r) {
    const Image& bg = backgrounds[std::uniform_int_distribution<std::size_t>(0, backgrounds.size() - 1)(r)];
    return to_rgb(resize_bilinear(bg, a.foreground.width(), a.foreground.height()));
  };

  std::vector<DatasetSample> out;
  std::vector<ManifestRow> rows;
  for (int i = 0; i < cfg.n_easy + cfg.n_hard; ++i) {
    const std::uint64_t sample_seed = rng();
    std::mt19937_64 r(sample_seed);
    DatasetSample s;
    s.id = sample_id(static_cast<std::size_t>(i));
    s.seed = sample_seed;
    if (i < cfg.n_easy) {
      const MattingAsset& a = assets[std::uniform_int_distribution<std::size_t>(0, assets.size() - 1)(r)];
      const Image bg = pick_bg(a, r);
      s.kind = SampleKind::Easy;
      s.triplet = make_easy_triplet(a, bg, sample_color(r, cfg.palette_probability));
    } else {
      const MattingAsset& a = sources[std::uniform_int_distribution<std::size_t>(0, sources.size() - 1)(r)];
      const Image bg1 = pick_bg(a, r);
      const Image bg2 = pick_bg(a, r);
      const Image canvas = solid_image(a.foreground.height(), a.foreground.width(),
                                       sample_color(r, cfg.palette_probability));
      const Image easy_fg = alpha_composite(a.foreground, canvas, a.alpha);
      s.kind = SampleKind::Hard;
      s.triplet = make_hard_triplet(easy_fg, apply_mask_mode(a.alpha, cfg.generator_mask), bg1, bg2, model);
    }
    rows.push_back({s.id, s.triplet.fg.width(), s.triplet.fg.height(), s.kind, s.seed});
    if (!root.empty()) write_sample(root, s);
    out.push_back(std::move(s));
  }
  if (!root.empty()) write_manifest(root, rows);
  return out;
}

// Evaluation set with exact targets: every input is snapped to the 8-bit grid
// before compositing so the stored files reproduce the target bit for bit.
// fg is the asset over a pure-color backdrop, fg_layer the decontaminated
// foreground, and the trimap bands the binarized alpha.
inline std::vector<DatasetSample> make_syntest(const std::vector<MattingAsset>& assets,
                                               const std::vector<Image>& backgrounds, int n, std::uint64_t seed,
                                               const std::filesystem::path& root = {},
                                               const CompositeConfig& ccfg = {}) {
  if (n < 0) throw UsageError("sample count must be non-negative");
  if (n > 0 && (assets.empty() || backgrounds.empty())) throw DataError("syntest needs assets and backgrounds");
  std::mt19937_64 rng(seed);
  std::vector<DatasetSample> out;
  std::vector<ManifestRow> rows;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t sample_seed = rng();
    std::mt19937_64 r(sample_seed);
    const MattingAsset& a = assets[std::uniform_int_distribution<std::size_t>(0, assets.size() - 1)(r)];
    a.validate();
    const Image& raw_bg = backgrounds[std::uniform_int_distribution<std::size_t>(0, backgrounds.size() - 1)(r)];
    const Image bg = quantize(to_rgb(resize_bilinear(raw_bg, a.foreground.width(), a.foreground.height())));
    const Image layer = quantize(a.foreground);
    const SoftMask alpha = quantize(a.alpha);
    const Image canvas = quantize(solid_image(bg.height(), bg.width(), sample_color(r)));

    DatasetSample s;
    s.id = sample_id(static_cast<std::size_t>(i));
    s.kind = SampleKind::SynTest;
    s.seed = sample_seed;
    s.triplet.fg = quantize(alpha_composite(layer, canvas, alpha));
    s.triplet.bg = bg;
    s.triplet.target = quantize(alpha_composite(layer, bg, alpha));
    s.triplet.fg_mask = alpha;
    s.trimap = make_trimap(alpha, ccfg.trimap_band, ccfg.binarize_threshold);
    s.fg_layer = layer;
    rows.push_back({s.id, bg.width(), bg.height(), s.kind, s.seed});
    if (!root.empty()) write_sample(root, s);
    out.push_back(std::move(s));
  }
  if (!root.empty()) write_manifest(root, rows);
  return out;
}

// Loads RGBA images as matting assets (alpha channel = matte).
inline std::vector<MattingAsset> load_assets(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<MattingAsset> out;
  for (const auto& f : files) {
    const Image img = load_image(f);
    if (img.channels() != 4) throw DataError("matting asset must be RGBA: " + f.string());
    out.push_back({to_rgb(img), to_mask(img, 3)});
  }
  return out;
}

inline std::vector<Image> load_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Image> out;
  for (const auto& f : files) out.push_back(to_rgb(load_image(f)));
  return out;
}

inline std::vector<MattingAsset> synthetic_assets(int count, int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<MattingAsset> out;
  for (int i = 0; i < count; ++i) out.push_back(synthetic_asset(height, width, rng));
  return out;
}

inline std::vector<Image> synthetic_backgrounds(int count, int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Image> out;
  for (int i = 0; i < count; ++i) out.push_back(synthetic_background(height, width, rng));
  return out;
}

// ---------------------------------------------------------------------------
// Training views of a dataset

inline std::vector<Triplet> triplets_of(const std::vector<DatasetSample>& samples) {
  std::vector<Triplet> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.triplet);
  return out;
}

// Mask fed to the fusion network per sample: hard triplets keep the mask
// their generator saw, the rest apply `mode` to the stored alpha.
inline std::vector<SoftMask> training_masks(const std::vector<DatasetSample>& samples, MaskMode mode) {
  std::vector<SoftMask> out;
  out.reserve(samples.size());
  for (const auto& s : samples)
    out.push_back(s.kind == SampleKind::Hard ? s.triplet.fg_mask : apply_mask_mode(s.triplet.fg_mask, mode));
  return out;
}

// `per_sample` corrupted copies of each sample's alpha, paired with its
// foreground image.
inline std::vector<RefinePair> make_refine_pairs(const std::vector<DatasetSample>& samples, int per_sample,
                                                 std::uint64_t seed) {
  if (per_sample < 1) throw UsageError("need at least one corruption per sample");
  std::mt19937_64 rng(seed);
  std::vector<RefinePair> out;
  for (const auto& s : samples)
    for (int k = 0; k < per_sample; ++k) out.push_back({s.triplet.fg, corrupt_mask(s.triplet.fg_mask, rng), s.triplet.fg_mask});
  return out;
}

}  // namespace autocomp
