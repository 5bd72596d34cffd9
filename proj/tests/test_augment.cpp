#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "autocomp/augment.hpp"
#include "support.hpp"

using namespace autocomp;
using testsupport::max_abs_diff;
using testsupport::random_image;
using testsupport::random_mask;

namespace {

MattingAsset asset_with_alpha(int h, int w, float alpha, std::uint64_t seed) {
  return {random_image(h, w, 3, seed), SoftMask(h, w, alpha)};
}

// alpha * f + (1 - alpha) * b per pixel in double
double max_composite_error(const Image& out, const Image& f, const Image& b, const SoftMask& a) {
  double m = 0;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const double e = double(a.at(y, x)) * f.at(y, x, c) + (1.0 - a.at(y, x)) * b.at(y, x, c);
        m = std::max(m, std::abs(e - out.at(y, x, c)));
      }
  return m;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(EasyTriplet, OpaqueAssetIsForeground) {
  const MattingAsset a = asset_with_alpha(6, 7, 1.0f, 1);
  const Image bg = random_image(6, 7, 3, 2);
  const Triplet t = make_easy_triplet(a, bg, {0.2f, 0.4f, 0.6f});
  EXPECT_EQ(t.fg, a.foreground);
  EXPECT_EQ(t.target, a.foreground);
  EXPECT_EQ(t.bg, bg);
}

TEST(EasyTriplet, TransparentAssetIsBackdrop) {
  const Image bg = random_image(6, 7, 3, 4);
  const Triplet t = make_easy_triplet(asset_with_alpha(6, 7, 0.0f, 3), bg, {0.2f, 0.4f, 0.6f});
  EXPECT_EQ(t.fg, solid_image(6, 7, {0.2f, 0.4f, 0.6f}));
  EXPECT_EQ(t.target, bg);
}

TEST(EasyTriplet, RandomAssetMatchesCompositeOracle) {
  std::mt19937_64 rng(5);
  MattingAsset a = synthetic_asset(32, 32, rng);
  // the blur leaves the core a few ulps under 1; saturate it so the exactness
  // check below has pixels to look at
  for (auto& v : a.alpha.data()) v = v > 0.99f ? 1.0f : v < 0.01f ? 0.0f : v;
  const Image bg = random_image(32, 32, 3, 6);
  const Rgb color{0.1f, 0.9f, 0.3f};
  const Triplet t = make_easy_triplet(a, bg, color);
  EXPECT_EQ(t.target, alpha_composite(a.foreground, bg, a.alpha));
  EXPECT_LT(max_composite_error(t.target, a.foreground, bg, a.alpha), 1e-6);
  EXPECT_LT(max_composite_error(t.fg, a.foreground, solid_image(32, 32, color), a.alpha), 1e-6);
  EXPECT_EQ(t.fg_mask.data().size(), a.alpha.data().size());
  // exact where the matte is saturated
  std::size_t ones = 0, zeros = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) {
        if (a.alpha.at(y, x) == 1.0f) {
          EXPECT_EQ(t.target.at(y, x, c), a.foreground.at(y, x, c));
          ++ones;
        } else if (a.alpha.at(y, x) == 0.0f) {
          EXPECT_EQ(t.target.at(y, x, c), bg.at(y, x, c));
          ++zeros;
        }
      }
  EXPECT_GT(ones, 0u);
  EXPECT_GT(zeros, 0u);
}

TEST(EasyTriplet, DimensionMismatch) {
  EXPECT_THROW(make_easy_triplet(asset_with_alpha(6, 7, 1.0f, 1), Image(6, 8, 3), {}), DataError);
}

TEST(HardTriplet, EqualBackgroundsGiveEqualOutputs) {
  const MlfNetwork<float> net(mlf_config(2, 4, 2), 9);
  const Image easy = random_image(16, 16, 3, 10), bg = random_image(16, 16, 3, 11);
  const SoftMask m = testsupport::blob_mask(16, 16, 12);
  const Triplet t = make_hard_triplet(easy, m, bg, bg, network_compositor(net));
  EXPECT_EQ(t.fg, t.target);
  EXPECT_EQ(t.bg, bg);
  const Triplet again = make_hard_triplet(easy, m, bg, bg, network_compositor(net));
  EXPECT_EQ(again.fg, t.fg);
}

TEST(HardTriplet, OracleCompositorSatisfiesCompositingEquation) {
  const Image easy = random_image(12, 9, 3, 13), bg1 = random_image(12, 9, 3, 14), bg2 = random_image(12, 9, 3, 15);
  const SoftMask m = random_mask(12, 9, 16);
  const Triplet t = make_hard_triplet(easy, m, bg1, bg2, oracle_compositor());
  EXPECT_EQ(t.target, alpha_composite(easy, bg2, m));
  EXPECT_EQ(t.fg, alpha_composite(easy, bg1, m));
  EXPECT_LT(max_composite_error(t.target, easy, bg2, m), 1e-6);
  EXPECT_EQ(t.bg, bg2);
  EXPECT_EQ(max_abs_diff(t.fg_mask, m), 0.0);
}

TEST(HardTriplet, BackgroundMaskIsInverted) {
  SoftMask seen;
  const Compositor spy = [&](const Image& f, const SoftMask&, const Image&, const SoftMask& bm) {
    seen = bm;
    return f;
  };
  const SoftMask m = random_mask(5, 5, 17);
  make_hard_triplet(Image(5, 5, 3), m, Image(5, 5, 3), Image(5, 5, 3), spy);
  EXPECT_LT(max_abs_diff(seen, invert_mask(m)), 1e-7);
}

TEST(HardTriplet, RequiresModel) {
  EXPECT_THROW(make_hard_triplet(Image(4, 4, 3), SoftMask(4, 4), Image(4, 4, 3), Image(4, 4, 3), Compositor{}),
               DataError);
}

TEST(SyntheticAssets, ValidAndSeeded) {
  const auto a = synthetic_assets(4, 40, 48, 21);
  const auto b = synthetic_assets(4, 40, 48, 21);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NO_THROW(a[i].validate());
    EXPECT_EQ(a[i].foreground, b[i].foreground);
    float lo = 1, hi = 0;
    for (float v : a[i].alpha.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_GE(lo, 0.0f);
    EXPECT_LE(hi, 1.0f);
    EXPECT_LT(lo, 0.5f);
    EXPECT_GT(hi, 0.5f);
  }
  EXPECT_NE(synthetic_backgrounds(1, 8, 8, 1)[0], synthetic_backgrounds(1, 8, 8, 2)[0]);
}

TEST(CorruptMask, StaysInRangeAndDiffers) {
  std::mt19937_64 r1(3), r2(3);
  const SoftMask truth = binarize(testsupport::blob_mask(32, 32, 22), 0.5);
  const SoftMask c = corrupt_mask(truth, r1);
  EXPECT_EQ(max_abs_diff(c, corrupt_mask(truth, r2)), 0.0);
  EXPECT_GT(max_abs_diff(c, truth), 0.1);
  for (float v : c.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(SynthesizeDataset, SingleEasySample) {
  testsupport::TempDir dir("ds");
  const auto samples = synthesize_dataset(synthetic_assets(2, 16, 16, 1), synthetic_backgrounds(2, 20, 24, 2),
                                          SynthesisConfig{1, 0, 3}, {}, dir.path());
  ASSERT_EQ(samples.size(), 1u);
  const auto rows = read_manifest(dir.path());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].id, "000000");
  EXPECT_EQ(rows[0].kind, SampleKind::Easy);
  EXPECT_EQ(rows[0].width, 16);
  for (const char* f : {"fg.png", "bg.png", "target.png", "mask.png"})
    EXPECT_TRUE(std::filesystem::exists(dir / "000000" / f)) << f;
}

TEST(SynthesizeDataset, SeededAndRoundTrips) {
  testsupport::TempDir a("ds"), b("ds");
  const auto assets = synthetic_assets(3, 24, 24, 4);
  const auto bgs = synthetic_backgrounds(3, 24, 24, 5);
  const SynthesisConfig cfg{4, 3, 6};
  const auto s1 = synthesize_dataset(assets, bgs, cfg, oracle_compositor(), a.path());
  synthesize_dataset(assets, bgs, cfg, oracle_compositor(), b.path());
  EXPECT_EQ(read_text(a / "manifest.csv"), read_text(b / "manifest.csv"));

  const auto back = load_dataset(a.path());
  ASSERT_EQ(back.size(), 7u);
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_NO_THROW(back[i].triplet.validate());
    EXPECT_EQ(back[i].kind, i < 4 ? SampleKind::Easy : SampleKind::Hard);
    EXPECT_LE(max_abs_diff(back[i].triplet.fg, s1[i].triplet.fg), 1.0 / 255);
    EXPECT_LE(max_abs_diff(back[i].triplet.target, s1[i].triplet.target), 1.0 / 255);
    EXPECT_LE(max_abs_diff(back[i].triplet.fg_mask, s1[i].triplet.fg_mask), 1.0 / 255);
  }
  // hard samples keep the binarized generator mask
  for (float v : s1[5].triplet.fg_mask.data()) EXPECT_TRUE(v == 0.0f || v == 1.0f);
}

TEST(SynthesizeDataset, TrainingMasks) {
  const auto assets = synthetic_assets(2, 16, 16, 7);
  auto cfg = SynthesisConfig{1, 1, 8};
  cfg.generator_mask = MaskMode::Soft;
  const auto s = synthesize_dataset(assets, synthetic_backgrounds(2, 16, 16, 9), cfg, oracle_compositor());
  const auto masks = training_masks(s, MaskMode::Binary);
  EXPECT_EQ(max_abs_diff(masks[0], binarize(s[0].triplet.fg_mask, 0.5)), 0.0);
  EXPECT_EQ(max_abs_diff(masks[1], s[1].triplet.fg_mask), 0.0);
}

TEST(SynthesizeDataset, Errors) {
  const auto assets = synthetic_assets(1, 8, 8, 1);
  const auto bgs = synthetic_backgrounds(1, 8, 8, 1);
  EXPECT_THROW(synthesize_dataset(assets, bgs, SynthesisConfig{0, 1, 1}), UsageError);
  EXPECT_THROW(synthesize_dataset({}, bgs, SynthesisConfig{1, 0, 1}), DataError);
  EXPECT_THROW(synthesize_dataset(assets, {}, SynthesisConfig{1, 0, 1}), DataError);
  EXPECT_TRUE(synthesize_dataset(assets, bgs, SynthesisConfig{0, 0, 1}).empty());
}

TEST(SynTest, TargetsAndTrimapsByConstruction) {
  testsupport::TempDir dir("syn");
  const auto samples =
      make_syntest(synthetic_assets(3, 32, 28, 30), synthetic_backgrounds(3, 40, 40, 31), 5, 32, dir.path());
  const auto back = load_dataset(dir.path());
  ASSERT_EQ(back.size(), 5u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    ASSERT_TRUE(s.fg_layer && s.trimap);
    EXPECT_EQ(s.triplet.target, quantize(alpha_composite(*s.fg_layer, s.triplet.bg, s.triplet.fg_mask)));
    // on the 8-bit grid, so the files reproduce the samples exactly
    EXPECT_EQ(back[i].triplet.target, s.triplet.target);
    EXPECT_EQ(back[i].triplet.fg, s.triplet.fg);
    EXPECT_EQ(max_abs_diff(back[i].triplet.fg_mask, s.triplet.fg_mask), 0.0);
    EXPECT_EQ(*back[i].fg_layer, *s.fg_layer);
    EXPECT_EQ(*back[i].trimap, *s.trimap);
    const auto d = testsupport::brute_boundary_distance(s.triplet.fg_mask, 0.5);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 28; ++x)
        EXPECT_EQ(s.trimap->at(y, x) == TrimapLabel::Unknown, d[y * 28 + x] <= 8.0);
  }
}

TEST(SynTest, EmptySetWritesHeaderOnly) {
  testsupport::TempDir dir("syn");
  EXPECT_TRUE(make_syntest({}, {}, 0, 1, dir.path()).empty());
  EXPECT_EQ(read_text(dir / "manifest.csv"), "id,width,height,kind,seed\n");
  EXPECT_TRUE(load_dataset(dir.path()).empty());
}

TEST(Manifest, RejectsMalformedInput) {
  testsupport::TempDir dir("man");
  EXPECT_THROW(read_manifest(dir.path()), DataError);
  {
    std::ofstream(dir / "manifest.csv") << "id,width\n";
  }
  EXPECT_THROW(read_manifest(dir.path()), DataError);
  {
    std::ofstream(dir / "manifest.csv") << "id,width,height,kind,seed\n000000,4,4,weird,1\n";
  }
  EXPECT_THROW(read_manifest(dir.path()), DataError);
  {
    std::ofstream(dir / "manifest.csv") << "id,width,height,kind,seed\n000000,4,4,easy,1\n";
  }
  EXPECT_THROW(load_dataset(dir.path()), Error);
}

TEST(RefinePairs, CorruptCopiesPerSample) {
  const auto s = synthesize_dataset(synthetic_assets(2, 16, 16, 40), synthetic_backgrounds(2, 16, 16, 41),
                                    SynthesisConfig{2, 0, 42});
  const auto pairs = make_refine_pairs(s, 3, 43);
  ASSERT_EQ(pairs.size(), 6u);
  EXPECT_EQ(max_abs_diff(pairs[4].truth, s[1].triplet.fg_mask), 0.0);
  EXPECT_GT(max_abs_diff(pairs[0].corrupt, pairs[1].corrupt), 0.0);
  EXPECT_THROW(make_refine_pairs(s, 0, 1), UsageError);
}
