#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "autocomp/augment.hpp"
#include "autocomp/mlf.hpp"
#include "autocomp/nn/gradcheck.hpp"
#include "autocomp/train.hpp"
#include "support.hpp"

using namespace autocomp;
using testsupport::random_image;
using testsupport::random_mask;

namespace {

EncoderDecoderConfig tiny_config() { return mlf_config(2, 4, 2); }

std::vector<float> flat(const nn::ParameterStore<float>& s) {
  std::vector<float> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (float v : s[i].value.data()) out.push_back(v);
  return out;
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ToySet {
  std::vector<Triplet> triplets;
  std::vector<SoftMask> masks;
};

ToySet toy_set(int n, int size, std::uint64_t seed) {
  const auto assets = synthetic_assets(n, size, size, seed);
  const auto bgs = synthetic_backgrounds(n, size, size, seed + 1);
  std::mt19937_64 rng(seed + 2);
  ToySet t;
  for (int i = 0; i < n; ++i) {
    t.triplets.push_back(make_easy_triplet(assets[i], bgs[i], sample_color(rng)));
    t.masks.push_back(binarize(assets[i].alpha, 0.5));
  }
  return t;
}

TrainConfig toy_train(int iterations, int crop, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.crop_size = crop;
  cfg.seed = seed;
  return cfg;
}

std::filesystem::path data_dir() { return AUTOCOMP_TEST_DATA_DIR; }

}  // namespace

TEST(MlfNetwork, OutputShapeMatchesInput) {
  const MlfNetwork<float> net(mlf_config(), 1);
  for (auto [h, w] : {std::pair{64, 64}, {96, 64}}) {
    const Image out = mlf_forward(net, random_image(h, w, 3, 2), random_mask(h, w, 3), random_image(h, w, 3, 4),
                                  random_mask(h, w, 5));
    EXPECT_EQ(out.height(), h);
    EXPECT_EQ(out.width(), w);
    EXPECT_EQ(out.channels(), 3);
    for (float v : out.data()) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
  }
}

TEST(MlfNetwork, PadsSizesOffTheMultiple) {
  const MlfNetwork<float> net(tiny_config(), 1);
  const Image out = mlf_forward(net, random_image(13, 7, 3, 2), random_mask(13, 7, 3), random_image(13, 7, 3, 4),
                                random_mask(13, 7, 5));
  EXPECT_EQ(out.height(), 13);
  EXPECT_EQ(out.width(), 7);
}

TEST(MlfNetwork, ZeroWeightsGiveHalf) {
  MlfNetwork<float> net(mlf_config(), 1);
  net.zero_all_weights();
  const Image out = mlf_forward(net, random_image(16, 16, 3, 6), random_mask(16, 16, 7), random_image(16, 16, 3, 8),
                                random_mask(16, 16, 9));
  for (float v : out.data()) EXPECT_EQ(v, 0.5f);
}

TEST(MlfNetwork, Errors) {
  const MlfNetwork<float> net(tiny_config(), 1);
  EXPECT_THROW(mlf_forward(net, Image(8, 8, 3), SoftMask(8, 8), Image(8, 10, 3), SoftMask(8, 8)), DataError);
  EXPECT_THROW(mlf_forward(net, Image(8, 8, 1), SoftMask(8, 8), Image(8, 8, 1), SoftMask(8, 8)), DataError);
  EXPECT_THROW(net.forward(nullptr, {nn::Tensor<float>(nn::Shape{1, 4, 6, 6})}), DataError);
  EXPECT_THROW(MlfNetwork<float>(mlf_config(0), 1), UsageError);
}

TEST(MlfNetwork, DefaultParameterCounts) {
  EXPECT_EQ(MlfNetwork<float>(mlf_config(), 0).parameter_count(), 398443u);
  const auto single = single_stream_matched(mlf_config());
  EXPECT_EQ(single.streams, 1);
  EXPECT_EQ(single.in_channels, 8);
  const double ratio =
      double(MlfNetwork<float>(single, 0).parameter_count()) / MlfNetwork<float>(mlf_config(), 0).parameter_count();
  EXPECT_NEAR(ratio, 1.0, 0.01);
}

TEST(MlfNetwork, EncodersAreDisjoint) {
  MlfNetwork<float> net(tiny_config(), 3);
  std::size_t fg = 0, bg = 0;
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    const auto& name = net.parameters()[i].name;
    fg += name.starts_with("fg_enc.");
    bg += name.starts_with("bg_enc.");
  }
  EXPECT_EQ(fg, bg);
  EXPECT_GT(fg, 0u);

  const auto x = stream_tensor<float>(random_image(8, 8, 3, 10), random_mask(8, 8, 11));
  const auto fg_before = net.encode(nullptr, 0, x);
  const auto bg_before = net.encode(nullptr, 1, x);
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    auto& p = net.parameters()[i];
    if (p.name.starts_with("fg_enc."))
      for (auto& v : p.value.data()) v += 0.25f;
  }
  const auto fg_after = net.encode(nullptr, 0, x);
  const auto bg_after = net.encode(nullptr, 1, x);
  bool fg_changed = false;
  for (std::size_t k = 0; k < bg_before.size(); ++k) {
    for (std::size_t i = 0; i < bg_before[k].numel(); ++i) {
      EXPECT_EQ(bg_before[k].data()[i], bg_after[k].data()[i]);
      fg_changed |= fg_before[k].data()[i] != fg_after[k].data()[i];
    }
  }
  EXPECT_TRUE(fg_changed);
}

TEST(MlfNetwork, SingleStreamConcatenatesInputs) {
  auto cfg = tiny_config();
  cfg.streams = 1;
  cfg.in_channels = 8;
  const MlfNetwork<float> net(cfg, 4);
  const Image out = mlf_forward(net, random_image(8, 8, 3, 12), random_mask(8, 8, 13), random_image(8, 8, 3, 14),
                                random_mask(8, 8, 15));
  EXPECT_EQ(out.height(), 8);
}

TEST(MlfNetwork, InitializationIsDeterministic) {
  EXPECT_EQ(flat(MlfNetwork<float>(tiny_config(), 77).parameters()), flat(MlfNetwork<float>(tiny_config(), 77).parameters()));
  EXPECT_NE(flat(MlfNetwork<float>(tiny_config(), 77).parameters()), flat(MlfNetwork<float>(tiny_config(), 78).parameters()));
}

TEST(PerceptualLoss, ZeroOnEqualAndNonNegative) {
  const FeatureExtractor<double> fx;
  const auto a = image_to_tensor<double>(random_image(8, 8, 3, 16));
  const auto b = image_to_tensor<double>(random_image(8, 8, 3, 17));
  EXPECT_EQ(perceptual_loss<double>(nullptr, fx, a, a).item(), 0.0);
  EXPECT_GT(perceptual_loss<double>(nullptr, fx, a, b).item(), 0.0);
  EXPECT_THROW(perceptual_loss<double>(nullptr, fx, a, image_to_tensor<double>(Image(8, 4, 3))), DataError);
}

TEST(PerceptualLoss, ExtractorIsFrozenAndSeeded) {
  const FeatureExtractor<float> a, b;
  EXPECT_EQ(flat(a.parameters()), flat(b.parameters()));
  for (std::size_t i = 0; i < a.parameters().size(); ++i) EXPECT_FALSE(a.parameters()[i].value.requires_grad());
}

TEST(PerceptualLoss, GradientMatchesFiniteDifferences) {
  const FeatureExtractor<double> fx;
  nn::Tensor<double> pred = image_to_tensor<double>(random_image(8, 8, 3, 18));
  pred.set_requires_grad(true);
  const auto target = image_to_tensor<double>(random_image(8, 8, 3, 19));
  const auto r = nn::grad_check([&](nn::Tape<double>* t) { return perceptual_loss<double>(t, fx, pred, target); }, {pred});
  EXPECT_LT(r.max_rel_error, 1e-3);
  EXPECT_LT(r.kink_skips * 4, r.coordinates + r.kink_skips);
}

TEST(TotalLoss, Composition) {
  const FeatureExtractor<double> fx;
  const auto p = image_to_tensor<double>(random_image(8, 8, 3, 20));
  const auto t = image_to_tensor<double>(random_image(8, 8, 3, 21));
  EXPECT_EQ(total_loss<double>(nullptr, p, t, 0.0, fx).total.item(), nn::l1_loss<double>(nullptr, p, t).item());
  EXPECT_EQ(total_loss<double>(nullptr, p, p, 0.8, fx).total.item(), 0.0);
  // independent oracles: scalar L1 and the two feature levels' squared differences
  double l1 = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) l1 += std::abs(p.data()[i] - t.data()[i]);
  l1 /= p.numel();
  const auto [p1, p2] = fx.features(nullptr, p);
  const auto [t1, t2] = fx.features(nullptr, t);
  auto msd = [](const nn::Tensor<double>& a, const nn::Tensor<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    return s / a.numel();
  };
  const double expect = l1 + 0.8 * (msd(p1, t1) + msd(p2, t2));
  EXPECT_NEAR(total_loss<double>(nullptr, p, t, 0.8, fx).total.item(), expect, 1e-9);
  EXPECT_THROW(total_loss<double>(nullptr, p, t, -1.0, fx), UsageError);
}

TEST(TrainMlf, ZeroIterationsLeavesParameters) {
  MlfNetwork<float> net(tiny_config(), 5);
  const auto before = flat(net.parameters());
  const ToySet d = toy_set(2, 16, 30);
  const auto log = train_mlf<float>(net, d.triplets, d.masks, toy_train(0, 8, 1), FeatureExtractor<float>{});
  EXPECT_TRUE(log.empty());
  EXPECT_EQ(flat(net.parameters()), before);
}

TEST(TrainMlf, SameSeedIsBitIdentical) {
  const ToySet d = toy_set(2, 16, 31);
  const FeatureExtractor<float> fx;
  testsupport::TempDir dir("mlf");
  for (const char* name : {"a.ckpt", "b.ckpt"}) {
    MlfNetwork<float> net(tiny_config(), 6);
    train_mlf<float>(net, d.triplets, d.masks, toy_train(15, 8, 2), fx);
    save_network(dir / name, net, kMlfKind);
  }
  EXPECT_EQ(file_bytes(dir / "a.ckpt"), file_bytes(dir / "b.ckpt"));
  MlfNetwork<float> other(tiny_config(), 6);
  train_mlf<float>(other, d.triplets, d.masks, toy_train(15, 8, 3), fx);
  save_network(dir / "c.ckpt", other, kMlfKind);
  EXPECT_NE(file_bytes(dir / "a.ckpt"), file_bytes(dir / "c.ckpt"));
}

TEST(TrainMlf, LossDecreasesOnToySet) {
  const ToySet d = toy_set(2, 16, 32);
  MlfNetwork<float> net(tiny_config(), 7);
  const auto log = train_mlf<float>(net, d.triplets, d.masks, toy_train(300, 16, 4), FeatureExtractor<float>{});
  ASSERT_EQ(log.size(), 300u);
  EXPECT_LT(trailing_mean(log, 300, 50), trailing_mean(log, 50, 50));
  for (const auto& r : log) EXPECT_NEAR(r.total, r.l1 + 0.8 * r.perceptual, 1e-5);
}

TEST(TrainMlf, Errors) {
  MlfNetwork<float> net(tiny_config(), 8);
  const FeatureExtractor<float> fx;
  const ToySet d = toy_set(1, 16, 33);
  EXPECT_THROW(train_mlf<float>(net, {}, {}, toy_train(1, 8, 1), fx), DataError);
  EXPECT_THROW(train_mlf<float>(net, d.triplets, {}, toy_train(1, 8, 1), fx), DataError);
  EXPECT_THROW(train_mlf<float>(net, d.triplets, d.masks, toy_train(1, 7, 1), fx), UsageError);
  auto bad = toy_train(1, 8, 1);
  bad.lr = 0;
  EXPECT_THROW(train_mlf<float>(net, d.triplets, d.masks, bad, fx), UsageError);
}

TEST(TrainMlf, NanLossAbortsWithDump) {
  MlfNetwork<float> net(tiny_config(), 9);
  net.parameters().find("head.bias")->value.data()[0] = std::numeric_limits<float>::quiet_NaN();
  const ToySet d = toy_set(1, 16, 34);
  testsupport::TempDir dir("nan");
  auto cfg = toy_train(3, 8, 1);
  cfg.nan_dump_dir = dir / "dump";
  EXPECT_THROW(train_mlf<float>(net, d.triplets, d.masks, cfg, FeatureExtractor<float>{}), NumericError);
  EXPECT_TRUE(std::filesystem::exists(dir / "dump" / "nan_fg.png"));
}

TEST(Checkpoint, NetworkRoundTrip) {
  testsupport::TempDir dir("net");
  const MlfNetwork<float> net(tiny_config(), 10);
  save_network(dir / "n.ckpt", net, kMlfKind);
  const auto back = load_network<float>(dir / "n.ckpt", kMlfKind);
  EXPECT_EQ(back.config(), net.config());
  EXPECT_EQ(flat(back.parameters()), flat(net.parameters()));
  EXPECT_THROW(load_network<float>(dir / "n.ckpt", kRefinerKind), DataError);
}

TEST(RefineNetwork, ShapeAndZeroWeights) {
  RefineNetwork<float> net(refiner_config(), 11);
  const SoftMask out = refine_forward(net, random_image(320, 320, 3, 22), random_mask(320, 320, 23));
  EXPECT_EQ(out.height(), 320);
  EXPECT_EQ(out.width(), 320);
  net.zero_all_weights();
  const SoftMask z = refine_forward(net, random_image(20, 12, 3, 24), random_mask(20, 12, 25));
  EXPECT_EQ(z.height(), 20);
  for (float v : z.data()) EXPECT_EQ(v, 0.5f);
  EXPECT_THROW(refine_forward(net, Image(8, 8, 3), SoftMask(8, 9)), DataError);
  const MlfNetwork<float> mlf(tiny_config(), 1);
  EXPECT_THROW(refine_forward(mlf, Image(8, 8, 3), SoftMask(8, 8)), DataError);
}

TEST(TrainRefiner, FirstBatchLossIsCrossEntropy) {
  const Image img = random_image(16, 16, 3, 26);
  const SoftMask truth = testsupport::blob_mask(16, 16, 27);
  const SoftMask raw = gaussian_blur(truth, 2.0);
  RefineNetwork<float> net(refiner_config(), 12);
  const SoftMask p = refine_forward(net, img, raw);
  double ce = 0;
  for (std::size_t i = 0; i < p.data().size(); ++i) {
    const double q = std::clamp(double(p.data()[i]), 1e-7, 1 - 1e-7), t = truth.data()[i];
    ce -= t * std::log(q) + (1 - t) * std::log(1 - q);
  }
  ce /= p.data().size();
  auto cfg = toy_train(1, 16, 5);
  cfg.patch_sizes = {16};
  const std::vector<RefinePair> pairs{{img, raw, truth}};
  const auto log = train_refiner<float>(net, pairs, cfg);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_NEAR(log[0].total, ce, 1e-5);
}

TEST(TrainRefiner, ZeroIterationsAndDeterminism) {
  const auto samples = synthesize_dataset(synthetic_assets(2, 32, 32, 40), synthetic_backgrounds(2, 32, 32, 41),
                                          SynthesisConfig{2, 0, 42});
  const auto pairs = make_refine_pairs(samples, 2, 43);
  RefineNetwork<float> a(refiner_config(), 13), b(refiner_config(), 13);
  const auto init = flat(a.parameters());
  train_refiner<float>(a, pairs, toy_train(0, 32, 6));
  EXPECT_EQ(flat(a.parameters()), init);
  train_refiner<float>(a, pairs, toy_train(10, 32, 6));
  train_refiner<float>(b, pairs, toy_train(10, 32, 6));
  EXPECT_EQ(flat(a.parameters()), flat(b.parameters()));
  EXPECT_NE(flat(a.parameters()), init);
  EXPECT_THROW(train_refiner<float>(a, {}, toy_train(1, 32, 6)), DataError);
}

TEST(TrainRefiner, ReducesMaskErrorOnHeldOutSet) {
  const auto train = synthesize_dataset(synthetic_assets(12, 32, 32, 50), synthetic_backgrounds(12, 32, 32, 51),
                                        SynthesisConfig{12, 0, 52});
  const auto held = synthesize_dataset(synthetic_assets(8, 32, 32, 60), synthetic_backgrounds(8, 32, 32, 61),
                                       SynthesisConfig{8, 0, 62});
  RefineNetwork<float> net(refiner_config(), 14);
  auto cfg = toy_train(600, 32, 7);
  cfg.patch_sizes = {16, 24, 32};
  train_refiner<float>(net, make_refine_pairs(train, 4, 53), cfg);
  double raw_l1 = 0, refined_l1 = 0;
  for (const auto& p : make_refine_pairs(held, 2, 63)) {
    const SoftMask r = refine_forward(net, p.image, p.corrupt);
    for (std::size_t i = 0; i < r.data().size(); ++i) {
      raw_l1 += std::abs(p.corrupt.data()[i] - p.truth.data()[i]);
      refined_l1 += std::abs(r.data()[i] - p.truth.data()[i]);
    }
  }
  EXPECT_LE(refined_l1, 0.7 * raw_l1) << "raw " << raw_l1 << " refined " << refined_l1;
}

// The fixture holds a small checkpoint trained here, one input triplet and
// the network output on it. AUTOCOMP_REGEN_GOLDEN=1 rewrites all three.
TEST(Golden, TrainedToyOutputMatchesFixture) {
  const auto dir = data_dir() / "golden";
  const char* regen = std::getenv("AUTOCOMP_REGEN_GOLDEN");
  if (regen != nullptr && std::string(regen) == "1") {
    std::filesystem::create_directories(dir);
    const ToySet d = toy_set(2, 16, 70);
    MlfNetwork<float> net(tiny_config(), 71);
    train_mlf<float>(net, d.triplets, d.masks, toy_train(40, 16, 72), FeatureExtractor<float>{});
    save_network(dir / "toy.ckpt", net, kMlfKind);
    save_image(d.triplets[0].fg, dir / "fg.png");
    save_image(d.triplets[0].bg, dir / "bg.png");
    save_mask(d.masks[0], dir / "mask.png");
    const Image fg = load_image(dir / "fg.png"), bg = load_image(dir / "bg.png");
    const SoftMask m = load_mask(dir / "mask.png");
    const Image out = mlf_forward(net, fg, m, bg, invert_mask(m));
    std::ofstream os(dir / "output.txt");
    os << out.height() << ' ' << out.width() << ' ' << out.channels() << '\n';
    os.precision(9);
    for (float v : out.data()) os << v << '\n';
  }
  ASSERT_TRUE(std::filesystem::exists(dir / "output.txt")) << "missing fixture in " << dir;
  const auto net = load_network<float>(dir / "toy.ckpt", kMlfKind);
  const Image fg = load_image(dir / "fg.png"), bg = load_image(dir / "bg.png");
  const SoftMask m = load_mask(dir / "mask.png");
  const Image out = mlf_forward(net, fg, m, bg, invert_mask(m));
  std::ifstream is(dir / "output.txt");
  int h = 0, w = 0, c = 0;
  is >> h >> w >> c;
  ASSERT_EQ(h, out.height());
  ASSERT_EQ(w, out.width());
  ASSERT_EQ(c, out.channels());
  double worst = 0;
  for (float v : out.data()) {
    double expect = 0;
    ASSERT_TRUE(static_cast<bool>(is >> expect));
    worst = std::max(worst, std::abs(v - expect));
  }
  EXPECT_LT(worst, 1e-5);
}
