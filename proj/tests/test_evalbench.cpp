#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "autocomp/augment.hpp"
#include "autocomp/evalbench.hpp"
#include "support.hpp"

using namespace autocomp;
using testsupport::random_image;

namespace {

double psnr_oracle(const Image& a, const Image& b, const Region* r) {
  long double sum = 0;
  long n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (r && !r->inside[y * a.width() + x]) continue;
      for (int c = 0; c < a.channels(); ++c) {
        const long double d = (long double)a.at(y, x, c) - b.at(y, x, c);
        sum += d * d;
        ++n;
      }
    }
  return double(10.0L * std::log10(n / sum));
}

Region left_half(int h, int w) {
  Region r{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w / 2; ++x) r.inside[y * w + x] = 1;
  return r;
}

std::vector<DatasetSample> syntest(int n, std::uint64_t seed) {
  return make_syntest(synthetic_assets(4, 32, 32, seed), synthetic_backgrounds(4, 32, 32, seed + 1), n, seed + 2);
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Psnr, IdenticalImagesHitCap) {
  const Image a = random_image(8, 8, 3, 1);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_EQ(psnr(a, a, left_half(8, 8)), kPsnrCap);
}

TEST(Psnr, ClosedForm) {
  EXPECT_NEAR(psnr(Image(4, 4, 3, 0.0f), Image(4, 4, 3, 0.5f)), 10 * std::log10(4.0), 1e-12);
  EXPECT_NEAR(psnr(Image(4, 4, 3, 0.0f), Image(4, 4, 3, 0.5f)), 6.0206, 1e-4);
}

TEST(Psnr, MatchesScalarOracle) {
  for (int seed = 0; seed < 5; ++seed) {
    const Image a = random_image(32, 32, 3, 10 + seed), b = random_image(32, 32, 3, 20 + seed);
    const Region r = left_half(32, 32);
    EXPECT_NEAR(psnr(a, b), psnr_oracle(a, b, nullptr), 1e-9);
    EXPECT_NEAR(psnr(a, b, r), psnr_oracle(a, b, &r), 1e-9);
  }
}

TEST(Psnr, Symmetric) {
  const Image a = random_image(9, 11, 3, 2), b = random_image(9, 11, 3, 3);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(Psnr, OutOfRegionPixelsIgnored) {
  const Image a = random_image(16, 16, 3, 4);
  Image b = random_image(16, 16, 3, 5);
  const Region r = left_half(16, 16);
  const double before = psnr(a, b, r);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x)
      for (int c = 0; c < 3; ++c) b.at(y, x, c) = 1.0f - b.at(y, x, c);
  EXPECT_EQ(psnr(a, b, r), before);
  EXPECT_NE(psnr(a, b), psnr(a, random_image(16, 16, 3, 5)));
}

TEST(Psnr, DoublingErrorCostsSixDecibels) {
  // dyadic offsets keep every difference exact in float
  Image a(8, 8, 3, 0.5f), b(8, 8, 3), b2(8, 8, 3);
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const float e = static_cast<float>(i % 7 + 1) / 1024.0f;
    b.data()[i] = 0.5f + e;
    b2.data()[i] = 0.5f + 2 * e;
  }
  EXPECT_NEAR(psnr(a, b) - psnr(a, b2), 20 * std::log10(2.0), 1e-9);
}

TEST(Psnr, Errors) {
  EXPECT_THROW(psnr(Image(4, 4, 3), Image(4, 5, 3)), DataError);
  EXPECT_THROW(psnr(Image(4, 4, 3), Image(4, 4, 3), Region{4, 4, std::vector<std::uint8_t>(16, 0)}), DataError);
  EXPECT_THROW(psnr(Image(4, 4, 3), Image(4, 4, 3), left_half(5, 4)), DataError);
  EXPECT_THROW(region_mode_from_string("edges"), UsageError);
}

TEST(Benchmark, OracleHitsCapEverywhere) {
  const auto ds = syntest(6, 40);
  for (auto mode : {RegionMode::Whole, RegionMode::Unknown}) {
    const auto r = run_benchmark(ds, {oracle_method()}, mode);
    ASSERT_EQ(r.size(), 1u);
    for (const auto& s : r[0].per_sample) EXPECT_EQ(s.psnr, kPsnrCap) << s.id;
  }
}

TEST(Benchmark, CopyPasteBelowOracleOnSoftBoundaries) {
  const auto ds = syntest(6, 41);
  const auto r = run_benchmark(ds, {oracle_method(), copy_paste_method()}, RegionMode::Unknown);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    bool fractional = false;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const float a = ds[i].triplet.fg_mask.at(y, x);
        fractional |= ds[i].trimap->at(y, x) == TrimapLabel::Unknown && a > 0.0f && a < 1.0f;
      }
    if (fractional) EXPECT_LT(r[1].per_sample[i].psnr, r[0].per_sample[i].psnr);
  }
}

TEST(Benchmark, MeanIsArithmeticMeanAndThreadsAgree) {
  const auto ds = syntest(7, 42);
  const std::vector<Method> methods{copy_paste_method(), feather_method(2.0), pyramid_method()};
  const auto one = run_benchmark(ds, methods, RegionMode::Unknown, 1);
  const auto four = run_benchmark(ds, methods, RegionMode::Unknown, 4);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    double s = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      s += one[m].per_sample[i].psnr;
      EXPECT_EQ(one[m].per_sample[i].psnr, four[m].per_sample[i].psnr);
      EXPECT_EQ(one[m].per_sample[i].id, ds[i].id);
    }
    EXPECT_NEAR(one[m].mean, s / ds.size(), 1e-12);
  }
}

TEST(Benchmark, EmptyMethodListAndErrors) {
  auto ds = syntest(2, 43);
  EXPECT_TRUE(run_benchmark(ds, {}, RegionMode::Unknown).empty());
  ds[0].trimap.reset();
  EXPECT_THROW(run_benchmark(ds, {copy_paste_method()}, RegionMode::Unknown), DataError);
  EXPECT_NO_THROW(run_benchmark(ds, {copy_paste_method()}, RegionMode::Whole));
  ds[1].fg_layer.reset();
  EXPECT_THROW(run_benchmark(ds, {oracle_method()}, RegionMode::Whole), DataError);
  const Method wrong{"wrong", [](const DatasetSample&) { return Image(3, 3, 3); }};
  EXPECT_THROW(run_benchmark(ds, {wrong}, RegionMode::Whole), DataError);
}

TEST(Benchmark, DirectoryMethodMatchesFunctionMethod) {
  testsupport::TempDir dir("pred");
  const auto ds = syntest(4, 44);
  const Method feather = feather_method(2.0);
  for (const auto& s : ds) save_image(feather.predict(s), dir / (s.id + ".png"));
  const auto r = run_benchmark(ds, {feather, Method::from_directory("ingested", dir.path())}, RegionMode::Unknown);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(r[0].per_sample[i].psnr, r[1].per_sample[i].psnr);
  std::filesystem::remove(dir / (ds[2].id + ".png"));
  EXPECT_THROW(run_benchmark(ds, {Method::from_directory("x", dir.path())}, RegionMode::Unknown), DataError);
}

TEST(Report, OneMethodOneSample) {
  testsupport::TempDir dir("rep");
  const auto r = run_benchmark(syntest(1, 45), {copy_paste_method()}, RegionMode::Unknown);
  emit_report(r, dir / "report.csv");
  const auto rows = lines(dir / "report.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "method,region,mean_psnr,n_samples");
  EXPECT_TRUE(rows[1].starts_with("copy-paste,unknown,"));
  EXPECT_TRUE(rows[1].ends_with(",1"));
  EXPECT_EQ(lines(dir / "report_per_sample.csv").size(), 2u);
  EXPECT_NE(read_text(dir / "report.txt").find("copy-paste"), std::string::npos);
}

TEST(Report, MeanColumnMatchesPerSampleFile) {
  testsupport::TempDir dir("rep");
  const auto r =
      run_benchmark(syntest(9, 46), {copy_paste_method(), feather_method(2.0), oracle_method()}, RegionMode::Unknown);
  emit_report(r, dir / "out" / "table.csv");
  std::map<std::string, std::pair<double, int>> sums;
  const auto per = lines(dir / "out" / "table_per_sample.csv");
  for (std::size_t i = 1; i < per.size(); ++i) {
    std::stringstream ss(per[i]);
    std::string method, region, id, value;
    std::getline(ss, method, ',');
    std::getline(ss, region, ',');
    std::getline(ss, id, ',');
    std::getline(ss, value, ',');
    sums[method].first += std::stod(value);
    sums[method].second += 1;
  }
  const auto rows = lines(dir / "out" / "table.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::string method, region, mean, n;
    std::getline(ss, method, ',');
    std::getline(ss, region, ',');
    std::getline(ss, mean, ',');
    std::getline(ss, n, ',');
    EXPECT_EQ(std::stoi(n), sums[method].second);
    EXPECT_NEAR(std::stod(mean), sums[method].first / sums[method].second, 1e-9) << method;
  }
}

TEST(Report, DeterministicBytes) {
  testsupport::TempDir dir("rep");
  const auto r = run_benchmark(syntest(3, 47), {pyramid_method(), feather_method(2.0)}, RegionMode::Whole);
  emit_report(r, dir / "a.csv");
  emit_report(r, dir / "b.csv");
  EXPECT_EQ(read_text(dir / "a.csv"), read_text(dir / "b.csv"));
  EXPECT_EQ(read_text(dir / "a_per_sample.csv"), read_text(dir / "b_per_sample.csv"));
  EXPECT_EQ(read_text(dir / "a.txt"), read_text(dir / "b.txt"));
}

TEST(Report, EmptyResultsWriteHeaders) {
  testsupport::TempDir dir("rep");
  emit_report({}, dir / "e.csv");
  EXPECT_EQ(lines(dir / "e.csv").size(), 1u);
}
