#include <cmath>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "idsr/ablation.hpp"
#include "idsr/evaluation.hpp"
#include "idsr/image_io.hpp"
#include "idsr/metrics.hpp"
#include "idsr/rain.hpp"
#include "idsr/render.hpp"
#include "idsr/scalespace.hpp"
#include "test_util.hpp"

namespace idsr {
namespace {

namespace fs = std::filesystem;

Image offset(const Image& img, float d) {
  Image out = img;
  for (float& v : out.data()) v += d;
  return out;
}

// Direct SSIM with an explicit 11x11 Gaussian window over valid positions.
double ssim_oracle(const Image& a_rgb, const Image& b_rgb) {
  const Image a = luminance(a_rgb), b = luminance(b_rgb);
  double w[11][11], norm = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) norm += w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + 11 <= a.height(); ++y)
    for (int x = 0; x + 11 <= a.width(); ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double k = w[i][j] / norm, p = a.at(y + i, x + j), q = b.at(y + i, x + j);
          ma += k * p;
          mb += k * q;
          saa += k * p * p;
          sbb += k * q * q;
          sab += k * p * q;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

TEST(Psnr, CapAndKnownValue) {
  const Image a = test::random_image(16, 16, 3, 1, 0.2f, 0.8f);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_NEAR(psnr(a, offset(a, 0.1f)), 20.0, 1e-4);
  EXPECT_NEAR(psnr(a, offset(a, 0.01f)), 40.0, 1e-3);
  EXPECT_EQ(test::error_code_of([&] { (void)psnr(a, test::random_image(16, 15, 3, 1)); }), Errc::dimension_mismatch);
}

TEST(Ssim, MatchesDirectOracle) {
  const Image a = synth_scene(40, 36, 3);
  RainConfig rain;
  rain.streak_count = 20;
  const Image b = synth_rain(a, rain).rainy;
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-6);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
  EXPECT_LT(ssim(a, b), 1.0);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-9);
}

TEST(Ssim, InvertedImageAndSmallInput) {
  const Image a = synth_scene(48, 48, 5);
  Image inv = a;
  for (float& v : inv.data()) v = 1.0f - v;
  EXPECT_LT(ssim(a, inv), 0.3);
  const Image r1 = test::random_image(32, 32, 1, 8), r2 = test::random_image(32, 32, 1, 9);
  EXPECT_NEAR(ssim(r1, r2), ssim_oracle(r1, r2), 1e-6);
  EXPECT_NEAR(psnr(r1, r2), psnr(r2, r1), 1e-12);
  EXPECT_EQ(test::error_code_of([] { (void)ssim(test::random_image(10, 40, 1, 1), test::random_image(10, 40, 1, 2)); }),
            Errc::invalid_argument);
}

class EvalDirs : public ::testing::Test {
 protected:
  void SetUp() override {
    for (const char* sub : {"clean", "same", "rainy"}) fs::create_directories(dir_.path() / sub);
    for (int i = 0; i < 3; ++i) {
      const std::string name = "img" + std::to_string(i) + ".png";
      const Image clean = synth_scene(96, 96, 40 + static_cast<std::uint64_t>(i));
      RainConfig rain;
      rain.seed = 7 + static_cast<std::uint64_t>(i);
      save_image(clean, dir_.path() / "clean" / name);
      save_image(clean, dir_.path() / "same" / name);
      save_image(synth_rain(clean, rain).rainy, dir_.path() / "rainy" / name);
    }
  }
  eval::EvalOptions options(const std::string& derained) const {
    eval::EvalOptions o;
    o.derained_dir = dir_.path() / derained;
    o.clean_dir = dir_.path() / "clean";
    return o;
  }
  test::TempDir dir_{"eval"};
};

TEST_F(EvalDirs, IdenticalDirectoriesRecoverEverything) {
  const auto result = eval::run_eval(options("same"));
  ASSERT_EQ(result.derained.rows.size(), 3u);
  for (const auto& r : result.derained.rows) {
    EXPECT_EQ(r.psnr_db, kPsnrCap);
    EXPECT_NEAR(r.ssim, 1.0, 1e-9);
    EXPECT_GT(r.sift_clean, 0);
    EXPECT_EQ(r.recovered, r.sift_clean);
    EXPECT_EQ(r.sift_derained, r.sift_clean);
    EXPECT_DOUBLE_EQ(r.gate_pass_rate, 1.0);
  }
  EXPECT_EQ(result.derained.rows[0].name, "img0.png");
  EXPECT_FALSE(result.rainy.has_value());
}

TEST_F(EvalDirs, RainyBaselineAndReportFiles) {
  auto o = options("rainy");
  o.rainy_dir = dir_.path() / "rainy";
  o.describe_dir = dir_.path() / "same";
  const auto result = eval::run_eval(o);
  ASSERT_TRUE(result.rainy.has_value());
  EXPECT_LT(result.rainy->mean.psnr_db, kPsnrCap);
  EXPECT_DOUBLE_EQ(result.rainy->mean.psnr_db, result.derained.mean.psnr_db);

  eval::write_report(result, o, dir_.path() / "out");
  for (const char* f : {"report.csv", "report.json", "rainy.csv"}) EXPECT_TRUE(fs::exists(dir_.path() / "out" / f));
  std::ifstream in(dir_.path() / "out" / "report.json");
  const auto doc = nlohmann::json::parse(in);
  EXPECT_EQ(doc.at("config").at("mode"), "hybrid");
  EXPECT_EQ(doc.at("derained").at("rows").size(), 3u);
  EXPECT_TRUE(doc.contains("rainy"));
  std::ifstream csv(dir_.path() / "out" / "report.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "name,psnr_db,ssim,sift_clean,sift_derained,recovered,gate_pass_rate");
}

TEST_F(EvalDirs, EmptyAndMismatchedDirectories) {
  fs::create_directories(dir_.path() / "empty");
  fs::create_directories(dir_.path() / "empty_clean");
  try {
    auto o = options("empty");
    o.clean_dir = dir_.path() / "empty_clean";
    (void)eval::run_eval(o);
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("0 pairs"), std::string::npos) << e.what();
  }
  fs::remove(dir_.path() / "same" / "img1.png");
  try {
    (void)eval::run_eval(options("same"));
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_argument);
    EXPECT_NE(std::string(e.what()).find("img1.png (missing from"), std::string::npos) << e.what();
  }
  EXPECT_EQ(test::error_code_of([&] { (void)eval::run_eval(options("missing")); }), Errc::missing_file);
}

TEST(Report, AggregatesAreRowMeans) {
  eval::MetricsReport rep;
  rep.rows = {{"a", 20.0, 0.5, 10, 12, 5, 0.5}, {"b", 30.0, 0.7, 20, 18, 8, 1.0}};
  eval::finalize(rep);
  EXPECT_DOUBLE_EQ(rep.mean.psnr_db, 25.0);
  EXPECT_DOUBLE_EQ(rep.mean.ssim, 0.6);
  EXPECT_DOUBLE_EQ(rep.mean_recovered, 6.5);
  EXPECT_DOUBLE_EQ(rep.mean_sift_clean, 15.0);
  EXPECT_EQ(rep.mean.recovered, 7);
  EXPECT_DOUBLE_EQ(rep.mean.gate_pass_rate, 0.75);
  EXPECT_EQ(rep.mean.name, "mean");
  EXPECT_EQ(rep.csv(),
            "name,psnr_db,ssim,sift_clean,sift_derained,recovered,gate_pass_rate\n"
            "a,20.000000,0.500000,10,12,5,0.500000\n"
            "b,30.000000,0.700000,20,18,8,1.000000\n");
  eval::MetricsReport empty;
  eval::finalize(empty);
  EXPECT_EQ(empty.mean.psnr_db, 0.0);
}

TEST(Derain, WritesBothNetworkDirectories) {
  test::TempDir dir("derain");
  fs::create_directories(dir.path() / "in");
  save_image(test::random_image(20, 24, 3, 1), dir.path() / "in" / "a.png");
  save_image(test::random_image(20, 24, 3, 2), dir.path() / "in" / "b.png");
  nets::NetConfig cfg;
  cfg.channels = 8;
  cfg.blocks = 1;
  const auto d = nets::make_model<float>(nets::NetKind::dprnet, cfg, 1);
  const auto g = nets::make_model<float>(nets::NetKind::ggirnet, cfg, 2);
  eval::derain_directory(&d, &g, dir.path() / "in", dir.path() / "out");
  for (const char* sub : {"dprnet", "ggirnet"})
    for (const char* f : {"a.png", "b.png"}) {
      const Image img = load_image(dir.path() / "out" / sub / f);
      EXPECT_EQ(img.height(), 20);
      EXPECT_EQ(img.width(), 24);
    }
  EXPECT_EQ(test::error_code_of([&] { eval::derain_directory(nullptr, nullptr, dir.path() / "in", dir.path()); }),
            Errc::invalid_argument);
}

TEST(Ablation, StackErrorsOracle) {
  const Image clean = synth_scene(32, 32, 1);
  const auto zero = ablation::stack_errors(clean, clean);
  for (double e : zero.gaussian) EXPECT_EQ(e, 0.0);
  for (double e : zero.dog) EXPECT_EQ(e, 0.0);
  // a constant shift survives every blur and cancels in every difference
  const auto shifted = ablation::stack_errors(offset(clean, 0.1f), clean);
  for (double e : shifted.gaussian) EXPECT_NEAR(e, 255.0 * 255.0 * 0.01, 1e-2);
  for (double e : shifted.dog) EXPECT_NEAR(e, 0.0, 1e-6);
  EXPECT_NEAR(shifted.gaussian_mean(), 650.25, 1e-2);
}

TEST(Ablation, VariantsAndTable) {
  nets::NetConfig cfg;
  cfg.channels = 8;
  cfg.blocks = 1;
  const auto d = nets::make_model<float>(nets::NetKind::dprnet, cfg, 1);
  const auto g = nets::make_model<float>(nets::NetKind::ggirnet, cfg, 2);
  PairDataset test;
  for (int i = 0; i < 2; ++i) {
    const Image clean = synth_scene(24, 24, 60 + static_cast<std::uint64_t>(i));
    test.pairs.push_back({"t", synth_rain(clean, RainConfig{}).rainy, clean});
  }
  const auto single = ablation::evaluate_variant({"one", &d, &d}, test);
  const auto hybrid = ablation::evaluate_variant({"two", &d, &g}, test);
  const auto only_g = ablation::evaluate_variant({"g", &g, &g}, test);
  for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(hybrid.dog[j], single.dog[j]);
  for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(hybrid.gaussian[j], only_g.gaussian[j]);
  EXPECT_EQ(test::error_code_of([&] { (void)ablation::evaluate_variant({"x", &d, nullptr}, test); }),
            Errc::invalid_argument);

  const auto t = ablation::compare(ablation::TableKind::dog, {{"one", &d, &d}, {"two", &d, &g}}, test);
  const std::string csv = t.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "level,one,two");
  EXPECT_NE(csv.find("\"DoG_{1.6000,2.2627}\""), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_DOUBLE_EQ(t.mean(0), single.dog_mean());
  const auto gt = ablation::compare(ablation::TableKind::gaussian, {{"one", &d, &d}}, test);
  EXPECT_NE(gt.csv().find("G_{6.4000}"), std::string::npos);
}

TEST(Render, CanvasHoldsBothImages) {
  const Image a = test::random_image(10, 12, 3, 1), b = test::random_image(14, 8, 1, 2);
  const Image canvas = render_matches(a, b, {}, {}, {});
  EXPECT_EQ(canvas.width(), 20);
  EXPECT_EQ(canvas.height(), 14);
  EXPECT_EQ(canvas.channels(), 3);
  EXPECT_EQ(canvas.at(3, 4, 1), a.at(3, 4, 1));
}

}  // namespace
}  // namespace idsr
