#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "idsr/dataset.hpp"
#include "idsr/image_io.hpp"
#include "idsr/rain.hpp"
#include "test_util.hpp"

namespace idsr {
namespace {

using test::error_code_of;
using test::random_image;
using test::TempDir;

TEST(Image, LayoutIsInterleaved) {
  Image img(2, 3, 3, 0.0f);
  img.at(1, 2, 1) = 0.5f;
  EXPECT_EQ(img.data()[(1 * 3 + 2) * 3 + 1], 0.5f);
  EXPECT_EQ(img.size(), 18u);
  EXPECT_EQ(img.pixel_count(), 6u);
}

TEST(Image, CropAndChannel) {
  const Image img = random_image(6, 7, 3, 1);
  const Image c = img.crop(2, 3, 3, 4);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x)
      for (int k = 0; k < 3; ++k) EXPECT_EQ(c.at(y, x, k), img.at(y + 2, x + 3, k));
  EXPECT_EQ(error_code_of([&] { (void)img.crop(4, 0, 3, 1); }), Errc::invalid_argument);
  const Image g = img.channel(2);
  EXPECT_EQ(g.channels(), 1);
  EXPECT_EQ(g.at(5, 6), img.at(5, 6, 2));
}

TEST(Image, LuminanceWeights) {
  Image px(1, 3, 3, 0.0f);
  px.at(0, 0, 0) = 1.0f;
  px.at(0, 1, 1) = 1.0f;
  px.at(0, 2, 2) = 1.0f;
  const Image y = luminance(px);
  EXPECT_FLOAT_EQ(y.at(0, 0), 0.299f);
  EXPECT_FLOAT_EQ(y.at(0, 1), 0.587f);
  EXPECT_FLOAT_EQ(y.at(0, 2), 0.114f);
  const Image gray = random_image(3, 3, 1, 2);
  EXPECT_EQ(luminance(gray), gray);
}

TEST(Image, ArithmeticAndClamp) {
  const Image a = random_image(4, 4, 3, 3, -0.5f, 1.5f);
  const Image b = random_image(4, 4, 3, 4);
  EXPECT_LT(max_abs_difference(subtract(add(a, b), b), a), 1e-6);
  const Image c = clamp01(a);
  for (float v : c.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_EQ(error_code_of([&] { (void)add(a, random_image(4, 5, 3, 5)); }), Errc::dimension_mismatch);
  EXPECT_DOUBLE_EQ(mean_squared_error(a, a), 0.0);
}

TEST(ImageIo, PngRoundTripIsExactOnQuantizedValues) {
  TempDir dir("io");
  for (int channels : {1, 3}) {
    Image img(5, 9, channels);
    int k = 0;
    for (float& v : img.data()) v = static_cast<float>((k++ * 37) % 256) / 255.0f;
    const auto path = dir.path() / ("img" + std::to_string(channels) + ".png");
    save_image(img, path);
    const Image back = load_image(path);
    ASSERT_TRUE(back.same_shape(img));
    EXPECT_LT(max_abs_difference(back, img), 1e-7);
  }
}

TEST(ImageIo, QuantizeRoundsAndClamps) {
  EXPECT_EQ(quantize_sample(-0.2f), 0);
  EXPECT_EQ(quantize_sample(1.7f), 255);
  EXPECT_EQ(quantize_sample(0.5f), 128);
  EXPECT_EQ(quantize_sample(10.0f / 255.0f), 10);
}

TEST(ImageIo, Errors) {
  TempDir dir("ioerr");
  EXPECT_EQ(error_code_of([&] { (void)load_image(dir.path() / "absent.png"); }), Errc::missing_file);
  std::ofstream(dir.path() / "junk.png") << "not a png";
  EXPECT_NE(error_code_of([&] { (void)load_image(dir.path() / "junk.png"); }), Errc::missing_file);
}

TEST(Rain, ZeroStreaksLeavesImageUntouched) {
  const Image clean = random_image(32, 40, 3, 7);
  RainConfig cfg;
  cfg.streak_count = 0;
  const auto pair = synth_rain(clean, cfg);
  EXPECT_EQ(pair.rainy, clean);
  for (float v : pair.rain_layer.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Rain, AdditiveNonNegativeAndDeterministic) {
  const Image clean = synth_scene(48, 48, 3);
  RainConfig cfg;
  cfg.seed = 11;
  const auto a = synth_rain(clean, cfg);
  const auto b = synth_rain(clean, cfg);
  EXPECT_EQ(a.rainy, b.rainy);
  cfg.seed = 12;
  EXPECT_NE(synth_rain(clean, cfg).rainy, a.rainy);
  double energy = 0.0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) {
      const float r = a.rain_layer.at(y, x, 0);
      EXPECT_GE(r, 0.0f);
      energy += r;
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(a.rain_layer.at(y, x, c), r);
        EXPECT_NEAR(a.rainy.at(y, x, c), std::min(1.0f, clean.at(y, x, c) + r), 1e-6f);
      }
    }
  EXPECT_GT(energy, 1.0);
}

TEST(Rain, InvalidConfigRejected) {
  RainConfig cfg;
  cfg.intensity = {0.5, 1.5};
  EXPECT_EQ(error_code_of([&] { cfg.validate(); }), Errc::invalid_argument);
  cfg = RainConfig{};
  cfg.streak_count = -1;
  EXPECT_EQ(error_code_of([&] { cfg.validate(); }), Errc::invalid_argument);
}

TEST(Rain, SceneIsDeterministicAndInRange) {
  const Image a = synth_scene(40, 50, 9);
  EXPECT_EQ(a, synth_scene(40, 50, 9));
  EXPECT_NE(a, synth_scene(40, 50, 10));
  for (float v : a.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

class DatasetDir : public ::testing::Test {
 protected:
  void SetUp() override {
    std::filesystem::create_directories(dir.path() / "rainy");
    std::filesystem::create_directories(dir.path() / "clean");
    for (int i = 0; i < 3; ++i) {
      const std::string name = "p" + std::to_string(i) + ".png";
      save_image(random_image(20, 24, 3, 100 + i), dir.path() / "rainy" / name);
      save_image(random_image(20, 24, 3, 200 + i), dir.path() / "clean" / name);
    }
  }
  TempDir dir{"ds"};
};

TEST_F(DatasetDir, LoadsSortedPairs) {
  const auto ds = load_pair_dataset(dir.path(), 16);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.pairs[0].name, "p0.png");
  EXPECT_EQ(ds.pairs[2].name, "p2.png");
}

TEST_F(DatasetDir, MismatchedNamesAreReported) {
  save_image(random_image(20, 24, 3, 1), dir.path() / "rainy" / "extra.png");
  try {
    (void)list_pair_names(dir.path() / "rainy", dir.path() / "clean");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("extra.png"), std::string::npos);
  }
}

TEST_F(DatasetDir, PatchLargerThanImageRejected) {
  EXPECT_EQ(error_code_of([&] { (void)load_pair_dataset(dir.path(), 21); }), Errc::invalid_argument);
}

TEST_F(DatasetDir, PatchesAreAlignedCrops) {
  const auto ds = load_pair_dataset(dir.path(), 8);
  Rng rng(5);
  std::set<std::size_t> seen;
  for (int round = 0; round < 20; ++round)
    for (const auto& p : sample_patches(ds, 4, rng)) {
      seen.insert(p.pair_index);
      const auto& src = ds.pairs[p.pair_index];
      ASSERT_GE(p.top, 0);
      ASSERT_LE(p.top + 8, 20);
      ASSERT_LE(p.left + 8, 24);
      EXPECT_EQ(p.rainy, src.rainy.crop(p.top, p.left, 8, 8));
      EXPECT_EQ(p.clean, src.clean.crop(p.top, p.left, 8, 8));
    }
  EXPECT_EQ(seen.size(), 3u);
  Rng r1(9), r2(9);
  const auto a = sample_patches(ds, 6, r1);
  const auto b = sample_patches(ds, 6, r2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pair_index, b[i].pair_index);
    EXPECT_EQ(a[i].top, b[i].top);
    EXPECT_EQ(a[i].left, b[i].left);
  }
}

TEST(Rng, StateRoundTrip) {
  Rng a(42);
  (void)a.next_u64();
  Rng b;
  b.set_state(a.state());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  for (int i = 0; i < 1000; ++i) {
    const int v = a.uniform_int(-3, 4);
    EXPECT_GE(v, -3);
    EXPECT_LE(v, 4);
  }
}

}  // namespace
}  // namespace idsr
