#include <cmath>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "idsr/nets.hpp"
#include "test_util.hpp"

namespace idsr::nets {
namespace {

using test::gradcheck;
using test::project;
using test::random_tensor;
using TensorD = ad::Tensor<double>;

constexpr double kModuleTol = 1e-3;

std::vector<TensorD> with_params(const TensorD& x, ParamSet<double>& params) {
  std::vector<TensorD> all{x};
  for (auto& [name, t] : params) all.push_back(t);
  return all;
}

// Re-draw every parameter so biases are not all zero.
void randomize(ParamSet<double>& params, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (auto& [name, t] : params)
    for (double& v : t.data()) v = d(eng);
}

std::size_t conv_count(int cout, int cin, int k) {
  return static_cast<std::size_t>(cout) * cin * k * k + static_cast<std::size_t>(cout);
}

TEST(Model, ParameterLayout) {
  NetConfig cfg;
  cfg.channels = 16;
  cfg.blocks = 3;
  const auto dpr = make_model<float>(NetKind::dprnet, cfg, 1);
  const auto ggir = make_model<float>(NetKind::ggirnet, cfg, 1);
  cfg.use_gam = false;
  const auto plain = make_model<float>(NetKind::ggirnet, cfg, 1);

  const int c = 16, h = c / kCamReduction;
  const std::size_t outer = conv_count(c, 3, 3) + conv_count(3, c, 3);
  const std::size_t trunk = 2 * conv_count(c, c, 3) + conv_count(h, c, 1) + conv_count(c, h, 1);
  const std::size_t sam = conv_count(1, 2, kSamKernel);
  const std::size_t gam = 2 * conv_count(1, c, 1) + 4 * conv_count(1, 1, kGamKernel) + conv_count(1, 2, kGamKernel);
  EXPECT_EQ(dpr.params.parameter_count(), outer + 3 * (trunk + sam));
  EXPECT_EQ(ggir.params.parameter_count(), outer + 3 * (trunk + gam));
  EXPECT_EQ(plain.params.parameter_count(), outer + 3 * trunk);

  EXPECT_TRUE(dpr.params.contains("block2.sam.conv.w"));
  EXPECT_FALSE(dpr.params.contains("block0.gam.q1.w"));
  for (int q = 1; q <= 7; ++q) EXPECT_TRUE(ggir.params.contains("block1.gam.q" + std::to_string(q) + ".b"));
  EXPECT_FALSE(plain.params.contains("block0.gam.q7.w"));
  EXPECT_EQ(ggir.params.get("block0.gam.q2.w").shape(), (ad::Shape{1, 1, kGamKernel, kGamKernel}));
  EXPECT_EQ(ggir.params.get("block0.gam.q7.w").shape(), (ad::Shape{1, 2, kGamKernel, kGamKernel}));
  EXPECT_EQ(dpr.params.get("block0.sam.conv.w").shape(), (ad::Shape{1, 2, kSamKernel, kSamKernel}));
}

TEST(Model, SameSeedSameWeights) {
  const auto a = make_model<float>(NetKind::dprnet, NetConfig{}, 9);
  const auto b = make_model<float>(NetKind::dprnet, NetConfig{}, 9);
  const auto c = make_model<float>(NetKind::dprnet, NetConfig{}, 10);
  const auto& wa = a.params.get("block3.conv2.w");
  EXPECT_TRUE(std::equal(wa.data().begin(), wa.data().end(), b.params.get("block3.conv2.w").data().begin()));
  EXPECT_FALSE(std::equal(wa.data().begin(), wa.data().end(), c.params.get("block3.conv2.w").data().begin()));
}

TEST(Model, InvalidConfig) {
  NetConfig cfg;
  cfg.channels = 10;
  EXPECT_EQ(test::error_code_of([&] { (void)make_model<float>(NetKind::dprnet, cfg, 0); }), Errc::invalid_argument);
  cfg.channels = 16;
  cfg.blocks = 0;
  EXPECT_EQ(test::error_code_of([&] { (void)make_model<float>(NetKind::dprnet, cfg, 0); }), Errc::invalid_argument);
  EXPECT_EQ(test::error_code_of([] { (void)net_kind_from_string("unet"); }), Errc::invalid_argument);
  EXPECT_EQ(net_kind_from_string(to_string(NetKind::ggirnet)), NetKind::ggirnet);
}

TEST(Model, DerainedIsInputMinusRain) {
  for (NetKind kind : {NetKind::dprnet, NetKind::ggirnet}) {
    NetConfig cfg;
    cfg.channels = 8;
    cfg.blocks = 2;
    const auto m = make_model<double>(kind, cfg, 3);
    const auto x = random_tensor({2, 3, 9, 11}, 4, 0, 1, false);
    const auto out = forward(m, x);
    ASSERT_EQ(out.rain.shape(), x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i)
      EXPECT_DOUBLE_EQ(out.derained.data()[i], x.data()[i] - out.rain.data()[i]);
  }
  const auto m = make_model<double>(NetKind::dprnet, NetConfig{}, 3);
  EXPECT_EQ(test::error_code_of([&] { (void)forward(m, random_tensor({1, 1, 8, 8}, 1)); }), Errc::shape_mismatch);
}

TEST(Model, DerainRecordsNoHistory) {
  NetConfig cfg;
  cfg.channels = 8;
  cfg.blocks = 1;
  const auto m = make_model<float>(NetKind::ggirnet, cfg, 5);
  const Image rainy = test::random_image(12, 10, 3, 6);
  const auto [rain, derained] = derain_with_rain(m, rainy);
  for (std::size_t i = 0; i < rainy.size(); ++i)
    EXPECT_NEAR(derained.data()[i], rainy.data()[i] - rain.data()[i], 1e-6);
  EXPECT_TRUE(ad::grad_enabled());
  for (const auto& [name, t] : m.params)
    for (float g : t.grad()) ASSERT_EQ(g, 0.0f) << name;
  EXPECT_EQ(test::error_code_of([&] { (void)derain(m, test::random_image(8, 8, 1, 1)); }), Errc::invalid_argument);
}

TEST(Model, ImageTensorRoundTrip) {
  const Image a = test::random_image(5, 7, 3, 1), b = test::random_image(5, 7, 3, 2);
  const auto t = images_to_tensor<float>({a, b});
  ASSERT_EQ(t.shape(), (ad::Shape{2, 3, 5, 7}));
  EXPECT_EQ(t.at(1, 2, 4, 6), b.at(4, 6, 2));
  const Image back = tensor_to_image(t, 1);
  EXPECT_TRUE(std::equal(back.data().begin(), back.data().end(), b.data().begin()));
  EXPECT_EQ(test::error_code_of([&] { (void)images_to_tensor<float>({a, test::random_image(5, 6, 3, 1)}); }),
            Errc::dimension_mismatch);
}

TEST(Modules, CamMatchesDirectComputation) {
  Rng rng(1);
  ParamSet<double> p;
  add_cam_params(p, "cam", 8, rng);
  randomize(p, 2);
  const auto f = random_tensor({1, 8, 4, 5}, 3, -1, 1, false);
  const auto y = cam_forward(f, p, "cam");

  auto mlp = [&](const std::vector<double>& v) {
    std::vector<double> hidden(2), out(8);
    for (int i = 0; i < 2; ++i) {
      double s = p.get("cam.fc1.b").data()[i];
      for (int c = 0; c < 8; ++c) s += p.get("cam.fc1.w").at(i, c, 0, 0) * v[c];
      hidden[i] = std::max(0.0, s);
    }
    for (int c = 0; c < 8; ++c) {
      double s = p.get("cam.fc2.b").data()[c];
      for (int i = 0; i < 2; ++i) s += p.get("cam.fc2.w").at(c, i, 0, 0) * hidden[i];
      out[c] = s;
    }
    return out;
  };
  std::vector<double> avg(8, 0.0), mx(8, -1e9);
  for (int c = 0; c < 8; ++c)
    for (int yy = 0; yy < 4; ++yy)
      for (int x = 0; x < 5; ++x) {
        avg[c] += f.at(0, c, yy, x) / 20.0;
        mx[c] = std::max(mx[c], f.at(0, c, yy, x));
      }
  const auto ma = mlp(avg), mm = mlp(mx);
  for (int c = 0; c < 8; ++c) {
    const double s = 1.0 / (1.0 + std::exp(-(ma[c] + mm[c])));
    EXPECT_NEAR(y.at(0, c, 3, 2), f.at(0, c, 3, 2) * s, 1e-12);
  }
}

TEST(Modules, GamIgnoresConstantOffsetsAndStaysInUnitRange) {
  Rng rng(4);
  ParamSet<double> p;
  add_gam_params(p, "gam", 8, rng);
  randomize(p, 5);
  const auto f = random_tensor({2, 8, 7, 7}, 6, -1, 1, false);
  const auto shifted = ad::add(f, TensorD::full(f.shape(), 0.75));
  const auto a = gam_map(f, p, "gam");
  const auto b = gam_map(shifted, p, "gam");
  ASSERT_EQ(a.shape(), (ad::Shape{2, 1, 7, 7}));
  for (std::size_t i = 0; i < a.numel(); ++i) {
    EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
    EXPECT_GT(a.data()[i], 0.0);
    EXPECT_LT(a.data()[i], 1.0);
  }
}

TEST(Modules, Gradients) {
  Rng rng(7);
  ParamSet<double> cam, sam, gam;
  add_cam_params(cam, "m", 8, rng);
  add_sam_params(sam, "m", rng);
  add_gam_params(gam, "m", 8, rng);
  randomize(cam, 8);
  randomize(sam, 9);
  randomize(gam, 10);
  auto f = random_tensor({2, 8, 6, 6}, 11);
  EXPECT_LT(gradcheck(with_params(f, cam), [&] { return project(cam_forward(f, cam, "m")); }), kModuleTol);
  EXPECT_LT(gradcheck(with_params(f, sam), [&] { return project(sam_forward(f, sam, "m")); }), kModuleTol);
  EXPECT_LT(gradcheck(with_params(f, gam), [&] { return project(gam_forward(f, gam, "m")); }), kModuleTol);
}

TEST(Modules, BlockGradients) {
  for (NetKind kind : {NetKind::dprnet, NetKind::ggirnet}) {
    Rng rng(12);
    ParamSet<double> p;
    add_block_params(p, "b", 8, kind, true, rng);
    randomize(p, 13, 0.3);
    auto f = random_tensor({1, 8, 5, 5}, 14);
    auto fn = [&] {
      return project(kind == NetKind::dprnet ? csarb_forward(f, p, "b") : cgarb_forward(f, p, "b"));
    };
    EXPECT_LT(gradcheck(with_params(f, p), fn), kModuleTol) << to_string(kind);
  }
}

TEST(Modules, FullNetworkGradients) {
  NetConfig cfg;
  cfg.channels = 8;
  cfg.blocks = 1;
  auto m = make_model<double>(NetKind::ggirnet, cfg, 15);
  randomize(m.params, 16, 0.3);
  auto x = random_tensor({1, 3, 5, 5}, 17, 0, 1);
  EXPECT_LT(gradcheck(with_params(x, m.params), [&] { return project(forward(m, x).derained); }), kModuleTol);
}

}  // namespace
}  // namespace idsr::nets
