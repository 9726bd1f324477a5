#include <cmath>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "idsr/losses.hpp"
#include "idsr/nets.hpp"
#include "test_util.hpp"

namespace idsr::training {
namespace {

using test::gradcheck;
using test::random_tensor;
using TensorD = ad::Tensor<double>;

constexpr double kIdentityTol = 1e-9;
constexpr double kOracleTol = 1e-6;

Image to_image(const TensorD& t, int n, int c) {
  Image img(t.shape().h, t.shape().w, 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.at(y, x) = static_cast<float>(t.at(n, c, y, x));
  return img;
}

// Float-representable values so the image-domain path sees the same input.
TensorD float_tensor(ad::Shape s, std::uint64_t seed) {
  auto t = random_tensor(s, seed, 0, 1, false);
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  return t;
}

TEST(Luminance, MatchesImageLuminance) {
  const Image rgb = test::random_image(6, 5, 3, 1);
  const auto t = luminance(nets::images_to_tensor<double>({rgb}));
  const Image gray = idsr::luminance(rgb);
  ASSERT_EQ(t.shape(), (ad::Shape{1, 1, 6, 5}));
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x) EXPECT_NEAR(t.at(0, 0, y, x), gray.at(y, x), 1e-6);
  const auto g = random_tensor({1, 1, 3, 3}, 2);
  EXPECT_EQ(luminance(g).node(), g.node());
}

TEST(EtaStack, MatchesImageEtaField) {
  const auto& basis = alp::default_basis();
  const auto x = float_tensor({1, 1, 24, 20}, 3);
  const auto eta = eta_stack(x, basis, true);
  const auto field = alp::eta_field(to_image(x, 0, 0), basis);
  ASSERT_EQ(eta.shape(), (ad::Shape{1, 4, 24, 20}));
  double worst = 0.0;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 24 * 20; ++i)
      worst = std::max(worst, std::abs(eta.data()[static_cast<std::size_t>(j) * 480 + i] - field.eta[j][i]));
  EXPECT_LT(worst, kOracleTol);
  EXPECT_EQ(eta_stack(x, basis).shape().c, 3);
}

TEST(AlpLoss, IdentitiesAndImageOracle) {
  const auto& basis = alp::default_basis();
  const auto a = float_tensor({2, 1, 20, 18}, 4);
  const auto b = float_tensor({2, 1, 20, 18}, 5);
  EXPECT_LT(alp_loss_diff(a, a, basis).item(), kIdentityTol);
  // LoG kernels are zero-mean, so a constant offset is invisible
  const auto offset = ad::add(a, TensorD::full(a.shape(), 0.3));
  EXPECT_LT(alp_loss_diff(a, offset, basis).item(), kIdentityTol);
  EXPECT_NEAR(alp_loss_diff(a, b, basis).item(), alp_loss_diff(b, a, basis).item(), kIdentityTol);

  for (bool eta0 : {false, true}) {
    double oracle = 0.0;
    for (int n = 0; n < 2; ++n) oracle += alp::alp_loss(to_image(a, n, 0), to_image(b, n, 0), basis, eta0) / 2.0;
    EXPECT_NEAR(alp_loss_diff(a, b, basis, eta0).item(), oracle, kOracleTol * std::max(1.0, oracle));
  }
}

TEST(AlpLoss, ChannelsAreSeparateImages) {
  const auto& basis = alp::default_basis();
  const auto a = float_tensor({1, 3, 16, 16}, 6);
  const auto b = float_tensor({1, 3, 16, 16}, 7);
  double oracle = 0.0;
  for (int c = 0; c < 3; ++c) oracle += alp::alp_loss(to_image(a, 0, c), to_image(b, 0, c), basis) / 3.0;
  EXPECT_NEAR(alp_loss_diff(a, b, basis).item(), oracle, kOracleTol * std::max(1.0, oracle));
}

TEST(GradLoss, IdentitiesAndImageOracle) {
  const auto a = float_tensor({2, 1, 22, 19}, 8);
  const auto b = float_tensor({2, 1, 22, 19}, 9);
  EXPECT_LT(grad_loss_diff(a, a).item(), kIdentityTol);
  EXPECT_LT(grad_loss_diff(a, ad::add(a, TensorD::full(a.shape(), -0.2))).item(), kIdentityTol);
  double oracle = 0.0;
  for (int n = 0; n < 2; ++n) oracle += grad_loss(to_image(a, n, 0), to_image(b, n, 0)) / 2.0;
  EXPECT_NEAR(grad_loss_diff(a, b).item(), oracle, kOracleTol * std::max(1.0, oracle));
  // coarser blur flattens noise, so repeating the finest scale costs more
  const std::array<double, 5> finest{1.6, 1.6, 1.6, 1.6, 1.6};
  EXPECT_GT(grad_loss_diff(a, b, finest).item(), grad_loss_diff(a, b).item());
}

TEST(GradLoss, ImageReferenceRejectsColour) {
  EXPECT_EQ(test::error_code_of([] { (void)grad_loss(test::random_image(4, 4, 3, 1), test::random_image(4, 4, 3, 2)); }),
            Errc::dimension_mismatch);
}

TEST(Losses, Gradients) {
  const auto& basis = alp::default_basis();
  auto clean = random_tensor({1, 1, 10, 9}, 10, 0, 1, false);
  auto derained = random_tensor({1, 1, 10, 9}, 11, 0, 1);
  // both losses are piecewise linear, so a small step only has to avoid the kinks
  constexpr double h = 1e-6;
  EXPECT_LT(gradcheck({derained}, [&] { return alp_loss_diff(clean, derained, basis); }, h), 1e-3);
  EXPECT_LT(gradcheck({derained}, [&] { return grad_loss_diff(clean, derained); }, h), 1e-3);
  auto rgb = random_tensor({1, 3, 6, 6}, 12, 0, 1);
  EXPECT_LT(gradcheck({rgb}, [&] { return test::project(luminance(rgb)); }), 1e-4);
}

TEST(Losses, ShapeMismatch) {
  const auto& basis = alp::default_basis();
  const auto a = random_tensor({1, 1, 8, 8}, 1), b = random_tensor({1, 1, 8, 9}, 2);
  EXPECT_EQ(test::error_code_of([&] { (void)alp_loss_diff(a, b, basis); }), Errc::shape_mismatch);
  EXPECT_EQ(test::error_code_of([&] { (void)grad_loss_diff(a, b); }), Errc::shape_mismatch);
  EXPECT_EQ(test::error_code_of([&] { (void)eta_stack(random_tensor({1, 2, 8, 8}, 3), basis); }),
            Errc::shape_mismatch);
}

}  // namespace
}  // namespace idsr::training
