#include "idsr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "idsr/error.hpp"

namespace idsr {

namespace {
constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
}  // namespace

double psnr(const Image& a, const Image& b) {
  require(a.same_shape(b), Errc::dimension_mismatch, "psnr: images differ in shape");
  const double mse = mean_squared_error(a, b);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require(a.same_shape(b), Errc::dimension_mismatch, "ssim: images differ in shape");
  const Image x = luminance(a), y = luminance(b);
  const int h = x.height(), w = x.width();
  require(h >= kWindow && w >= kWindow, Errc::invalid_argument, "ssim: image smaller than the 11x11 window");

  std::array<double, kWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= total;

  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  // separable valid filtering of x, y, x^2, y^2, xy
  auto filter = [&](auto&& f) {
    std::vector<double> rows(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = 0.0;
        for (int k = 0; k < kWindow; ++k) s += g[static_cast<std::size_t>(k)] * f(r, c + k);
        rows[static_cast<std::size_t>(r) * ow + c] = s;
      }
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = 0.0;
        for (int k = 0; k < kWindow; ++k) s += g[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(r + k) * ow + c];
        out[static_cast<std::size_t>(r) * ow + c] = s;
      }
    return out;
  };
  auto px = [&](int r, int c) { return static_cast<double>(x.at(r, c)); };
  auto py = [&](int r, int c) { return static_cast<double>(y.at(r, c)); };
  const auto mx = filter(px);
  const auto my = filter(py);
  const auto sxx = filter([&](int r, int c) { return px(r, c) * px(r, c); });
  const auto syy = filter([&](int r, int c) { return py(r, c) * py(r, c); });
  const auto sxy = filter([&](int r, int c) { return px(r, c) * py(r, c); });

  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cxy = sxy[i] - mx[i] * my[i];
    acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

}  // namespace idsr
