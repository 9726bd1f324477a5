#include "idsr/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace idsr {

namespace {

using Color = std::array<float, 3>;

constexpr Color kInlier = {0.1f, 0.9f, 0.2f};
constexpr Color kOutlier = {0.95f, 0.15f, 0.1f};
constexpr Color kMarker = {1.0f, 0.85f, 0.0f};

void plot(Image& img, int y, int x, const Color& c) {
  if (y < 0 || x < 0 || y >= img.height() || x >= img.width()) return;
  for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[static_cast<std::size_t>(k)];
}

void line(Image& img, double x0, double y0, double x1, double y1, const Color& c) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    plot(img, static_cast<int>(std::lround(y0 + t * (y1 - y0))), static_cast<int>(std::lround(x0 + t * (x1 - x0))), c);
  }
}

void circle(Image& img, double cx, double cy, double r, const Color& c) {
  const int n = std::max(8, static_cast<int>(2.0 * 3.14159265 * r));
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * 3.14159265358979 * i / n;
    plot(img, static_cast<int>(std::lround(cy + r * std::sin(a))), static_cast<int>(std::lround(cx + r * std::cos(a))), c);
  }
}

}  // namespace

Image render_matches(const Image& a, const Image& b, const std::vector<sift::Keypoint>& kps_a,
                     const std::vector<sift::Keypoint>& kps_b, const sift::MatchSet& matches, bool show_outliers) {
  const Image ra = a.channels() == 3 ? a : gray_to_rgb(a);
  const Image rb = b.channels() == 3 ? b : gray_to_rgb(b);
  const int h = std::max(ra.height(), rb.height());
  Image canvas(h, ra.width() + rb.width(), 3);
  for (int y = 0; y < ra.height(); ++y)
    for (int x = 0; x < ra.width(); ++x)
      for (int c = 0; c < 3; ++c) canvas.at(y, x, c) = std::clamp(ra.at(y, x, c), 0.0f, 1.0f);
  for (int y = 0; y < rb.height(); ++y)
    for (int x = 0; x < rb.width(); ++x)
      for (int c = 0; c < 3; ++c) canvas.at(y, ra.width() + x, c) = std::clamp(rb.at(y, x, c), 0.0f, 1.0f);

  const double off = ra.width();
  for (const auto& k : kps_a) circle(canvas, k.x, k.y, k.scale, kMarker);
  for (const auto& k : kps_b) circle(canvas, off + k.x, k.y, k.scale, kMarker);
  for (std::size_t i = 0; i < matches.matches.size(); ++i) {
    const bool inlier = i < matches.inlier_mask.size() && matches.inlier_mask[i];
    if (!inlier && !show_outliers) continue;
    const auto& m = matches.matches[i];
    const auto& p = kps_a.at(static_cast<std::size_t>(m.index_a));
    const auto& q = kps_b.at(static_cast<std::size_t>(m.index_b));
    line(canvas, p.x, p.y, off + q.x, q.y, inlier ? kInlier : kOutlier);
  }
  return canvas;
}

}  // namespace idsr
