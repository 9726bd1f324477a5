#include "idsr/rain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "idsr/error.hpp"
#include "idsr/rng.hpp"
#include "idsr/scalespace.hpp"

namespace idsr {

namespace {

void require_range(const Range& r, const char* name) {
  require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi, Errc::invalid_argument,
          std::string("RainConfig: empty range for ") + name);
}

double distance_to_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

void RainConfig::validate() const {
  require(streak_count >= 0, Errc::invalid_argument, "RainConfig: negative streak count");
  require_range(length_px, "length_px");
  require_range(width_px, "width_px");
  require_range(intensity, "intensity");
  require(length_px.lo > 0.0 && width_px.lo > 0.0, Errc::invalid_argument,
          "RainConfig: streak length and width must be positive");
  require(intensity.lo >= 0.0 && intensity.hi <= 1.0, Errc::invalid_argument,
          "RainConfig: intensity range must lie in [0, 1]");
  require(blur_sigma >= 0.0 && std::isfinite(angle_deg) && angle_jitter_deg >= 0.0,
          Errc::invalid_argument, "RainConfig: invalid blur or angle");
}

RainPair synth_rain(const Image& clean, const RainConfig& cfg) {
  cfg.validate();
  require(!clean.empty(), Errc::invalid_argument, "synth_rain needs a non-empty image");
  const int h = clean.height(), w = clean.width();
  Image layer(h, w, 1);
  Rng rng(cfg.seed);

  for (int s = 0; s < cfg.streak_count; ++s) {
    // centers range past the border so streaks enter from outside
    const double cx = rng.uniform(-0.1 * w, 1.1 * w);
    const double cy = rng.uniform(-0.1 * h, 1.1 * h);
    const double angle = (cfg.angle_deg + cfg.angle_jitter_deg * rng.uniform(-1.0, 1.0)) *
                         std::numbers::pi / 180.0;
    const double length = rng.uniform(cfg.length_px.lo, cfg.length_px.hi);
    const double width = rng.uniform(cfg.width_px.lo, cfg.width_px.hi);
    const double strength = rng.uniform(cfg.intensity.lo, cfg.intensity.hi);

    const double hx = 0.5 * length * std::sin(angle), hy = 0.5 * length * std::cos(angle);
    const double ax = cx - hx, ay = cy - hy, bx = cx + hx, by = cy + hy;
    const double pad = 0.5 * width + 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - pad)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(ax, bx) + pad)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - pad)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(ay, by) + pad)));

    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double d = distance_to_segment(x, y, ax, ay, bx, by);
        const double coverage = std::clamp(0.5 * width + 0.5 - d, 0.0, 1.0);
        if (coverage <= 0.0) continue;
        float& v = layer.at(y, x);
        v = std::max(v, static_cast<float>(strength * coverage));
      }
  }
  if (cfg.blur_sigma > 0.0 && cfg.streak_count > 0)
    layer = scalespace::gaussian_blur(layer, cfg.blur_sigma);

  RainPair out;
  out.rain_layer = clean.channels() == 3 ? gray_to_rgb(layer) : layer;
  out.rainy = clean;
  auto dst = out.rainy.data();
  auto src = out.rain_layer.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(dst[i] + src[i], 0.0f, 1.0f);
  return out;
}

Image synth_scene(int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  Image img(height, width, 3);

  // smooth two-color background gradient
  double base[2][3];
  for (auto& color : base)
    for (double& v : color) v = rng.uniform(0.15, 0.6);
  const double gdir = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double gx = std::cos(gdir), gy = std::sin(gdir);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double t = 0.5 + 0.5 * ((x / double(width) - 0.5) * gx + (y / double(height) - 0.5) * gy);
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>((1.0 - t) * base[0][c] + t * base[1][c]);
    }

  const double area = static_cast<double>(height) * width;
  const int shapes = 10 + static_cast<int>(area / 400.0);
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(rng.below(3));
    const double cx = rng.uniform(0.0, width), cy = rng.uniform(0.0, height);
    // mostly small shapes; they carry the fine-scale keypoints
    const double u01 = rng.uniform();
    const double size = 2.0 + u01 * u01 * std::max(2.0, 0.12 * std::min(height, width) - 2.0);
    const double aspect = rng.uniform(0.5, 1.6);
    const double rot = rng.uniform(0.0, std::numbers::pi);
    double color[3];
    for (double& v : color) v = rng.uniform(0.0, 1.0);
    const double cr = std::cos(rot), sr = std::sin(rot);
    const int reach = static_cast<int>(std::ceil(size * 2.5 * std::max(1.0, aspect))) + 2;
    for (int y = std::max(0, int(cy) - reach); y < std::min(height, int(cy) + reach); ++y)
      for (int x = std::max(0, int(cx) - reach); x < std::min(width, int(cx) + reach); ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * cr + dy * sr) / size;
        const double v = (-dx * sr + dy * cr) / (size * aspect);
        double alpha = 0.0;
        if (kind == 0) {  // ellipse
          alpha = 1.0 - smoothstep(0.85, 1.15, std::sqrt(u * u + v * v));
        } else if (kind == 1) {  // rectangle
          alpha = (1.0 - smoothstep(0.9, 1.1, std::abs(u))) * (1.0 - smoothstep(0.9, 1.1, std::abs(v)));
        } else {  // gaussian blob
          alpha = std::exp(-0.5 * (u * u + v * v));
        }
        if (alpha <= 1e-4) continue;
        for (int c = 0; c < 3; ++c) {
          float& p = img.at(y, x, c);
          p = static_cast<float>((1.0 - alpha) * p + alpha * color[c]);
        }
      }
  }

  // mild texture so flat regions are not perfectly flat
  for (float& v : img.data()) v = std::clamp(v + static_cast<float>(0.01 * rng.normal()), 0.0f, 1.0f);
  return scalespace::gaussian_blur(img, 0.6);
}

}  // namespace idsr
