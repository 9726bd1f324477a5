#pragma once

#include <cstdint>

#include "idsr/image.hpp"

namespace idsr {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Additive rain streak generator parameters. Angles are degrees from the
/// vertical axis; lengths and widths are pixels.
struct RainConfig {
  int streak_count = 400;
  double angle_deg = 10.0;
  double angle_jitter_deg = 6.0;
  Range length_px{8.0, 22.0};
  Range width_px{1.0, 1.8};
  Range intensity{0.25, 0.55};
  double blur_sigma = 0.6;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RainPair {
  Image rainy;
  Image rain_layer;
};

/// rainy = clamp(clean + rain_layer); the layer is non-negative and carries
/// the same value in every channel. Identical seeds give identical output.
RainPair synth_rain(const Image& clean, const RainConfig& cfg);

/// Procedural RGB "clean" scene (smooth background, soft-edged shapes and
/// blobs) used when no real clean images are supplied.
Image synth_scene(int height, int width, std::uint64_t seed);

}  // namespace idsr
