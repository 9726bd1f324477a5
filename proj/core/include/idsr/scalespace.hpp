#pragma once

#include <array>
#include <vector>

#include "idsr/image.hpp"

namespace idsr::scalespace {

/// The five Gaussian scales of the stack; successive ratios are sqrt(2).
inline constexpr std::array<double, 5> kStackScales = {1.6000, 2.2627, 3.2000, 4.5255, 6.4000};

/// Square (2r+1)^2 kernel, row-major, applied as a cross-correlation.
struct Kernel2D {
  int radius = 0;
  std::vector<double> values;

  int size() const noexcept { return 2 * radius + 1; }
  double at(int dy, int dx) const {
    return values[static_cast<std::size_t>((dy + radius) * size() + (dx + radius))];
  }
  double sum() const;
};

/// ceil(3 sigma)
int gaussian_radius(double sigma);

/// Normalized 1-D Gaussian taps on [-r, r], r = ceil(3 sigma).
std::vector<double> gaussian_kernel_1d(double sigma);

/// Outer product of the normalized 1-D taps, so it sums to 1 and the dense
/// and separable paths agree.
Kernel2D gaussian_kernel(double sigma);

/// Separable Gaussian blur with replicate borders; channels are blurred
/// independently.
Image gaussian_blur(const Image& img, double sigma);

/// Dense cross-correlation with replicate borders (double accumulation).
Image correlate(const Image& img, const Kernel2D& kernel);
std::vector<double> correlate_to_double(const Image& gray, const Kernel2D& kernel);

/// 1-D correlation along rows (horizontal) or columns (vertical) with
/// replicate borders. Taps are centered: out[i] = sum_t k[t] * in[i + t - r].
Image filter_rows(const Image& img, const std::vector<double>& taps);
Image filter_cols(const Image& img, const std::vector<double>& taps);

struct ScaleStack {
  std::array<double, 5> scales{};
  std::array<Image, 5> levels;
};

struct DoGStack {
  std::array<Image, 4> diffs;
  std::array<std::pair<double, double>, 4> scale_pairs{};
};

/// Every level is blurred directly from the base image.
ScaleStack build_scale_stack(const Image& gray,
                             const std::array<double, 5>& scales = kStackScales);

/// diffs[j] = levels[j + 1] - levels[j]
DoGStack build_dog(const ScaleStack& stack);

struct GradientField {
  Image gx;
  Image gy;
  Image magnitude;
  Image orientation;  ///< radians in [0, 2 pi)
};

/// gx[u,v] = I[u,v+1] - I[u,v], gy[u,v] = I[u+1,v] - I[u,v]; the last
/// column of gx and the last row of gy are zero.
GradientField forward_diff_gradients(const Image& gray);

/// 3x3 Sobel with replicate borders.
/// gx kernel [-1 0 1; -2 0 2; -1 0 1], gy is its transpose.
GradientField sobel_gradients(const Image& gray);

inline constexpr std::array<double, 9> kSobelX = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
inline constexpr std::array<double, 9> kSobelY = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

}  // namespace idsr::scalespace
