#include "idsr/scalespace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "idsr/error.hpp"

namespace idsr::scalespace {

namespace {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

void require_sigma(double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), Errc::invalid_argument,
          "Gaussian sigma must be positive, got " + std::to_string(sigma));
}

void require_gray(const Image& img, const char* what) {
  require(img.channels() == 1, Errc::invalid_argument,
          std::string(what) + " expects a grayscale image");
}

GradientField finish_field(Image gx, Image gy) {
  GradientField field;
  field.magnitude = Image(gx.height(), gx.width(), 1);
  field.orientation = Image(gx.height(), gx.width(), 1);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  auto dx = gx.data();
  auto dy = gy.data();
  auto mag = field.magnitude.data();
  auto ori = field.orientation.data();
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double x = dx[i], y = dy[i];
    mag[i] = static_cast<float>(std::sqrt(x * x + y * y));
    double theta = std::atan2(y, x);
    if (theta < 0.0) theta += kTwoPi;
    float stored = static_cast<float>(theta);
    // float rounding can land exactly on 2 pi
    if (stored >= static_cast<float>(kTwoPi)) stored = 0.0f;
    ori[i] = stored;
  }
  field.gx = std::move(gx);
  field.gy = std::move(gy);
  return field;
}

}  // namespace

double Kernel2D::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

int gaussian_radius(double sigma) {
  require_sigma(sigma);
  return static_cast<int>(std::ceil(3.0 * sigma - 1e-12));
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  const int r = gaussian_radius(sigma);
  std::vector<double> taps(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + r)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

Kernel2D gaussian_kernel(double sigma) {
  const std::vector<double> taps = gaussian_kernel_1d(sigma);
  Kernel2D k;
  k.radius = static_cast<int>(taps.size() / 2);
  k.values.resize(taps.size() * taps.size());
  for (std::size_t i = 0; i < taps.size(); ++i)
    for (std::size_t j = 0; j < taps.size(); ++j) k.values[i * taps.size() + j] = taps[i] * taps[j];
  return k;
}

Image filter_rows(const Image& img, const std::vector<double>& taps) {
  require(taps.size() % 2 == 1, Errc::invalid_argument, "filter taps must have odd length");
  const int r = static_cast<int>(taps.size() / 2);
  const int h = img.height(), w = img.width(), ch = img.channels();
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          acc += taps[static_cast<std::size_t>(t + r)] * img.at(y, clamp_index(x + t, w), c);
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

Image filter_cols(const Image& img, const std::vector<double>& taps) {
  require(taps.size() % 2 == 1, Errc::invalid_argument, "filter taps must have odd length");
  const int r = static_cast<int>(taps.size() / 2);
  const int h = img.height(), w = img.width(), ch = img.channels();
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          acc += taps[static_cast<std::size_t>(t + r)] * img.at(clamp_index(y + t, h), x, c);
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  const std::vector<double> taps = gaussian_kernel_1d(sigma);
  return filter_cols(filter_rows(img, taps), taps);
}

std::vector<double> correlate_to_double(const Image& gray, const Kernel2D& kernel) {
  require_gray(gray, "correlate");
  const int h = gray.height(), w = gray.width(), r = kernel.radius, size = kernel.size();
  std::vector<double> out(gray.pixel_count());
  std::vector<float> row(static_cast<std::size_t>(w + 2 * r));
  // accumulate kernel row by kernel row over a replicate-padded source row
  for (int y = 0; y < h; ++y) {
    double* dst = &out[static_cast<std::size_t>(y) * w];
    for (int dy = -r; dy <= r; ++dy) {
      const int sy = clamp_index(y + dy, h);
      for (int i = 0; i < w + 2 * r; ++i) row[i] = gray.at(sy, clamp_index(i - r, w));
      const double* krow = &kernel.values[static_cast<std::size_t>((dy + r) * size)];
      for (int x = 0; x < w; ++x) {
        const float* src = &row[static_cast<std::size_t>(x)];
        double acc = 0.0;
        for (int t = 0; t < size; ++t) acc += krow[t] * src[t];
        dst[x] += acc;
      }
    }
  }
  return out;
}

Image correlate(const Image& img, const Kernel2D& kernel) {
  if (img.channels() == 1) {
    const std::vector<double> acc = correlate_to_double(img, kernel);
    Image out(img.height(), img.width(), 1);
    std::transform(acc.begin(), acc.end(), out.data().begin(),
                   [](double v) { return static_cast<float>(v); });
    return out;
  }
  Image out(img.height(), img.width(), img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    const Image plane = correlate(img.channel(c), kernel);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out.at(y, x, c) = plane.at(y, x);
  }
  return out;
}

ScaleStack build_scale_stack(const Image& gray, const std::array<double, 5>& scales) {
  require_gray(gray, "build_scale_stack");
  for (std::size_t j = 1; j < scales.size(); ++j)
    require(scales[j] > scales[j - 1], Errc::invalid_argument, "stack scales must increase");
  ScaleStack stack;
  stack.scales = scales;
  for (std::size_t j = 0; j < scales.size(); ++j) stack.levels[j] = gaussian_blur(gray, scales[j]);
  return stack;
}

DoGStack build_dog(const ScaleStack& stack) {
  DoGStack dog;
  for (std::size_t j = 0; j < dog.diffs.size(); ++j) {
    dog.diffs[j] = subtract(stack.levels[j + 1], stack.levels[j]);
    dog.scale_pairs[j] = {stack.scales[j], stack.scales[j + 1]};
  }
  return dog;
}

GradientField forward_diff_gradients(const Image& gray) {
  require_gray(gray, "forward_diff_gradients");
  const int h = gray.height(), w = gray.width();
  Image gx(h, w, 1), gy(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      gx.at(y, x) = x + 1 < w ? gray.at(y, x + 1) - gray.at(y, x) : 0.0f;
      gy.at(y, x) = y + 1 < h ? gray.at(y + 1, x) - gray.at(y, x) : 0.0f;
    }
  return finish_field(std::move(gx), std::move(gy));
}

GradientField sobel_gradients(const Image& gray) {
  require_gray(gray, "sobel_gradients");
  const int h = gray.height(), w = gray.width();
  Image gx(h, w, 1), gy(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sx = 0.0, sy = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double v = gray.at(clamp_index(y + dy, h), clamp_index(x + dx, w));
          const std::size_t k = static_cast<std::size_t>((dy + 1) * 3 + (dx + 1));
          sx += kSobelX[k] * v;
          sy += kSobelY[k] * v;
        }
      gx.at(y, x) = static_cast<float>(sx);
      gy.at(y, x) = static_cast<float>(sy);
    }
  return finish_field(std::move(gx), std::move(gy));
}

}  // namespace idsr::scalespace
