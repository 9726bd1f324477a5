#include "idsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "idsr/error.hpp"

namespace idsr {

namespace {

void check_dims(int height, int width, int channels) {
  require(height > 0 && width > 0, Errc::invalid_argument,
          "image dimensions must be positive, got " + std::to_string(height) + "x" +
              std::to_string(width));
  require(channels == 1 || channels == 3, Errc::invalid_argument,
          "images have 1 or 3 channels, got " + std::to_string(channels));
}

void check_same_shape(const Image& a, const Image& b, const char* what) {
  require(a.same_shape(b), Errc::dimension_mismatch,
          std::string(what) + ": " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
              "x" + std::to_string(a.channels()) + " vs " + std::to_string(b.height()) + "x" +
              std::to_string(b.width()) + "x" + std::to_string(b.channels()));
}

template <typename Fn>
Image zip(const Image& a, const Image& b, const char* what, Fn fn) {
  check_same_shape(a, b, what);
  Image out(a.height(), a.width(), a.channels());
  auto da = a.data();
  auto db = b.data();
  auto dout = out.data();
  for (std::size_t i = 0; i < dout.size(); ++i) dout[i] = fn(da[i], db[i]);
  return out;
}

}  // namespace

Image::Image(int height, int width, int channels, float fill) {
  check_dims(height, width, channels);
  height_ = height;
  width_ = width;
  channels_ = channels;
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

Image::Image(int height, int width, int channels, std::vector<float> data) {
  check_dims(height, width, channels);
  height_ = height;
  width_ = width;
  channels_ = channels;
  require(data.size() == pixel_count() * static_cast<std::size_t>(channels),
          Errc::dimension_mismatch, "pixel buffer length does not match H*W*C");
  data_ = std::move(data);
}

Image Image::crop(int top, int left, int height, int width) const {
  require(top >= 0 && left >= 0 && height > 0 && width > 0 && top + height <= height_ &&
              left + width <= width_,
          Errc::invalid_argument, "crop rectangle outside image");
  Image out(height, width, channels_);
  for (int y = 0; y < height; ++y) {
    const float* src = &data_[index(top + y, left, 0)];
    std::copy(src, src + static_cast<std::ptrdiff_t>(width) * channels_, &out.at(y, 0, 0));
  }
  return out;
}

Image Image::channel(int c) const {
  require(c >= 0 && c < channels_, Errc::invalid_argument, "channel index out of range");
  Image out(height_, width_, 1);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) out.at(y, x) = at(y, x, c);
  return out;
}

Image to_grayscale(const Image& rgb) {
  require(rgb.channels() == 3, Errc::invalid_argument,
          "to_grayscale expects 3 channels, got " + std::to_string(rgb.channels()));
  Image out(rgb.height(), rgb.width(), 1);
  auto src = rgb.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    dst[i] = static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
  }
  return out;
}

Image luminance(const Image& img) { return img.channels() == 1 ? img : to_grayscale(img); }

Image subtract_rain(const Image& rainy, const Image& rain_estimate) {
  return zip(rainy, rain_estimate, "subtract_rain", [](float x, float r) { return x - r; });
}

Image add(const Image& a, const Image& b) {
  return zip(a, b, "add", [](float x, float y) { return x + y; });
}

Image subtract(const Image& a, const Image& b) {
  return zip(a, b, "subtract", [](float x, float y) { return x - y; });
}

Image scale(const Image& img, float factor) {
  Image out = img;
  for (float& v : out.data()) v *= factor;
  return out;
}

Image clamp01(const Image& img) {
  Image out = img;
  for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

Image gray_to_rgb(const Image& gray) {
  require(gray.channels() == 1, Errc::invalid_argument, "gray_to_rgb expects one channel");
  Image out(gray.height(), gray.width(), 3);
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = gray.at(y, x);
  return out;
}

double mean_squared_error(const Image& a, const Image& b) {
  check_same_shape(a, b, "mean_squared_error");
  double acc = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

double max_abs_difference(const Image& a, const Image& b) {
  check_same_shape(a, b, "max_abs_difference");
  double worst = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(da[i]) - static_cast<double>(db[i])));
  return worst;
}

}  // namespace idsr
