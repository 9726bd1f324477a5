#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace idsr {

/// H x W x C float raster, row-major with interleaved channels. Samples are
/// nominally in [0, 1]; arithmetic is left unclamped and clamping only
/// happens when writing to disk.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);
  Image(int height, int width, int channels, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool same_size(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// Sub-window copy; the rectangle must lie inside the image.
  Image crop(int top, int left, int height, int width) const;
  /// Single channel copy.
  Image channel(int c) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
Image to_grayscale(const Image& rgb);

/// Grayscale view of any image: single-channel inputs are returned as-is.
Image luminance(const Image& img);

/// Per-pixel x - r_est, unclamped.
Image subtract_rain(const Image& rainy, const Image& rain_estimate);

Image add(const Image& a, const Image& b);
Image subtract(const Image& a, const Image& b);
Image scale(const Image& img, float factor);
Image clamp01(const Image& img);

/// Gray image replicated into three identical channels.
Image gray_to_rgb(const Image& gray);

double mean_squared_error(const Image& a, const Image& b);
double max_abs_difference(const Image& a, const Image& b);

}  // namespace idsr
