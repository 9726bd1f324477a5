#pragma once

#include <cmath>
#include <filesystem>
#include <vector>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "idsr/error.hpp"
#include "idsr/image.hpp"

namespace idsr::test {

inline Image random_image(int h, int w, int c, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  Image img(h, w, c);
  for (float& v : img.data()) v = dist(eng);
  return img;
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("idsr_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct Blob {
  double y, x, sigma, amplitude;
};

/// Gray image: background plus isotropic Gaussian blobs.
inline Image blob_image(int h, int w, const std::vector<Blob>& blobs, float background = 0.2f) {
  Image img(h, w, 1, background);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = background;
      for (const auto& b : blobs) {
        const double r2 = (y - b.y) * (y - b.y) + (x - b.x) * (x - b.x);
        v += b.amplitude * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
      }
      img.at(y, x) = static_cast<float>(v);
    }
  return img;
}

template <class F>
Errc error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected idsr::Error";
  return Errc::invalid_argument;
}

}  // namespace idsr::test
