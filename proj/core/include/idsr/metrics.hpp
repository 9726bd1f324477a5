#pragma once

#include "idsr/image.hpp"

namespace idsr {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over every sample, peak 1.0, capped at 99 dB.
double psnr(const Image& a, const Image& b);

/// Mean SSIM on luminance: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over window positions that fit
/// inside the image.
double ssim(const Image& a, const Image& b);

}  // namespace idsr
