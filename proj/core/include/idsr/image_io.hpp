#pragma once

#include <filesystem>

#include "idsr/image.hpp"

namespace idsr {

/// Reads 8-bit PNG (gray or RGB; alpha is composited away) and binary
/// PGM/PPM (P5/P6, maxval 255). Bytes map to [0, 1] by v / 255.
Image load_image(const std::filesystem::path& path);

/// Writes PNG, PGM or PPM depending on the extension. Samples are clamped to
/// [0, 1] and quantized round-half-up. PGM needs a one-channel image and PPM
/// a three-channel one.
void save_image(const Image& img, const std::filesystem::path& path);

/// floor(clamp(v, 0, 1) * 255 + 0.5)
unsigned char quantize_sample(float v);

}  // namespace idsr
