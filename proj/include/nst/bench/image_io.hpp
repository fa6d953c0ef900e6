#pragma once

#include <filesystem>
#include <string>

#include "nst/tensor/tensor.hpp"

namespace nst::bench {

/// Reads a PNG as RGB floats in [0, 1]. Gray, palette, alpha and 16-bit images
/// are converted (alpha is dropped). LoadError on failure.
Tensor read_png(const std::filesystem::path& path);

/// Writes an RGB or single-channel image in [0, 1] as 8-bit PNG, rounding to nearest.
void write_png(const Tensor& image, const std::filesystem::path& path);

/// Lossless float image file:
///
///   "NSTF1"          5 bytes magic
///   u32 C, H, W      little-endian
///   f32[C*H*W]       little-endian, channel-major
void write_raw(const Tensor& image, const std::filesystem::path& path);
Tensor read_raw(const std::filesystem::path& path);

/// Bilinear resampling with pixel-center alignment (edges clamped).
Tensor resize_bilinear(const Tensor& image, int height, int width);

/// Loads an image reference ("pattern:<name>:<seed>", a .png, or an NSTF1 file)
/// and resamples it to size x size.
Tensor load_image(const std::string& ref, int size);

}  // namespace nst::bench
