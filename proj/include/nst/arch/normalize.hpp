#pragma once

#include <array>

#include "nst/tensor/tensor.hpp"

namespace nst::arch {

inline constexpr std::array<float, 3> kImageNetMean = {0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageNetStd = {0.229f, 0.224f, 0.225f};

/// Per-channel (x - mean) / std of an RGB image with values in [0, 1].
/// PreconditionError for non-RGB input or values outside [0, 1].
Tensor normalize_input(const Tensor& rgb01);

/// Inverse of normalize_input, clamped to [0, 1].
Tensor denormalize(const Tensor& normalized);

}  // namespace nst::arch
