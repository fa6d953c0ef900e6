#include "nst/arch/normalize.hpp"

#include <algorithm>

#include "nst/errors.hpp"

namespace nst::arch {

Tensor normalize_input(const Tensor& rgb01) {
  if (rgb01.channels() != 3) throw PreconditionError("normalize_input: expected a 3-channel RGB image");
  Tensor out(rgb01.shape());
  for (int c = 0; c < 3; ++c) {
    const double mean = kImageNetMean[c];
    const double sd = kImageNetStd[c];
    auto src = rgb01.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (!(src[i] >= 0.0f && src[i] <= 1.0f)) {
        throw PreconditionError("normalize_input: pixel values must lie in [0, 1]");
      }
      dst[i] = static_cast<float>((static_cast<double>(src[i]) - mean) / sd);
    }
  }
  return out;
}

Tensor denormalize(const Tensor& normalized) {
  if (normalized.channels() != 3) throw PreconditionError("denormalize: expected a 3-channel image");
  Tensor out(normalized.shape());
  for (int c = 0; c < 3; ++c) {
    const double mean = kImageNetMean[c];
    const double sd = kImageNetStd[c];
    auto src = normalized.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<float>(std::clamp(static_cast<double>(src[i]) * sd + mean, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace nst::arch
