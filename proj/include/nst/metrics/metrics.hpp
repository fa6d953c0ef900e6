#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nst/arch/weights.hpp"
#include "nst/tensor/tensor.hpp"

namespace nst::metrics {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;

  double c1() const noexcept { return (k1 * data_range) * (k1 * data_range); }
  double c2() const noexcept { return (k2 * data_range) * (k2 * data_range); }
  void validate() const;
};

struct PsnrParams {
  double max_value = 1.0;
};

/// Mean squared error over every scalar. PreconditionError on shape mismatch.
double mse(const Tensor& x, const Tensor& y);

/// 10 log10(MAX^2 / mse) in dB; +infinity when the images are identical.
double psnr(const Tensor& x, const Tensor& y, const PsnrParams& params = {});

/// The normalized 1-D Gaussian used for SSIM windows.
std::vector<double> gaussian_window(int size, double sigma);

/// ITU-R BT.601 luma of an RGB image; one-channel images pass through.
std::vector<double> luma(const Tensor& image);

/// Mean SSIM over all fully contained window positions (no padding), computed on
/// luma with Gaussian-weighted local moments. PreconditionError if the images
/// differ in shape, are neither RGB nor single-channel, or are smaller than the window.
double ssim(const Tensor& x, const Tensor& y, const SsimParams& params = {});

/// LPIPS-shaped distance between feature stacks of a fixed network. Not the
/// calibrated LPIPS metric: there are no learned per-channel heads.
struct PerceptualConfig {
  std::string graph = "tiny_vgg";
  std::vector<int> taps;        // graph ordinals; empty means all
  std::vector<double> weights;  // per tap; empty means equal weights summing to 1
  bool normalize_channels = true;
};

/// For each tap: features unit-normalized per position across channels (when
/// enabled), squared difference summed over channels, averaged over positions;
/// then the weighted sum over taps. Inputs are RGB in [0, 1].
/// ConfigError for taps not in the graph or negative or mismatched weights.
double perceptual_distance(const Tensor& x, const Tensor& y, const PerceptualConfig& config,
                           const arch::WeightedGraph& weighted);

}  // namespace nst::metrics
