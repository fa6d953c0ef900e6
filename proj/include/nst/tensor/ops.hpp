#pragma once

// Forward and input-gradient kernels for every layer kind in the architecture
// zoo. Activations are float; every reduction accumulates in double with a
// fixed order per output element, so results do not depend on thread count.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nst/tensor/tensor.hpp"

namespace nst::ops {

/// Cout x Cin x kh x kw filter bank plus optional per-output-channel bias.
struct ConvWeights {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  std::vector<float> weight;  // Cout*Cin*kh*kw, row-major
  std::vector<float> bias;    // empty or Cout

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_h * kernel_w;
  }
};

struct ConvGeometry {
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;
};

Shape conv2d_output_shape(const Shape& in, const ConvWeights& w, const ConvGeometry& g,
                          std::string_view layer = "conv");

/// Zero-padded cross-correlation. Shape errors raise ConfigError naming `layer`.
Tensor conv2d_forward(const Tensor& input, const ConvWeights& w, const ConvGeometry& g,
                      std::string_view layer = "conv");

/// Transposed convolution of `upstream` by the filter bank (gradient wrt input).
LayerGrad conv2d_backward(const Tensor& upstream, const Shape& input_shape, const ConvWeights& w,
                          const ConvGeometry& g);

Tensor relu(const Tensor& input);
/// Masks `upstream` where saved_input <= 0; the subgradient at exactly 0 is 0.
LayerGrad relu_backward(const Tensor& upstream, const Tensor& saved_input);

enum class PoolKind { max, avg };

struct PoolGeometry {
  PoolKind kind = PoolKind::max;
  int window_h = 2;
  int window_w = 2;
  int stride_h = 2;
  int stride_w = 2;
  int pad_h = 0;
  int pad_w = 0;
};

Shape pool2d_output_shape(const Shape& in, const PoolGeometry& g, std::string_view layer = "pool");
/// Max pooling ignores padded cells; average pooling counts them (divides by the window area).
Tensor pool2d(const Tensor& input, const PoolGeometry& g, std::string_view layer = "pool");
/// Max routes each upstream value to the first row-major argmax of its window.
LayerGrad pool2d_backward(const Tensor& upstream, const Tensor& saved_input, const PoolGeometry& g);
/// Index within its channel plane of the input selected by each max-pool output
/// (row-major first maximum).
std::vector<std::uint32_t> pool2d_argmax(const Tensor& input, const PoolGeometry& g);

/// Inference-mode batch normalization with fixed running statistics.
struct BatchNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float eps = 1e-5f;
};

Tensor batchnorm_inference(const Tensor& input, const BatchNormParams& p,
                           std::string_view layer = "batchnorm");
LayerGrad batchnorm_backward(const Tensor& upstream, const BatchNormParams& p);

Tensor add(const Tensor& a, const Tensor& b, std::string_view layer = "add");
/// Gradient of a sum reaches both operands unchanged.
std::pair<Tensor, Tensor> add_backward(const Tensor& upstream);

Tensor concat_channels(std::span<const Tensor* const> inputs, std::string_view layer = "concat");
std::vector<Tensor> concat_backward(const Tensor& upstream, std::span<const int> channel_counts);

}  // namespace nst::ops
