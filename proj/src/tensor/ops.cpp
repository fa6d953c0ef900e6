#include "nst/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "nst/errors.hpp"
#include "nst/simd/kernels.hpp"

namespace nst::ops {
namespace {

// Output positions processed per im2col tile; bounds scratch memory at
// (Cin*kh*kw) x kTile regardless of image size.
constexpr std::size_t kTile = 256;

struct ConvDims {
  int cin, h, w, kh, kw, hout, wout;
  std::size_t positions() const { return static_cast<std::size_t>(hout) * wout; }
  std::size_t rows() const { return static_cast<std::size_t>(cin) * kh * kw; }
};

ConvDims conv_dims(const Shape& in, const ConvWeights& w, const ConvGeometry& g) {
  const Shape out = conv2d_output_shape(in, w, g);
  return {in.channels, in.height, in.width, w.kernel_h, w.kernel_w, out.height, out.width};
}

bool is_pointwise(const ConvWeights& w, const ConvGeometry& g) {
  return w.kernel_h == 1 && w.kernel_w == 1 && g.stride_h == 1 && g.stride_w == 1 && g.pad_h == 0 &&
         g.pad_w == 0;
}

// Gathers the receptive fields of output positions [p0, p0+np) into `col`,
// one row per (ci, ky, kx), zero where the window hangs over the padding.
void im2col_tile(const Tensor& input, const ConvDims& d, const ConvGeometry& g, std::size_t p0,
                 std::size_t np, std::vector<float>& col) {
  const float* src = input.data().data();
  std::size_t r = 0;
  for (int ci = 0; ci < d.cin; ++ci) {
    const float* plane = src + static_cast<std::size_t>(ci) * d.h * d.w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx, ++r) {
        float* dst = col.data() + r * np;
        for (std::size_t t = 0; t < np; ++t) {
          const std::size_t p = p0 + t;
          const int oy = static_cast<int>(p / d.wout);
          const int ox = static_cast<int>(p % d.wout);
          const int iy = oy * g.stride_h - g.pad_h + ky;
          const int ix = ox * g.stride_w - g.pad_w + kx;
          dst[t] = (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                       ? plane[static_cast<std::size_t>(iy) * d.w + ix]
                       : 0.0f;
        }
      }
    }
  }
}

}  // namespace

Shape conv2d_output_shape(const Shape& in, const ConvWeights& w, const ConvGeometry& g,
                          std::string_view layer) {
  if (in.channels != w.in_channels) {
    throw ConfigError(fmt::format("layer '{}': input has {} channels, kernel expects {}", layer,
                                  in.channels, w.in_channels));
  }
  if (g.stride_h < 1 || g.stride_w < 1 || g.pad_h < 0 || g.pad_w < 0) {
    throw ConfigError(fmt::format("layer '{}': invalid stride/padding", layer));
  }
  if (w.kernel_h > in.height + 2 * g.pad_h || w.kernel_w > in.width + 2 * g.pad_w) {
    throw ConfigError(fmt::format("layer '{}': kernel {}x{} larger than padded input {}", layer,
                                  w.kernel_h, w.kernel_w, in.str()));
  }
  return {w.out_channels, (in.height + 2 * g.pad_h - w.kernel_h) / g.stride_h + 1,
          (in.width + 2 * g.pad_w - w.kernel_w) / g.stride_w + 1};
}

Tensor conv2d_forward(const Tensor& input, const ConvWeights& w, const ConvGeometry& g,
                      std::string_view layer) {
  const Shape out_shape = conv2d_output_shape(input.shape(), w, g, layer);
  if (w.weight.size() != w.weight_count() ||
      !(w.bias.empty() || w.bias.size() == static_cast<std::size_t>(w.out_channels))) {
    throw ConfigError(fmt::format("layer '{}': weight block does not match declared dims", layer));
  }
  const ConvDims d = conv_dims(input.shape(), w, g);
  const std::size_t P = d.positions();
  const std::size_t R = d.rows();
  const bool pointwise = is_pointwise(w, g);
  const auto& k = simd::active();

  Tensor out(out_shape);
  float* dst = out.data().data();
  std::vector<float> col(pointwise ? 0 : R * std::min(P, kTile));
  std::vector<double> acc(std::min(P, kTile));

  for (std::size_t p0 = 0; p0 < P; p0 += kTile) {
    const std::size_t np = std::min(kTile, P - p0);
    if (!pointwise) im2col_tile(input, d, g, p0, np, col);
    for (int co = 0; co < w.out_channels; ++co) {
      std::fill_n(acc.begin(), np, 0.0);
      const float* wrow = w.weight.data() + static_cast<std::size_t>(co) * R;
      for (std::size_t r = 0; r < R; ++r) {
        const float* src = pointwise ? input.data().data() + r * P + p0 : col.data() + r * np;
        k.axpy_f64(acc.data(), src, wrow[r], np);
      }
      float* o = dst + static_cast<std::size_t>(co) * P + p0;
      if (w.bias.empty()) {
        for (std::size_t t = 0; t < np; ++t) o[t] = static_cast<float>(acc[t]);
      } else {
        const double b = w.bias[co];
        for (std::size_t t = 0; t < np; ++t) o[t] = static_cast<float>(acc[t] + b);
      }
    }
  }
  return out;
}

LayerGrad conv2d_backward(const Tensor& upstream, const Shape& input_shape, const ConvWeights& w,
                          const ConvGeometry& g) {
  const Shape expected = conv2d_output_shape(input_shape, w, g);
  if (upstream.shape() != expected) {
    throw InternalError(fmt::format("conv2d_backward: upstream {} does not match forward output {}",
                                    upstream.shape().str(), expected.str()));
  }
  const ConvDims d = conv_dims(input_shape, w, g);
  const std::size_t P = d.positions();
  const std::size_t R = d.rows();
  const auto& k = simd::active();

  std::vector<double> grad(input_shape.size(), 0.0);
  std::vector<double> dcol(R * std::min(P, kTile));
  const float* up = upstream.data().data();

  for (std::size_t p0 = 0; p0 < P; p0 += kTile) {
    const std::size_t np = std::min(kTile, P - p0);
    std::fill_n(dcol.begin(), R * np, 0.0);
    for (int co = 0; co < w.out_channels; ++co) {
      const float* wrow = w.weight.data() + static_cast<std::size_t>(co) * R;
      const float* urow = up + static_cast<std::size_t>(co) * P + p0;
      for (std::size_t r = 0; r < R; ++r) k.axpy_f64(dcol.data() + r * np, urow, wrow[r], np);
    }
    // col2im: scatter each tile row back onto the input positions it read.
    std::size_t r = 0;
    for (int ci = 0; ci < d.cin; ++ci) {
      double* plane = grad.data() + static_cast<std::size_t>(ci) * d.h * d.w;
      for (int ky = 0; ky < d.kh; ++ky) {
        for (int kx = 0; kx < d.kw; ++kx, ++r) {
          const double* src = dcol.data() + r * np;
          for (std::size_t t = 0; t < np; ++t) {
            const std::size_t p = p0 + t;
            const int iy = static_cast<int>(p / d.wout) * g.stride_h - g.pad_h + ky;
            const int ix = static_cast<int>(p % d.wout) * g.stride_w - g.pad_w + kx;
            if (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w) {
              plane[static_cast<std::size_t>(iy) * d.w + ix] += src[t];
            }
          }
        }
      }
    }
  }

  Tensor out(input_shape);
  for (std::size_t i = 0; i < grad.size(); ++i) out[i] = static_cast<float>(grad[i]);
  return {std::move(out)};
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  simd::active().relu(out.data().data(), input.data().data(), input.size());
  return out;
}

LayerGrad relu_backward(const Tensor& upstream, const Tensor& saved_input) {
  if (upstream.shape() != saved_input.shape()) {
    throw InternalError("relu_backward: upstream/saved_input shape mismatch");
  }
  Tensor g(upstream.shape());
  simd::active().relu_backward(g.data().data(), upstream.data().data(), saved_input.data().data(),
                               upstream.size());
  return {std::move(g)};
}

Shape pool2d_output_shape(const Shape& in, const PoolGeometry& g, std::string_view layer) {
  if (g.window_h < 1 || g.window_w < 1 || g.stride_h < 1 || g.stride_w < 1 || g.pad_h < 0 ||
      g.pad_w < 0 || g.pad_h >= g.window_h || g.pad_w >= g.window_w) {
    throw ConfigError(fmt::format("layer '{}': invalid pooling geometry", layer));
  }
  if (g.window_h > in.height + 2 * g.pad_h || g.window_w > in.width + 2 * g.pad_w) {
    throw ConfigError(fmt::format("layer '{}': pooling window {}x{} exceeds input {}", layer,
                                  g.window_h, g.window_w, in.str()));
  }
  return {in.channels, (in.height + 2 * g.pad_h - g.window_h) / g.stride_h + 1,
          (in.width + 2 * g.pad_w - g.window_w) / g.stride_w + 1};
}

namespace {

// Row-major first maximum inside the window; padded cells never win.
std::size_t window_argmax(const float* plane, int h, int w, int y0, int x0, const PoolGeometry& g) {
  float best = -std::numeric_limits<float>::infinity();
  std::size_t arg = std::numeric_limits<std::size_t>::max();
  for (int wy = 0; wy < g.window_h; ++wy) {
    const int iy = y0 + wy;
    if (iy < 0 || iy >= h) continue;
    for (int wx = 0; wx < g.window_w; ++wx) {
      const int ix = x0 + wx;
      if (ix < 0 || ix >= w) continue;
      const std::size_t idx = static_cast<std::size_t>(iy) * w + ix;
      if (arg == std::numeric_limits<std::size_t>::max() || plane[idx] > best) {
        best = plane[idx];
        arg = idx;
      }
    }
  }
  return arg;
}

}  // namespace

Tensor pool2d(const Tensor& input, const PoolGeometry& g, std::string_view layer) {
  const Shape os = pool2d_output_shape(input.shape(), g, layer);
  Tensor out(os);
  const int h = input.height(), w = input.width();
  const double area = static_cast<double>(g.window_h) * g.window_w;
  for (int c = 0; c < os.channels; ++c) {
    const float* plane = input.channel(c).data();
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        const int y0 = oy * g.stride_h - g.pad_h;
        const int x0 = ox * g.stride_w - g.pad_w;
        if (g.kind == PoolKind::max) {
          out.at(c, oy, ox) = plane[window_argmax(plane, h, w, y0, x0, g)];
        } else {
          double s = 0.0;
          for (int wy = 0; wy < g.window_h; ++wy) {
            const int iy = y0 + wy;
            if (iy < 0 || iy >= h) continue;
            for (int wx = 0; wx < g.window_w; ++wx) {
              const int ix = x0 + wx;
              if (ix >= 0 && ix < w) s += plane[static_cast<std::size_t>(iy) * w + ix];
            }
          }
          out.at(c, oy, ox) = static_cast<float>(s / area);
        }
      }
    }
  }
  return out;
}

LayerGrad pool2d_backward(const Tensor& upstream, const Tensor& saved_input, const PoolGeometry& g) {
  const Shape os = pool2d_output_shape(saved_input.shape(), g);
  if (upstream.shape() != os) {
    throw InternalError("pool2d_backward: upstream does not match forward output");
  }
  const int h = saved_input.height(), w = saved_input.width();
  const double area = static_cast<double>(g.window_h) * g.window_w;
  std::vector<double> grad(saved_input.size(), 0.0);
  for (int c = 0; c < os.channels; ++c) {
    const float* plane = saved_input.channel(c).data();
    double* gplane = grad.data() + static_cast<std::size_t>(c) * h * w;
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        const double u = upstream.at(c, oy, ox);
        const int y0 = oy * g.stride_h - g.pad_h;
        const int x0 = ox * g.stride_w - g.pad_w;
        if (g.kind == PoolKind::max) {
          gplane[window_argmax(plane, h, w, y0, x0, g)] += u;
        } else {
          const double share = u / area;
          for (int wy = 0; wy < g.window_h; ++wy) {
            const int iy = y0 + wy;
            if (iy < 0 || iy >= h) continue;
            for (int wx = 0; wx < g.window_w; ++wx) {
              const int ix = x0 + wx;
              if (ix >= 0 && ix < w) gplane[static_cast<std::size_t>(iy) * w + ix] += share;
            }
          }
        }
      }
    }
  }
  Tensor out(saved_input.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) out[i] = static_cast<float>(grad[i]);
  return {std::move(out)};
}

std::vector<std::uint32_t> pool2d_argmax(const Tensor& input, const PoolGeometry& g) {
  const Shape os = pool2d_output_shape(input.shape(), g);
  std::vector<std::uint32_t> out;
  out.reserve(os.size());
  const int h = input.height(), w = input.width();
  for (int c = 0; c < os.channels; ++c) {
    const float* plane = input.channel(c).data();
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        out.push_back(static_cast<std::uint32_t>(
            window_argmax(plane, h, w, oy * g.stride_h - g.pad_h, ox * g.stride_w - g.pad_w, g)));
      }
    }
  }
  return out;
}

namespace {

std::vector<double> bn_scales(const BatchNormParams& p, int channels, std::string_view layer) {
  const auto n = static_cast<std::size_t>(channels);
  if (p.gamma.size() != n || p.beta.size() != n || p.running_mean.size() != n ||
      p.running_var.size() != n) {
    throw ConfigError(fmt::format("layer '{}': batchnorm parameters do not have {} channels", layer,
                                  channels));
  }
  std::vector<double> scale(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double denom = static_cast<double>(p.running_var[c]) + static_cast<double>(p.eps);
    if (!(denom > 0.0)) {
      throw ConfigError(fmt::format("layer '{}': running_var + eps <= 0 in channel {}", layer, c));
    }
    scale[c] = static_cast<double>(p.gamma[c]) / std::sqrt(denom);
  }
  return scale;
}

}  // namespace

Tensor batchnorm_inference(const Tensor& input, const BatchNormParams& p, std::string_view layer) {
  const auto scale = bn_scales(p, input.channels(), layer);
  Tensor out(input.shape());
  for (int c = 0; c < input.channels(); ++c) {
    const double mean = p.running_mean[c];
    const double shift = p.beta[c];
    auto src = input.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<float>(scale[c] * (static_cast<double>(src[i]) - mean) + shift);
    }
  }
  return out;
}

LayerGrad batchnorm_backward(const Tensor& upstream, const BatchNormParams& p) {
  const auto scale = bn_scales(p, upstream.channels(), "batchnorm");
  Tensor g(upstream.shape());
  for (int c = 0; c < upstream.channels(); ++c) {
    auto src = upstream.channel(c);
    auto dst = g.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(scale[c] * src[i]);
  }
  return {std::move(g)};
}

Tensor add(const Tensor& a, const Tensor& b, std::string_view layer) {
  if (a.shape() != b.shape()) {
    throw ConfigError(fmt::format("layer '{}': cannot add {} and {}", layer, a.shape().str(),
                                  b.shape().str()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

std::pair<Tensor, Tensor> add_backward(const Tensor& upstream) { return {upstream, upstream}; }

Tensor concat_channels(std::span<const Tensor* const> inputs, std::string_view layer) {
  if (inputs.empty()) throw ConfigError(fmt::format("layer '{}': concat of nothing", layer));
  const int h = inputs.front()->height(), w = inputs.front()->width();
  int channels = 0;
  for (const Tensor* t : inputs) {
    if (t->height() != h || t->width() != w) {
      throw ConfigError(fmt::format("layer '{}': concat spatial mismatch {} vs {}", layer,
                                    inputs.front()->shape().str(), t->shape().str()));
    }
    channels += t->channels();
  }
  Tensor out({channels, h, w});
  auto dst = out.data().begin();
  for (const Tensor* t : inputs) dst = std::copy(t->data().begin(), t->data().end(), dst);
  return out;
}

std::vector<Tensor> concat_backward(const Tensor& upstream, std::span<const int> channel_counts) {
  std::vector<Tensor> parts;
  parts.reserve(channel_counts.size());
  auto src = upstream.data().begin();
  int total = 0;
  for (int c : channel_counts) {
    total += c;
    if (total > upstream.channels()) throw InternalError("concat_backward: channel split overflow");
    Tensor part({c, upstream.height(), upstream.width()});
    std::copy_n(src, part.size(), part.data().begin());
    src += static_cast<std::ptrdiff_t>(part.size());
    parts.push_back(std::move(part));
  }
  if (total != upstream.channels()) throw InternalError("concat_backward: channel split mismatch");
  return parts;
}

}  // namespace nst::ops
