#include "nst/metrics/metrics.hpp"

#include <cmath>
#include <fmt/core.h>
#include <limits>
#include <numeric>

#include "nst/arch/forward.hpp"
#include "nst/arch/normalize.hpp"
#include "nst/errors.hpp"

namespace nst::metrics {

namespace {

void require_same_shape(const Tensor& x, const Tensor& y, const char* what) {
  if (x.shape() != y.shape()) {
    throw PreconditionError(fmt::format("{}: shapes differ ({} vs {})", what, x.shape().str(), y.shape().str()));
  }
}

}  // namespace

void SsimParams::validate() const {
  if (window < 1 || window % 2 == 0) throw PreconditionError(fmt::format("SSIM window must be odd, got {}", window));
  if (!(sigma > 0.0)) throw PreconditionError("SSIM sigma must be positive");
  if (!(c1() > 0.0) || !(c2() > 0.0)) throw PreconditionError("SSIM constants C1 and C2 must be positive");
}

double mse(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "mse");
  if (x.size() == 0) throw PreconditionError("mse: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(x.size());
}

double psnr(const Tensor& x, const Tensor& y, const PsnrParams& params) {
  if (!(params.max_value > 0.0)) throw PreconditionError("psnr: MAX must be positive");
  const double e = mse(x, y);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(params.max_value * params.max_value / e);
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const int half = size / 2;
  for (int i = 0; i < size; ++i) {
    const double d = i - half;
    w[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> luma(const Tensor& image) {
  const std::size_t plane = image.shape().plane();
  std::vector<double> out(plane);
  if (image.channels() == 1) {
    for (std::size_t i = 0; i < plane; ++i) out[i] = image[i];
    return out;
  }
  if (image.channels() != 3) {
    throw PreconditionError(fmt::format("expected an RGB or single-channel image, got {}", image.shape().str()));
  }
  const auto r = image.channel(0);
  const auto g = image.channel(1);
  const auto b = image.channel(2);
  for (std::size_t i = 0; i < plane; ++i) out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

namespace {

// Valid-region separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[t] * src[static_cast<std::size_t>(y) * w + x + t];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Tensor& x, const Tensor& y, const SsimParams& params) {
  params.validate();
  require_same_shape(x, y, "ssim");
  const int h = x.height();
  const int w = x.width();
  if (h < params.window || w < params.window) {
    throw PreconditionError(fmt::format("ssim: image {}x{} is smaller than the {}x{} window", h, w,
                                        params.window, params.window));
  }
  const auto lx = luma(x);
  const auto ly = luma(y);
  std::vector<double> xx(lx.size()), yy(lx.size()), xy(lx.size());
  for (std::size_t i = 0; i < lx.size(); ++i) {
    xx[i] = lx[i] * lx[i];
    yy[i] = ly[i] * ly[i];
    xy[i] = lx[i] * ly[i];
  }
  const auto k = gaussian_window(params.window, params.sigma);
  const auto mx = filter_valid(lx, h, w, k);
  const auto my = filter_valid(ly, h, w, k);
  const auto sxx = filter_valid(xx, h, w, k);
  const auto syy = filter_valid(yy, h, w, k);
  const auto sxy = filter_valid(xy, h, w, k);

  const double c1 = params.c1();
  const double c2 = params.c2();
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

double perceptual_distance(const Tensor& x, const Tensor& y, const PerceptualConfig& config,
                           const arch::WeightedGraph& weighted) {
  require_same_shape(x, y, "perceptual_distance");
  const auto& registry = weighted.graph.taps();
  std::vector<int> taps = config.taps;
  if (taps.empty()) {
    taps.resize(static_cast<std::size_t>(registry.depth()));
    std::iota(taps.begin(), taps.end(), 1);
  }
  for (int t : taps) {
    if (t < 1 || t > registry.depth()) {
      throw ConfigError(fmt::format("perceptual distance: tap {} is not in 1..{} for {}", t,
                                    registry.depth(), weighted.graph.name()));
    }
  }
  std::vector<double> weights = config.weights;
  if (weights.empty()) weights.assign(taps.size(), 1.0 / static_cast<double>(taps.size()));
  if (weights.size() != taps.size()) {
    throw ConfigError(fmt::format("perceptual distance: {} weights for {} taps", weights.size(), taps.size()));
  }
  for (double v : weights) {
    if (!(v >= 0.0)) throw ConfigError("perceptual distance: weights must be non-negative");
  }

  const auto fx = arch::forward_with_taps(weighted, arch::normalize_input(x), taps).features;
  const auto fy = arch::forward_with_taps(weighted, arch::normalize_input(y), taps).features;
  constexpr double kEps = 1e-10;
  double total = 0.0;
  for (std::size_t t = 0; t < taps.size(); ++t) {
    const Tensor& a = fx.at(taps[t]).tensor;
    const Tensor& b = fy.at(taps[t]).tensor;
    const int c = a.channels();
    const std::size_t m = a.shape().plane();
    double sum = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      double na = 1.0;
      double nb = 1.0;
      if (config.normalize_channels) {
        double sa = 0.0;
        double sb = 0.0;
        for (int ch = 0; ch < c; ++ch) {
          const double va = a.channel(ch)[p];
          const double vb = b.channel(ch)[p];
          sa += va * va;
          sb += vb * vb;
        }
        na = std::sqrt(sa) + kEps;
        nb = std::sqrt(sb) + kEps;
      }
      for (int ch = 0; ch < c; ++ch) {
        const double d = a.channel(ch)[p] / na - b.channel(ch)[p] / nb;
        sum += d * d;
      }
    }
    total += weights[t] * sum / static_cast<double>(m);
  }
  return total;
}

}  // namespace nst::metrics
