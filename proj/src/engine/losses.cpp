#include "nst/engine/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>

#include "nst/errors.hpp"
#include "nst/simd/kernels.hpp"

namespace nst::engine {

GramMatrix gram(const FeatureMap& feature) {
  const int n = feature.filters();
  const std::size_t m = feature.positions();
  const auto& k = simd::active();
  GramMatrix g{feature.layer_id, n, std::vector<double>(static_cast<std::size_t>(n) * n)};
  for (int i = 0; i < n; ++i) {
    const float* ri = feature.row(i).data();
    for (int j = i; j < n; ++j) {
      const double v = k.dot_f64(ri, feature.row(j).data(), m);
      g.values[static_cast<std::size_t>(i) * n + j] = v;
      g.values[static_cast<std::size_t>(j) * n + i] = v;
    }
  }
  return g;
}

LossWithGrad content_loss(const FeatureMap& output, const FeatureMap& target) {
  if (output.tensor.shape() != target.tensor.shape()) {
    throw ConfigError(fmt::format("content loss at '{}': output shape {} differs from target shape {}",
                                  output.layer_id, output.tensor.shape().str(),
                                  target.tensor.shape().str()));
  }
  const auto f = output.tensor.data();
  const auto p = target.tensor.data();
  LossWithGrad out{0.5 * simd::active().sum_sq_diff_f64(f.data(), p.data(), f.size()),
                   Tensor(output.tensor.shape())};
  auto g = out.grad.data();
  for (std::size_t i = 0; i < f.size(); ++i) g[i] = f[i] - p[i];
  return out;
}

namespace {

void check_filters(const GramMatrix& output, const GramMatrix& style) {
  if (output.n != style.n) {
    throw ConfigError(fmt::format("style term at '{}': output has {} filters, style target has {}",
                                  output.layer_id, output.n, style.n));
  }
}

}  // namespace

double style_term_value(const GramMatrix& output, const GramMatrix& style, std::size_t positions) {
  check_filters(output, style);
  double sum = 0.0;
  for (std::size_t i = 0; i < output.values.size(); ++i) {
    const double d = output.values[i] - style.values[i];
    sum += d * d;
  }
  const double nm = static_cast<double>(output.n) * static_cast<double>(positions);
  return sum / (4.0 * nm * nm);
}

LossWithGrad style_term(const FeatureMap& output, const GramMatrix& style) {
  const GramMatrix g = gram(output);
  check_filters(g, style);
  const int n = g.n;
  const std::size_t m = output.positions();
  LossWithGrad out{style_term_value(g, style, m), Tensor(output.tensor.shape())};

  const double nm = static_cast<double>(n) * static_cast<double>(m);
  const double scale = 1.0 / (nm * nm);
  const auto& k = simd::active();
  std::vector<double> acc(m);
  for (int i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      const double d = g.at(i, j) - style.at(i, j);
      if (d != 0.0) k.axpy_f64(acc.data(), output.row(j).data(), d, m);
    }
    auto dst = out.grad.channel(i);
    for (std::size_t p = 0; p < m; ++p) dst[p] = static_cast<float>(acc[p] * scale);
  }
  return out;
}

double style_loss(std::span<const WeightedTerm> terms) noexcept {
  double sum = 0.0;
  for (const auto& t : terms) sum += t.weight * t.value;
  return sum;
}

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError(fmt::format("loss weights must be non-negative (alpha={}, beta={})", alpha, beta));
  }
  if (alpha == 0.0 && beta == 0.0) throw ConfigError("alpha and beta cannot both be zero");
  bool any_positive = false;
  for (const auto& [tap, w] : layer_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError(fmt::format("style weight for tap {} must be a finite value >= 0, got {}", tap, w));
    }
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw ConfigError("at least one style-layer weight must be positive");
}

std::map<int, double> LossWeights::uniform(std::span<const int> taps) {
  std::map<int, double> out;
  for (int t : taps) out[t] += 1.0 / static_cast<double>(taps.size());
  return out;
}

double total_loss(double content, double style, const LossWeights& weights) noexcept {
  return weights.alpha * content + weights.beta * style;
}

}  // namespace nst::engine
