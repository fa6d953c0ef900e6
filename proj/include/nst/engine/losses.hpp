#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "nst/tensor/tensor.hpp"

namespace nst::engine {

/// Uncentered filter correlations of one feature map: an N x N symmetric matrix,
/// values[i * n + j] = sum_k F[i][k] * F[j][k], accumulated in double.
struct GramMatrix {
  std::string layer_id;
  int n = 0;
  std::vector<double> values;

  double at(int i, int j) const noexcept { return values[static_cast<std::size_t>(i) * n + j]; }
};

GramMatrix gram(const FeatureMap& feature);

/// A loss value and its gradient with respect to the feature map it was computed from.
struct LossWithGrad {
  double value = 0.0;
  Tensor grad;
};

/// 1/2 * sum (F - P)^2, gradient F - P. ConfigError on shape mismatch.
LossWithGrad content_loss(const FeatureMap& output, const FeatureMap& target);

/// E = sum (G - A)^2 / (4 N^2 M^2) for the output Gram G and style Gram A.
/// Naming follows the Gram definition on the output; the value is symmetric in
/// the two matrices. ConfigError when the filter counts differ.
double style_term_value(const GramMatrix& output, const GramMatrix& style, std::size_t positions);

/// style_term_value plus the gradient with respect to the output feature map,
/// (G - A) F / (N^2 M^2).
LossWithGrad style_term(const FeatureMap& output, const GramMatrix& style);

struct WeightedTerm {
  double weight = 0.0;
  double value = 0.0;
};

/// sum w_l * E_l.
double style_loss(std::span<const WeightedTerm> terms) noexcept;

/// Content weight alpha, style weight beta, and per-tap style weights w_l.
struct LossWeights {
  double alpha = 1.0;
  double beta = 1e8;
  std::map<int, double> layer_weights;  // tap ordinal -> w_l

  /// ConfigError unless alpha, beta >= 0 and not both zero, and every w_l >= 0
  /// with at least one positive.
  void validate() const;

  /// w_l = 1 / |taps| for each tap (duplicates accumulate their shares).
  static std::map<int, double> uniform(std::span<const int> taps);
};

double total_loss(double content, double style, const LossWeights& weights) noexcept;

}  // namespace nst::engine
