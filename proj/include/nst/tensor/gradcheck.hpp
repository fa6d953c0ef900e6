#pragma once

#include <cstdint>
#include <functional>

#include "nst/tensor/tensor.hpp"

namespace nst {

/// A scalar function of a tensor together with its claimed analytic gradient.
struct ScalarFunction {
  std::function<double(const Tensor&)> value;
  std::function<Tensor(const Tensor&)> gradient;
};

struct GradCheckOptions {
  double eps = 1e-3;
  /// 2: central difference (f(x+h) - f(x-h)) / 2h, exact for quadratics.
  /// 4: five-point stencil (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h,
  ///    exact for polynomials up to degree four.
  int stencil = 2;
  /// Number of coordinates sampled without replacement; 0 checks all of them.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
  /// Optional veto for a coordinate, given the two outermost perturbed inputs.
  /// Used to mask points whose perturbation crosses a ReLU kink.
  std::function<bool(const Tensor& minus, const Tensor& plus)> skip;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t worst_index = 0;
};

/// Compares the analytic gradient with central differences coordinate by coordinate.
/// Relative error uses max(|analytic|, |numeric|, 1e-8) as the denominator. The
/// step is the float-representable distance between the two probes, so input
/// rounding does not bias the quotient (for the five-point stencil the step is
/// taken as the mean of the two float-representable half-spans). Throws
/// PreconditionError when eps <= 0 or the stencil is not 2 or 4.
GradCheckResult finite_difference_check(const ScalarFunction& f, const Tensor& input,
                                        const GradCheckOptions& options = {});

}  // namespace nst
