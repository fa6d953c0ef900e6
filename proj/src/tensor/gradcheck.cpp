#include "nst/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nst/errors.hpp"

namespace nst {

GradCheckResult finite_difference_check(const ScalarFunction& f, const Tensor& input,
                                        const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw PreconditionError("finite_difference_check: eps must be > 0");
  if (options.stencil != 2 && options.stencil != 4) {
    throw PreconditionError("finite_difference_check: stencil must be 2 or 4");
  }

  const Tensor analytic = f.gradient(input);
  if (analytic.shape() != input.shape()) {
    throw InternalError("finite_difference_check: gradient shape differs from input shape");
  }

  std::vector<std::size_t> coords(input.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates != 0 && options.max_coordinates < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  const bool five_point = options.stencil == 4;
  const double reach = five_point ? 2.0 * options.eps : options.eps;
  Tensor plus = input;
  Tensor minus = input;
  Tensor probe = input;
  for (std::size_t i : coords) {
    const float x = input[i];
    plus[i] = static_cast<float>(x + reach);
    minus[i] = static_cast<float>(x - reach);

    if (options.skip && options.skip(minus, plus)) {
      ++result.skipped;
    } else {
      double numeric = 0.0;
      if (five_point) {
        probe[i] = static_cast<float>(x + options.eps);
        const double f1 = f.value(probe);
        const double h1 = static_cast<double>(probe[i]) - x;
        probe[i] = static_cast<float>(x - options.eps);
        const double fm1 = f.value(probe);
        const double hm1 = x - static_cast<double>(probe[i]);
        probe[i] = x;
        const double h = 0.25 * (h1 + hm1 + 0.5 * (static_cast<double>(plus[i]) - static_cast<double>(minus[i])));
        numeric = (-f.value(plus) + 8.0 * f1 - 8.0 * fm1 + f.value(minus)) / (12.0 * h);
      } else {
        const double step = static_cast<double>(plus[i]) - static_cast<double>(minus[i]);
        numeric = (f.value(plus) - f.value(minus)) / step;
      }
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (result.checked == 0 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_index = i;
      }
      ++result.checked;
    }
    plus[i] = x;
    minus[i] = x;
  }
  return result;
}

}  // namespace nst
