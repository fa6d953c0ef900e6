#pragma once

#include <span>
#include <string>
#include <vector>

#include "nst/stats/tests.hpp"

namespace nst::bench {

/// Tukey box statistics: quartiles by linear interpolation between order
/// statistics, whiskers at the most extreme observations within 1.5 IQR of the box.
struct BoxStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  double mean = 0.0;
  std::vector<double> outliers;
};

/// Quantile q in [0, 1] of ascending `sorted` data (linear interpolation).
double quantile(std::span<const double> sorted, double q);

/// PreconditionError for empty input.
BoxStats box_stats(std::span<const double> values);

/// An 800 x 500 SVG with one box group per sample group, in input order. Each
/// group is a <g class="box-group" data-label="..."> element; outliers are circles
/// and the mean is a small diamond. Contains no timestamps.
std::string box_plot_svg(const std::string& title, const std::string& y_label,
                         std::span<const stats::SampleGroup> groups);

}  // namespace nst::bench
