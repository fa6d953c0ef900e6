#include "nst/bench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fmt/core.h>

#include "nst/errors.hpp"

namespace nst::bench {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 20.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 70.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw PreconditionError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * t;
}

BoxStats box_stats(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("box statistics of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.q1 = quantile(v, 0.25);
  b.median = quantile(v, 0.5);
  b.q3 = quantile(v, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  double sum = 0.0;
  for (double x : v) {
    sum += x;
    if (x < lo_fence || x > hi_fence) {
      b.outliers.push_back(x);
    } else {
      b.whisker_low = std::min(b.whisker_low, x);
      b.whisker_high = std::max(b.whisker_high, x);
    }
  }
  b.mean = sum / static_cast<double>(v.size());
  return b;
}

std::string box_plot_svg(const std::string& title, const std::string& y_label,
                         std::span<const stats::SampleGroup> groups) {
  std::vector<BoxStats> boxes;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& g : groups) {
    boxes.push_back(box_stats(g.values));
    for (double x : g.values) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (boxes.empty()) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double plot_h = kHeight - kTop - kBottom;
  const double plot_w = kWidth - kLeft - kRight;
  auto y_of = [&](double v) { return kTop + (hi - v) / (hi - lo) * plot_h; };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
      kWidth, kHeight);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += fmt::format("<text x=\"{:.1f}\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                   "font-size=\"18\">{}</text>\n",
                   kWidth / 2, escape(title));
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", kLeft, kTop,
                   kTop + plot_h);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n", kLeft,
                   kTop + plot_h, kLeft + plot_w);
  for (int t = 0; t <= 5; ++t) {
    const double v = lo + (hi - lo) * t / 5.0;
    const double y = y_of(v);
    s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", kLeft - 5, y,
                     kLeft, y);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.2f}\" text-anchor=\"end\" font-family=\"sans-serif\" "
                     "font-size=\"11\">{:.4g}</text>\n",
                     kLeft - 8, y + 4, v);
  }
  s += fmt::format("<text x=\"18\" y=\"{0:.1f}\" transform=\"rotate(-90 18 {0:.1f})\" text-anchor=\"middle\" "
                   "font-family=\"sans-serif\" font-size=\"13\">{1}</text>\n",
                   kTop + plot_h / 2, escape(y_label));

  const double slot = boxes.empty() ? plot_w : plot_w / static_cast<double>(boxes.size());
  const double box_w = std::min(80.0, slot * 0.5);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BoxStats& b = boxes[i];
    const double cx = kLeft + slot * (static_cast<double>(i) + 0.5);
    const double x0 = cx - box_w / 2;
    s += fmt::format("<g class=\"box-group\" data-label=\"{}\">\n", escape(groups[i].label));
    s += fmt::format("  <line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", cx,
                     y_of(b.whisker_high), y_of(b.q3));
    s += fmt::format("  <line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", cx,
                     y_of(b.q1), y_of(b.whisker_low));
    for (double w : {b.whisker_low, b.whisker_high}) {
      s += fmt::format("  <line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n",
                       cx - box_w / 4, y_of(w), cx + box_w / 4, y_of(w));
    }
    s += fmt::format("  <rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#9ecae1\" "
                     "stroke=\"black\"/>\n",
                     x0, y_of(b.q3), box_w, std::max(0.0, y_of(b.q1) - y_of(b.q3)));
    s += fmt::format("  <line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\" "
                     "stroke-width=\"2\"/>\n",
                     x0, y_of(b.median), x0 + box_w, y_of(b.median));
    const double my = y_of(b.mean);
    s += fmt::format("  <polygon points=\"{:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f}\" "
                     "fill=\"#d62728\"/>\n",
                     cx, my - 4, cx + 4, my, cx, my + 4, cx - 4, my);
    for (double o : b.outliers) {
      s += fmt::format("  <circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n", cx,
                       y_of(o));
    }
    s += fmt::format("  <text x=\"{:.2f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                     "font-size=\"12\">{}</text>\n",
                     cx, kTop + plot_h + 20, escape(groups[i].label));
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace nst::bench
