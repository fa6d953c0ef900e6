#include "nst/bench/patterns.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fmt/core.h>
#include <fmt/ranges.h>
#include <numbers>
#include <random>

#include "nst/errors.hpp"

namespace nst::bench {

namespace {

constexpr std::array<std::string_view, 5> kNames = {"kawung", "parang", "truntum", "ceplok", "noise"};

struct Rgb {
  double r, g, b;
};

// Deterministic uniform in [0, 1): top 53 bits of the engine output.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Rgb random_color(std::mt19937_64& rng, double lo, double hi) {
  return {lo + (hi - lo) * unit(rng), lo + (hi - lo) * unit(rng), lo + (hi - lo) * unit(rng)};
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

double smooth(double edge, double x) { return std::clamp((x - edge) * 8.0 + 0.5, 0.0, 1.0); }

}  // namespace

std::span<const std::string_view> pattern_names() noexcept { return kNames; }

PatternRef parse_pattern_ref(std::string_view ref) {
  constexpr std::string_view prefix = "pattern:";
  if (!ref.starts_with(prefix)) throw ConfigError(fmt::format("'{}' is not a pattern reference", ref));
  const std::string_view rest = ref.substr(prefix.size());
  const auto colon = rest.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError(fmt::format("pattern reference '{}' must look like pattern:<name>:<seed>", ref));
  }
  PatternRef out{std::string(rest.substr(0, colon)), 0};
  const std::string_view seed = rest.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), out.seed);
  if (ec != std::errc() || ptr != seed.data() + seed.size() || seed.empty()) {
    throw ConfigError(fmt::format("pattern reference '{}' has an invalid seed", ref));
  }
  if (std::find(kNames.begin(), kNames.end(), out.name) == kNames.end()) {
    throw ConfigError(fmt::format("unknown pattern '{}' (allowed: {})", out.name, fmt::join(kNames, ", ")));
  }
  return out;
}

Tensor make_pattern(std::string_view name, std::uint64_t seed, int size) {
  if (size < 1) throw PreconditionError("pattern size must be positive");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Tensor img(Shape{3, size, size});
  const double pi = std::numbers::pi;

  if (name == "noise") {
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(unit(rng));
    return img;
  }

  const Rgb ground = random_color(rng, 0.55, 0.95);
  const Rgb ink = random_color(rng, 0.05, 0.45);
  const Rgb accent = random_color(rng, 0.2, 0.8);
  const double period = 8.0 + 8.0 * unit(rng);
  const double phase = 2.0 * pi * unit(rng);
  std::vector<std::array<double, 3>> dots;
  if (name == "truntum") {
    const int count = std::max(4, size * size / 64);
    for (int i = 0; i < count; ++i) dots.push_back({unit(rng) * size, unit(rng) * size, 1.0 + 2.0 * unit(rng)});
  }

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Rgb c = ground;
      if (name == "kawung") {
        const double u = std::fmod(x + period / 2, period) / period - 0.5;
        const double v = std::fmod(y + period / 2, period) / period - 0.5;
        const double lobes = std::fabs(std::cos(2.0 * std::atan2(v, u) + phase));
        const double r = std::hypot(u, v);
        c = mix(ground, ink, smooth(0.5, lobes * (0.5 - r) * 3.0));
        c = mix(c, accent, smooth(0.5, 1.0 - r * 12.0));
      } else if (name == "parang") {
        const double d = (x + y) / period + 0.25 * std::sin(2.0 * pi * (x - y) / (2.0 * period) + phase);
        const double band = 0.5 + 0.5 * std::sin(2.0 * pi * d);
        c = mix(ground, ink, smooth(0.55, band));
        c = mix(c, accent, smooth(0.9, 0.5 + 0.5 * std::sin(4.0 * pi * d + phase)) * 0.6);
      } else if (name == "truntum") {
        double best = 1e9;
        for (const auto& dot : dots) best = std::min(best, std::hypot(x - dot[0], y - dot[1]) / dot[2]);
        c = mix(ground, ink, 0.3 + 0.2 * std::sin(2.0 * pi * y / period + phase));
        c = mix(c, accent, smooth(0.5, 1.0 - best));
      } else if (name == "ceplok") {
        const int tx = static_cast<int>(std::floor(x / period));
        const int ty = static_cast<int>(std::floor(y / period));
        const double u = x / period - tx - 0.5;
        const double v = y / period - ty - 0.5;
        c = ((tx + ty) % 2 == 0) ? ground : mix(ground, ink, 0.6);
        c = mix(c, accent, smooth(0.5, 1.0 - (std::fabs(u) + std::fabs(v)) * 3.0));
      } else {
        throw ConfigError(fmt::format("unknown pattern '{}'", name));
      }
      img.at(0, y, x) = static_cast<float>(std::clamp(c.r, 0.0, 1.0));
      img.at(1, y, x) = static_cast<float>(std::clamp(c.g, 0.0, 1.0));
      img.at(2, y, x) = static_cast<float>(std::clamp(c.b, 0.0, 1.0));
    }
  }
  return img;
}

}  // namespace nst::bench
