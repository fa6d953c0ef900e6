#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "nst/tensor/tensor.hpp"

namespace nst::bench {

/// Procedural batik-style test images: repeating motifs built from sines,
/// stripes and dots, with colors and phases drawn from the seed.
///
///   kawung   four-lobed rosettes on a square lattice
///   parang   diagonal wave bands
///   truntum  scattered small star dots
///   ceplok   checkerboard tiles with inset diamonds
///   noise    uniform RGB noise
std::span<const std::string_view> pattern_names() noexcept;

struct PatternRef {
  std::string name;
  std::uint64_t seed = 0;
};

/// Parses "pattern:<name>:<seed>"; ConfigError if malformed or unknown.
PatternRef parse_pattern_ref(std::string_view ref);

/// A size x size RGB image with values in [0, 1]. Deterministic.
Tensor make_pattern(std::string_view name, std::uint64_t seed, int size);

}  // namespace nst::bench
