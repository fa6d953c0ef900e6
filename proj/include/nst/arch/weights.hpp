#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>

#include "nst/arch/graph.hpp"

namespace nst::arch {

using LayerWeights = std::variant<std::monostate, ops::ConvWeights, ops::BatchNormParams>;

/// A graph together with one parameter block per conv/batchnorm layer
/// (index-aligned with graph.layers()). Immutable once built; safe to share
/// read-only across threads.
struct WeightedGraph {
  ArchGraph graph;
  std::vector<LayerWeights> weights;

  const ops::ConvWeights& conv(std::size_t i) const { return std::get<ops::ConvWeights>(weights[i]); }
  const ops::BatchNormParams& batchnorm(std::size_t i) const {
    return std::get<ops::BatchNormParams>(weights[i]);
  }
};

/// He-normal (std = sqrt(2 / fan_in)) convolution weights with zero bias, and
/// mildly perturbed batchnorm statistics, all drawn from one seeded stream.
WeightedGraph init_random(const ArchGraph& graph, std::uint64_t seed);

/// Writes the NSTW1 weight file:
///
///   "NSTW1"            5 bytes magic
///   u32                entry count
///   per entry:
///     u32 + bytes      entry name, UTF-8: "<layer-id>.<param>"
///     u32              rank
///     u32[rank]        dims
///     f32[prod(dims)]  payload
///
/// All integers and floats little-endian. Conv layers contribute "weight"
/// (Cout, Cin, kh, kw) and, when biased, "bias" (Cout); batchnorm layers
/// contribute "gamma", "beta", "running_mean", "running_var" (C each).
void save_weights(const WeightedGraph& weighted, const std::filesystem::path& path);

/// Reads an NSTW1 file against `graph`. Every parameter must be present exactly
/// once with matching dims; violations raise LoadError naming the layer.
WeightedGraph load_weights(const ArchGraph& graph, const std::filesystem::path& path);

}  // namespace nst::arch
