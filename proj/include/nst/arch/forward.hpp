#pragma once

#include <cstdint>
#include <map>
#include <span>

#include "nst/arch/weights.hpp"

namespace nst::arch {

/// The non-differentiable decisions of one forward pass, by layer index: ReLU
/// on/off per input element and the in-plane input index chosen by each
/// max-pool output. Replaying a pattern evaluates the network on one fixed linear piece.
struct KinkPattern {
  std::map<std::size_t, std::vector<std::uint32_t>> decisions;

  bool operator==(const KinkPattern&) const = default;
};

/// Activations recorded by one forward pass, replayable for the input gradient.
///
/// Refers to the WeightedGraph it was produced from, which must outlive it.
/// Per-run and single-threaded.
class Tape {
 public:
  Tape(const WeightedGraph& weighted, Tensor input, std::vector<Tensor> activations)
      : weighted_(&weighted), input_(std::move(input)), acts_(std::move(activations)) {}

  const Tensor& input() const noexcept { return input_; }
  std::size_t computed_layers() const noexcept { return acts_.size(); }
  const Tensor& activation(std::size_t layer) const { return acts_.at(layer); }

  /// d(loss)/d(input) given d(loss)/d(tap output) for each tapped ordinal.
  Tensor backward(const std::map<int, Tensor>& tap_grads) const;

  /// The non-differentiable decisions taken by this pass. Two passes with equal
  /// patterns lie on the same linear piece of the network.
  KinkPattern kink_pattern() const;

 private:
  const Tensor& input_of(std::size_t layer, std::size_t k) const;

  const WeightedGraph* weighted_;
  Tensor input_;
  std::vector<Tensor> acts_;
};

struct TapOutputs {
  std::map<int, FeatureMap> features;  // by tap ordinal
  Tape tape;
};

/// Runs the graph up to the deepest requested tap. Ordinals are the graph's
/// own (1..taps().depth()); out-of-range ordinals raise ConfigError, as do
/// images below the graph's minimum input size or with the wrong channel count.
/// With `frozen`, ReLU and max-pool layers replay its decisions instead of
/// deciding from their inputs.
TapOutputs forward_with_taps(const WeightedGraph& weighted, const Tensor& image, std::span<const int> taps,
                             const KinkPattern* frozen = nullptr);

/// Runs every layer and returns the last layer's output.
Tensor forward_full(const WeightedGraph& weighted, const Tensor& image);

}  // namespace nst::arch
