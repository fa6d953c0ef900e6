#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "nst/tensor/ops.hpp"

namespace nst::arch {

enum class LayerKind { conv, relu, maxpool, avgpool, batchnorm, add, concat };

std::string_view kind_name(LayerKind kind) noexcept;
LayerKind parse_kind(std::string_view name);

struct ConvSpec {
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;
  bool bias = false;

  ops::ConvGeometry geometry() const { return {stride_h, stride_w, pad_h, pad_w}; }
  bool operator==(const ConvSpec&) const = default;
};

struct PoolSpec {
  int window_h = 2;
  int window_w = 2;
  int stride_h = 2;
  int stride_w = 2;
  int pad_h = 0;
  int pad_w = 0;
  bool operator==(const PoolSpec&) const = default;
};

struct BatchNormSpec {
  float eps = 1e-5f;
  bool operator==(const BatchNormSpec&) const = default;
};

using LayerParams = std::variant<std::monostate, ConvSpec, PoolSpec, BatchNormSpec>;

/// One node of a backbone. A layer with no inputs reads the network input image.
struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::relu;
  LayerParams params;
  std::vector<std::string> inputs;

  const ConvSpec& conv() const { return std::get<ConvSpec>(params); }
  const PoolSpec& pool() const { return std::get<PoolSpec>(params); }
  const BatchNormSpec& batchnorm() const { return std::get<BatchNormSpec>(params); }
  ops::PoolGeometry pool_geometry() const;
  bool operator==(const LayerSpec&) const = default;
};

/// Maps the ordinal feature-extraction points ("Layer 1", "Layer 2", ...) to layer ids.
///
/// Full-size backbones expose ten ordinals. Desk-scale graphs expose fewer; a
/// nominal ordinal on the ten-point scale is mapped onto them by relative depth
/// (see `resolve_nominal`).
struct TapRegistry {
  static constexpr int kNominalDepth = 10;

  std::vector<std::string> layer_ids;  // ordinal k -> layer_ids[k - 1]
  int content_default = 2;
  int style_default = 8;

  int depth() const noexcept { return static_cast<int>(layer_ids.size()); }
  /// Layer id for an ordinal in 1..depth(); ConfigError otherwise.
  const std::string& layer_for(int ordinal) const;
  /// Maps a nominal ordinal in 1..10 to this registry: ceil(k * depth / 10).
  /// The identity for ten-tap registries.
  int resolve_nominal(int nominal) const;
  bool operator==(const TapRegistry&) const = default;
};

/// An immutable, validated, topologically ordered layer DAG.
class ArchGraph {
 public:
  ArchGraph() = default;
  /// Validates unique ids, acyclicity (inputs must precede their consumers),
  /// channel compatibility and tap references. Throws ConfigError.
  ArchGraph(std::string name, std::vector<LayerSpec> layers, TapRegistry taps,
            int input_channels = 3, int min_input = 1);

  const std::string& name() const noexcept { return name_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const TapRegistry& taps() const noexcept { return taps_; }
  int input_channels() const noexcept { return input_channels_; }
  int min_input_size() const noexcept { return min_input_; }

  /// Index of a layer id in topological order; ConfigError if absent.
  std::size_t index_of(std::string_view id) const;
  /// Input layer indices of layer i; -1 denotes the network input image.
  const std::vector<int>& input_indices(std::size_t i) const { return input_index_[i]; }
  /// Channel count of layer i's input (sum for concat) and output.
  int in_channels(std::size_t i) const { return in_channels_[i]; }
  int out_channels(std::size_t i) const { return out_channels_[i]; }
  /// Index of the layer behind tap ordinal k.
  std::size_t tap_index(int ordinal) const { return index_of(taps_.layer_for(ordinal)); }

  /// Output shapes of every layer for an input of the given spatial size.
  std::vector<Shape> infer_shapes(int height, int width) const;
  /// Receptive field (in input pixels) of each layer's output along the widest path.
  std::vector<int> receptive_fields() const;

  nlohmann::json to_json() const;
  static ArchGraph from_json(const nlohmann::json& j);

  bool operator==(const ArchGraph& other) const {
    return name_ == other.name_ && layers_ == other.layers_ && taps_ == other.taps_ &&
           input_channels_ == other.input_channels_ && min_input_ == other.min_input_;
  }

 private:
  std::string name_;
  std::vector<LayerSpec> layers_;
  TapRegistry taps_;
  int input_channels_ = 3;
  int min_input_ = 1;
  std::vector<std::vector<int>> input_index_;
  std::vector<int> in_channels_;
  std::vector<int> out_channels_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace nst::arch
