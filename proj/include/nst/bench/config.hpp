#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nst::bench {

enum class Preset { desk, full };

std::string_view preset_name(Preset p) noexcept;
Preset parse_preset(std::string_view name);

/// One optimization run. Layer ordinals are nominal (1..10) and are mapped onto
/// the graph's own taps when the run starts.
struct ExperimentConfig {
  std::string arch = "vgg19";
  std::string content;  // image path, or "pattern:<name>:<seed>"
  std::string style;
  int image_size = 512;
  double alpha = 1.0;
  double beta = 1e8;
  int content_layer = 2;
  std::vector<int> style_layers{8};
  std::vector<double> style_weights;  // empty: 1 / |style_layers| each
  double learning_rate = 0.05;
  int max_epochs = 5000;
  std::vector<int> checkpoint_epochs{100, 2500, 5000};
  std::uint64_t seed = 0;
  std::string tag = "baseline";
  std::string weights_file;  // empty: seeded random weights
  std::optional<double> time_budget_seconds;

  /// Canonical form: every field present, keys sorted.
  nlohmann::json to_json() const;
  /// Hex SHA-256 of the canonical JSON text.
  std::string fingerprint() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Table-1 baseline, scaled by the preset: desk uses 64 px and 500 epochs with
/// checkpoints {100, 250, 500}; full uses 512 px and 5000 epochs with {100, 2500, 5000}.
ExperimentConfig preset_defaults(Preset preset);

/// Desk-scale graph standing in for a full-size backbone (identity for tiny names).
std::string desk_arch(std::string_view arch);

/// Recognized variant tags: baseline, variant_a/b/c, shallow, deep, multi, lr_0.01, lr_0.1, lr_0.2.
std::span<const std::string_view> variant_tags() noexcept;

/// Sets the field group a variant tag controls and sets `tag`. ConfigError for
/// unknown tags.
void apply_variant(ExperimentConfig& config, std::string_view tag);

/// Validates ranges, the architecture name and the image references (files
/// must exist, patterns must name a known generator). ConfigError naming `where`.
void validate(const ExperimentConfig& config, const std::string& where = "experiment");

struct LoadedConfig {
  Preset preset = Preset::desk;
  std::vector<ExperimentConfig> experiments;
};

/// Parses the config schema:
///
///   { "preset": "desk" | "full",          optional, default desk
///     "defaults": { <experiment fields> },  optional
///     "experiments": [ { <experiment fields> }, ... ] }
///
/// Precedence: preset, then defaults, then the experiment's own fields; a
/// variant tag then sets its field group and must not contradict an explicit
/// field. Unknown keys are rejected with their JSON path. Relative image paths
/// are resolved against `base_dir`. `preset_override` replaces the file's preset.
LoadedConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                          std::optional<Preset> preset_override = std::nullopt);
LoadedConfig load_config(const std::filesystem::path& path,
                         std::optional<Preset> preset_override = std::nullopt);

/// Factorial ablation sets around `base`, each varying one field group.
struct AblationSets {
  std::vector<ExperimentConfig> weights;  // baseline, variant_a, variant_b, variant_c
  std::vector<ExperimentConfig> layers;   // baseline, shallow, deep, multi
  std::vector<ExperimentConfig> rates;    // baseline, lr_0.01, lr_0.1, lr_0.2

  const std::vector<ExperimentConfig>& set(int index) const;
};

AblationSets make_ablation_sets(const ExperimentConfig& base);

}  // namespace nst::bench
