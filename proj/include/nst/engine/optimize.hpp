#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "nst/arch/forward.hpp"
#include "nst/engine/losses.hpp"

namespace nst::engine {

/// Pixel-space optimization settings. Tap ordinals are the graph's own.
struct OptimConfig {
  double learning_rate = 0.05;
  int max_epochs = 5000;
  std::vector<int> checkpoint_epochs;  // sorted, each in [1, max_epochs]
  int content_tap = 2;
  std::vector<int> style_taps{8};
  std::uint64_t seed = 0;
  int log_interval = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Wall-clock limit; exceeding it raises BudgetExceeded.
  std::optional<double> time_budget_seconds;

  void validate() const;
};

struct TraceRow {
  int epoch = 0;
  double total_loss = 0.0;
  double content_loss = 0.0;
  double style_loss = 0.0;
  double wall_seconds = 0.0;
};

struct Checkpoint {
  int epoch = 0;
  Tensor image;  // RGB in [0, 1]
};

struct OptimizationTrace {
  std::vector<TraceRow> rows;
  std::vector<Checkpoint> checkpoints;
};

struct OptimizeResult {
  Tensor output;  // RGB in [0, 1]
  OptimizationTrace trace;
};

/// Optimizes an image starting from the content image so that its content tap
/// matches `content` and its style-tap Grams match `style`. Both inputs are RGB
/// in [0, 1] with equal spatial size. Rows are logged at every multiple of
/// log_interval and at every checkpoint epoch, after the loss for that epoch is
/// evaluated and before the update. Checkpoint images are taken after the update.
///
/// Raises DivergenceError at the first non-finite loss, BudgetExceeded past the
/// time budget, ConfigError for invalid settings. Single-threaded and
/// bit-reproducible.
OptimizeResult optimize(const Tensor& content, const Tensor& style, const arch::WeightedGraph& graph,
                        const LossWeights& weights, const OptimConfig& config);

/// Total, content and style loss of a normalized image, with the gradient
/// with respect to that image. Exposed for gradient checking.
struct Objective {
  double total = 0.0;
  double content = 0.0;
  double style = 0.0;
  Tensor grad;
};

class LossFunction {
 public:
  /// Targets are extracted from the normalized content and style images.
  LossFunction(const arch::WeightedGraph& graph, const Tensor& content_normalized,
               const Tensor& style_normalized, LossWeights weights, int content_tap,
               std::vector<int> style_taps);

  /// With `frozen`, the network is evaluated on that fixed linear piece.
  Objective evaluate(const Tensor& image_normalized, bool with_grad = true,
                     const arch::KinkPattern* frozen = nullptr) const;
  /// ReLU and max-pool decisions of a forward pass over the taps used here.
  arch::KinkPattern kink_pattern(const Tensor& image_normalized) const;

 private:
  const arch::WeightedGraph* graph_;
  LossWeights weights_;
  int content_tap_;
  std::vector<int> all_taps_;
  FeatureMap content_target_;
  std::map<int, GramMatrix> style_targets_;
};

/// Writes epoch,total_loss,content_loss,style_loss,wall_seconds.
void write_trace_csv(const OptimizationTrace& trace, const std::filesystem::path& path);

}  // namespace nst::engine
