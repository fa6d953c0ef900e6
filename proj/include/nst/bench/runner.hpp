#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nst/bench/config.hpp"
#include "nst/cost/profiler.hpp"
#include "nst/engine/optimize.hpp"

namespace nst::bench {

struct MetricValues {
  double ssim = 0.0;
  std::optional<double> psnr_db;  // absent when the images are identical
  double mse = 0.0;
  double deep_feature_distance = 0.0;
};

struct CheckpointRecord {
  int epoch = 0;
  MetricValues metrics;
  std::string png;  // paths relative to the batch output directory; empty when not written
  std::string raw;
};

enum class RunStatus { ok, diverged, budget_exceeded, failed };

std::string_view status_name(RunStatus s) noexcept;
RunStatus parse_status(std::string_view s);

/// Everything one experiment produced. Timing fields (training_seconds,
/// started_at, finished_at) are excluded from equality and from the
/// deterministic outputs.
struct ExperimentRecord {
  std::size_t index = 0;
  ExperimentConfig config;
  std::string fingerprint;
  std::string graph;  // graph actually optimized
  int content_tap = 0;
  std::vector<int> style_taps;
  RunStatus status = RunStatus::ok;
  std::string failure_reason;
  std::optional<int> failure_epoch;
  std::optional<MetricValues> metrics;  // final output vs content; absent on failure
  std::vector<CheckpointRecord> checkpoints;
  std::vector<engine::TraceRow> trace;
  std::string trace_file;
  std::string output_png;
  std::string output_raw;
  std::string ssim_channel_mode = "luma";
  double training_seconds = 0.0;
  double started_at = 0.0;  // seconds since the batch began
  double finished_at = 0.0;
  cost::MachineFingerprint machine;

  bool same_results(const ExperimentRecord& other) const;
};

nlohmann::json to_json(const ExperimentRecord& record);
ExperimentRecord record_from_json(const nlohmann::json& j);

/// Metrics of `output` against `content`; the deep-feature distance uses a fixed
/// tiny_vgg network shared by every run.
MetricValues evaluate_metrics(const Tensor& output, const Tensor& content);

struct BatchOptions {
  int parallelism = 1;
  /// Where per-run traces and images go (runs/<index>_<tag>_<fingerprint>/).
  /// Nothing is written when unset.
  std::optional<std::filesystem::path> artifacts_dir;
};

/// Worker count actually used: `requested` (0 = hardware threads) capped by
/// NST_BENCH_THREADS when set, and by the number of jobs.
int effective_parallelism(int requested, std::size_t jobs);

/// Runs one experiment; failures become records, never exceptions, except
/// for an unwritable artifacts directory.
ExperimentRecord run_experiment(const ExperimentConfig& config, std::size_t index,
                                const std::optional<std::filesystem::path>& artifacts_dir = std::nullopt);

/// Runs every config on a worker pool. Records come back in input order and
/// each worker owns its run entirely; a failing run does not affect the others.
std::vector<ExperimentRecord> run_batch(std::span<const ExperimentConfig> configs, const BatchOptions& options = {});

}  // namespace nst::bench
