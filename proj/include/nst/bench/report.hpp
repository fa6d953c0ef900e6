#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nst/bench/runner.hpp"
#include "nst/stats/tests.hpp"

namespace nst::bench {

/// Metric columns of the summary table, in order.
inline constexpr std::string_view kSummaryMetrics[] = {"ssim", "psnr_db", "mse", "deep_feature_distance"};

/// Per-architecture samples of a metric over successful records, groups in
/// first-appearance order. Infinite PSNR values are left out.
std::vector<stats::SampleGroup> metric_groups(std::span<const ExperimentRecord> records, std::string_view metric);

/// One row per architecture: arch, n, then "mean±sd" for each summary metric
/// (sd with n - 1; "NA" when it is undefined).
std::string summary_csv(std::span<const ExperimentRecord> records);

/// Final metrics of every record, timing excluded.
std::string records_csv(std::span<const ExperimentRecord> records);

/// Per-record wall-clock fields; the only nondeterministic table.
std::string timing_csv(std::span<const ExperimentRecord> records);

struct ReportOptions {
  /// Also time a forward pass per architecture (written to forward_timing.csv).
  bool time_forward = false;
};

/// Writes the report bundle into `out_dir`:
///
///   records.csv, records.json            every record
///   summary.csv                          per-arch mean±sd per metric
///   anova_ssim.csv, pairwise_ssim.csv    when at least two archs have two runs each
///   cost.csv                             analytic counts per arch
///   timing.csv [, forward_timing.csv]    wall-clock values
///   box_<metric>.svg                     SSIM, PSNR, deep-feature distance, training time
///   manifest.json                        file list, notes, generation time
///
/// Files are written to a sibling temporary directory that replaces `out_dir`
/// only when complete. An existing `out_dir` is replaced only if it holds a
/// previous report (a manifest.json) or is empty. Returns the written file names.
std::vector<std::string> emit_report(std::span<const ExperimentRecord> records, const std::filesystem::path& out_dir,
                                     const ReportOptions& options = {});

/// Reads records.json from a batch or report directory.
std::vector<ExperimentRecord> load_records(const std::filesystem::path& dir);

}  // namespace nst::bench
