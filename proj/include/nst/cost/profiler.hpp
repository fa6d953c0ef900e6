#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nst/arch/weights.hpp"

namespace nst::cost {

struct ParamCount {
  std::uint64_t learnable = 0;      // conv weights and biases, batchnorm gamma and beta
  std::uint64_t running_stats = 0;  // batchnorm running mean and variance
};

ParamCount count_params(const arch::ArchGraph& graph);

/// FLOPs of one forward pass, 1 multiply-accumulate = 2 FLOPs.
///
///   conv       2 * kh * kw * Cin * Cout * Hout * Wout (bias adds not counted)
///   batchnorm  2 per output element (inference scale and shift)
///   relu, add  1 per output element (add: per extra operand)
///   pooling    window area per output element
///   concat     0
///
/// With `up_to`, only layers in the topological prefix ending at that tap
/// ordinal are counted. ConfigError for an invalid ordinal or input size.
std::uint64_t count_flops(const arch::ArchGraph& graph, int height, int width,
                          std::optional<int> up_to = std::nullopt);

struct ActivationMemory {
  std::uint64_t total_bytes = 0;  // every layer output, 4 bytes per element
  std::uint64_t peak_bytes = 0;   // most bytes live at once in topological order
};

/// The input image itself is not counted. A layer output is live from the step
/// that produces it through its last consumer; the final layer's output stays live.
ActivationMemory activation_memory(const arch::ArchGraph& graph, int height, int width);

struct MachineFingerprint {
  std::string cpu_model;
  unsigned hardware_threads = 0;
  int threads_used = 1;
  std::string simd;
};

MachineFingerprint machine_fingerprint();

struct TimingResult {
  double median_ms = 0.0;
  double cv = 0.0;  // sample standard deviation / mean
  std::vector<double> samples_ms;
  MachineFingerprint machine;
};

/// Wall-clock timing of forward_full on a deterministic input. Timings hold a
/// process-wide lock so no two measurements overlap. PreconditionError unless
/// repeats >= 3 and warmup >= 0.
TimingResult time_forward(const arch::WeightedGraph& weighted, int height, int width, int repeats = 9,
                          int warmup = 2);

struct CostReport {
  std::string arch;
  int input_size = 0;
  std::uint64_t params = 0;
  std::uint64_t running_stats = 0;
  std::uint64_t flops_full = 0;
  int tap = 0;
  std::uint64_t flops_up_to_tap = 0;
  ActivationMemory memory;
  std::optional<TimingResult> timing;

  double params_millions() const noexcept { return static_cast<double>(params) / 1e6; }
  double flops_full_giga() const noexcept { return static_cast<double>(flops_full) / 1e9; }
  double flops_up_to_tap_giga() const noexcept { return static_cast<double>(flops_up_to_tap) / 1e9; }
  double activation_total_gb() const noexcept { return static_cast<double>(memory.total_bytes) / 1e9; }
  double activation_peak_gb() const noexcept { return static_cast<double>(memory.peak_bytes) / 1e9; }
};

/// Counts for `graph` at a square input; `tap` is a graph ordinal. Timing is
/// filled when `weighted` is given.
CostReport profile(const arch::ArchGraph& graph, int size, int tap,
                   const arch::WeightedGraph* weighted = nullptr, int repeats = 9);

nlohmann::json to_json(const CostReport& report);
std::string csv_header();
std::string csv_row(const CostReport& report);
void write_csv(std::span<const CostReport> reports, const std::filesystem::path& path);

}  // namespace nst::cost
