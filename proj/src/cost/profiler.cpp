#include "nst/cost/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/core.h>
#include <fstream>
#include <mutex>
#include <thread>

#include "nst/arch/forward.hpp"
#include "nst/errors.hpp"
#include "nst/simd/kernels.hpp"

namespace nst::cost {

using arch::LayerKind;

ParamCount count_params(const arch::ArchGraph& graph) {
  ParamCount out;
  const auto& layers = graph.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::conv) {
      const auto& c = l.conv();
      out.learnable += static_cast<std::uint64_t>(c.out_channels) * graph.in_channels(i) * c.kernel_h *
                       c.kernel_w;
      if (c.bias) out.learnable += static_cast<std::uint64_t>(c.out_channels);
    } else if (l.kind == LayerKind::batchnorm) {
      out.learnable += 2ULL * static_cast<std::uint64_t>(graph.out_channels(i));
      out.running_stats += 2ULL * static_cast<std::uint64_t>(graph.out_channels(i));
    }
  }
  return out;
}

std::uint64_t count_flops(const arch::ArchGraph& graph, int height, int width, std::optional<int> up_to) {
  const auto shapes = graph.infer_shapes(height, width);
  const std::size_t end = up_to ? graph.tap_index(*up_to) + 1 : graph.layers().size();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < end; ++i) {
    const auto& l = graph.layers()[i];
    const std::uint64_t out = shapes[i].size();
    switch (l.kind) {
      case LayerKind::conv: {
        const auto& c = l.conv();
        total += 2ULL * c.kernel_h * c.kernel_w * static_cast<std::uint64_t>(graph.in_channels(i)) * out;
        break;
      }
      case LayerKind::batchnorm:
        total += 2ULL * out;
        break;
      case LayerKind::relu:
        total += out;
        break;
      case LayerKind::add:
        total += out * (l.inputs.size() - 1);
        break;
      case LayerKind::maxpool:
      case LayerKind::avgpool:
        total += out * static_cast<std::uint64_t>(l.pool().window_h * l.pool().window_w);
        break;
      case LayerKind::concat:
        break;
    }
  }
  return total;
}

ActivationMemory activation_memory(const arch::ArchGraph& graph, int height, int width) {
  const auto shapes = graph.infer_shapes(height, width);
  const std::size_t n = shapes.size();
  ActivationMemory mem;
  if (n == 0) return mem;
  std::vector<std::size_t> last_use(n);
  for (std::size_t i = 0; i < n; ++i) last_use[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    for (int src : graph.input_indices(i)) {
      if (src >= 0) last_use[static_cast<std::size_t>(src)] = i;
    }
  }
  last_use[n - 1] = n;
  std::vector<std::vector<std::size_t>> frees(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (last_use[i] < n) frees[last_use[i]].push_back(i);
  }
  std::uint64_t live = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bytes = 4ULL * shapes[i].size();
    mem.total_bytes += bytes;
    live += bytes;
    mem.peak_bytes = std::max(mem.peak_bytes, live);
    for (std::size_t j : frees[i]) live -= 4ULL * shapes[j].size();
  }
  return mem;
}

MachineFingerprint machine_fingerprint() {
  MachineFingerprint fp;
  std::ifstream cpuinfo("/proc/cpuinfo");
  for (std::string line; std::getline(cpuinfo, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        fp.cpu_model = line.substr(line.find_first_not_of(' ', colon + 1));
        break;
      }
    }
  }
  if (fp.cpu_model.empty()) fp.cpu_model = "unknown";
  fp.hardware_threads = std::thread::hardware_concurrency();
  fp.simd = std::string(simd::isa_name(simd::active().isa));
  return fp;
}

namespace {

std::mutex& timing_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

TimingResult time_forward(const arch::WeightedGraph& weighted, int height, int width, int repeats,
                          int warmup) {
  if (repeats < 3) throw PreconditionError(fmt::format("time_forward needs at least 3 repeats, got {}", repeats));
  if (warmup < 0) throw PreconditionError("time_forward: warmup must be non-negative");
  Tensor input(Shape{weighted.graph.input_channels(), height, width});
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = static_cast<float>((i * 37 % 101) / 101.0 - 0.5);

  std::lock_guard lock(timing_mutex());
  for (int i = 0; i < warmup; ++i) (void)arch::forward_full(weighted, input);
  TimingResult r;
  r.machine = machine_fingerprint();
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)arch::forward_full(weighted, input);
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::vector<double> sorted = r.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  r.median_ms = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  double mean = 0.0;
  for (double s : sorted) mean += s;
  mean /= static_cast<double>(sorted.size());
  double var = 0.0;
  for (double s : sorted) var += (s - mean) * (s - mean);
  var /= static_cast<double>(sorted.size() - 1);
  r.cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  return r;
}

CostReport profile(const arch::ArchGraph& graph, int size, int tap, const arch::WeightedGraph* weighted,
                   int repeats) {
  CostReport r;
  r.arch = graph.name();
  r.input_size = size;
  const auto p = count_params(graph);
  r.params = p.learnable;
  r.running_stats = p.running_stats;
  r.flops_full = count_flops(graph, size, size);
  r.tap = tap;
  r.flops_up_to_tap = count_flops(graph, size, size, tap);
  r.memory = activation_memory(graph, size, size);
  if (weighted) r.timing = time_forward(*weighted, size, size, repeats);
  return r;
}

nlohmann::json to_json(const CostReport& r) {
  nlohmann::json j{
      {"arch", r.arch},
      {"input_size", r.input_size},
      {"params", r.params},
      {"params_millions", r.params_millions()},
      {"bn_running_stats", r.running_stats},
      {"flops_full", r.flops_full},
      {"flops_full_giga", r.flops_full_giga()},
      {"tap", r.tap},
      {"flops_up_to_tap", r.flops_up_to_tap},
      {"flops_up_to_tap_giga", r.flops_up_to_tap_giga()},
      {"activation_total_bytes", r.memory.total_bytes},
      {"activation_peak_bytes", r.memory.peak_bytes},
      {"flop_convention", "1 MAC = 2 FLOPs"},
  };
  if (r.timing) {
    j["forward_ms"] = r.timing->median_ms;
    j["forward_cv"] = r.timing->cv;
    j["repeats"] = r.timing->samples_ms.size();
    j["machine"] = {{"cpu_model", r.timing->machine.cpu_model},
                    {"hardware_threads", r.timing->machine.hardware_threads},
                    {"threads_used", r.timing->machine.threads_used},
                    {"simd", r.timing->machine.simd}};
  }
  return j;
}

std::string csv_header() {
  return "arch,input_size,params_millions,bn_running_stats,flops_full_giga,tap,flops_up_to_tap_giga,"
         "activation_total_gb,activation_peak_gb,forward_ms,forward_cv";
}

std::string csv_row(const CostReport& r) {
  return fmt::format("{},{},{:.6f},{},{:.6f},{},{:.6f},{:.6f},{:.6f},{},{}", r.arch, r.input_size,
                     r.params_millions(), r.running_stats, r.flops_full_giga(), r.tap,
                     r.flops_up_to_tap_giga(), r.activation_total_gb(), r.activation_peak_gb(),
                     r.timing ? fmt::format("{:.4f}", r.timing->median_ms) : std::string(),
                     r.timing ? fmt::format("{:.4f}", r.timing->cv) : std::string());
}

void write_csv(std::span<const CostReport> reports, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << "# FLOPs: 1 multiply-accumulate = 2 FLOPs; memory: float32 activations\n";
  out << csv_header() << '\n';
  for (const auto& r : reports) out << csv_row(r) << '\n';
}

}  // namespace nst::cost
