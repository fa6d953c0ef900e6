#include "nst/bench/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fmt/core.h>
#include <fstream>
#include <map>
#include <unistd.h>

#include "nst/arch/zoo.hpp"
#include "nst/bench/svg.hpp"
#include "nst/cost/profiler.hpp"
#include "nst/errors.hpp"

namespace nst::bench {

namespace {

using nlohmann::json;

std::optional<double> metric_value(const MetricValues& m, std::string_view metric) {
  if (metric == "ssim") return m.ssim;
  if (metric == "psnr_db") return m.psnr_db;
  if (metric == "mse") return m.mse;
  if (metric == "deep_feature_distance") return m.deep_feature_distance;
  throw PreconditionError(fmt::format("unknown metric '{}'", metric));
}

std::string optional_cell(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

std::vector<stats::SampleGroup> training_time_groups(std::span<const ExperimentRecord> records) {
  std::vector<stats::SampleGroup> groups;
  std::map<std::string, std::size_t> where;
  for (const auto& r : records) {
    if (r.status != RunStatus::ok) continue;
    auto [it, inserted] = where.try_emplace(r.config.arch, groups.size());
    if (inserted) groups.push_back({r.config.arch, {}});
    groups[it->second].values.push_back(r.training_seconds);
  }
  return groups;
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::vector<stats::SampleGroup> metric_groups(std::span<const ExperimentRecord> records, std::string_view metric) {
  std::vector<stats::SampleGroup> groups;
  std::map<std::string, std::size_t> where;
  for (const auto& r : records) {
    if (r.status != RunStatus::ok || !r.metrics) continue;
    auto [it, inserted] = where.try_emplace(r.config.arch, groups.size());
    if (inserted) groups.push_back({r.config.arch, {}});
    if (const auto v = metric_value(*r.metrics, metric)) groups[it->second].values.push_back(*v);
  }
  return groups;
}

std::string summary_csv(std::span<const ExperimentRecord> records) {
  std::string s = "arch,n";
  for (auto m : kSummaryMetrics) s += fmt::format(",{}", m);
  s += '\n';
  std::vector<std::vector<stats::SampleGroup>> per_metric;
  for (auto m : kSummaryMetrics) per_metric.push_back(metric_groups(records, m));
  const auto& ssim_groups = per_metric.front();
  for (std::size_t g = 0; g < ssim_groups.size(); ++g) {
    s += fmt::format("{},{}", ssim_groups[g].label, ssim_groups[g].values.size());
    for (const auto& groups : per_metric) {
      const auto& grp = groups[g];
      if (grp.values.empty()) {
        s += ",NA";
        continue;
      }
      const double mean = grp.mean();
      s += grp.values.size() >= 2 ? fmt::format(",{}±{}", mean, std::sqrt(grp.variance()))
                                  : fmt::format(",{}±NA", mean);
    }
    s += '\n';
  }
  return s;
}

std::string records_csv(std::span<const ExperimentRecord> records) {
  std::string s =
      "index,fingerprint,tag,arch,graph,seed,content_tap,style_taps,status,failure_epoch,ssim,psnr_db,mse,"
      "deep_feature_distance\n";
  for (const auto& r : records) {
    std::string taps;
    for (std::size_t i = 0; i < r.style_taps.size(); ++i) taps += (i ? ";" : "") + std::to_string(r.style_taps[i]);
    s += fmt::format("{},{},{},{},{},{},{},{},{},{}", r.index, r.fingerprint, r.config.tag, r.config.arch, r.graph,
                     r.config.seed, r.content_tap, taps, status_name(r.status),
                     r.failure_epoch ? std::to_string(*r.failure_epoch) : std::string());
    if (r.metrics) {
      s += fmt::format(",{},{},{},{}\n", r.metrics->ssim, optional_cell(r.metrics->psnr_db), r.metrics->mse,
                       r.metrics->deep_feature_distance);
    } else {
      s += ",,,,\n";
    }
  }
  return s;
}

std::string timing_csv(std::span<const ExperimentRecord> records) {
  std::string s = "index,fingerprint,arch,status,training_seconds,started_at,finished_at\n";
  for (const auto& r : records) {
    s += fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f}\n", r.index, r.fingerprint, r.config.arch,
                     status_name(r.status), r.training_seconds, r.started_at, r.finished_at);
  }
  return s;
}

std::vector<std::string> emit_report(std::span<const ExperimentRecord> records, const std::filesystem::path& out_dir,
                                     const ReportOptions& options) {
  namespace fs = std::filesystem;
  if (records.empty()) throw PreconditionError("emit_report needs at least one record");
  if (fs::exists(out_dir)) {
    if (!fs::is_directory(out_dir)) throw ConfigError(fmt::format("{} exists and is not a directory", out_dir.string()));
    if (!fs::is_empty(out_dir) && !fs::exists(out_dir / "manifest.json")) {
      throw ConfigError(fmt::format("{} is not empty and does not hold a previous report", out_dir.string()));
    }
  }
  const fs::path target = fs::absolute(out_dir).lexically_normal();
  const fs::path parent = target.parent_path();
  fs::create_directories(parent);
  const fs::path tmp = parent / fmt::format(".{}.tmp-{}", target.filename().string(), ::getpid());
  fs::remove_all(tmp);
  fs::create_directory(tmp);

  std::vector<std::string> files;
  std::vector<std::string> notes;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file(tmp / name, text);
    files.push_back(name);
  };

  try {
    emit("records.csv", records_csv(records));
    json all = json::array();
    for (const auto& r : records) all.push_back(to_json(r));
    emit("records.json", all.dump(2) + "\n");
    emit("summary.csv", summary_csv(records));

    const auto ssim = metric_groups(records, "ssim");
    std::vector<stats::SampleGroup> usable;
    for (const auto& g : ssim) {
      if (g.values.size() >= 2) usable.push_back(g);
    }
    if (usable.size() >= 2) {
      emit("anova_ssim.csv", stats::anova_csv(stats::one_way_anova(usable)));
      const auto pairs = stats::pairwise_tests(usable);
      emit("pairwise_ssim.csv", stats::pairwise_csv(pairs));
    } else {
      notes.push_back("ANOVA and pairwise tests skipped: fewer than two architectures with two successful runs");
    }

    std::vector<cost::CostReport> costs;
    std::vector<std::string> seen;
    for (const auto& r : records) {
      if (std::find(seen.begin(), seen.end(), r.config.arch) != seen.end()) continue;
      seen.push_back(r.config.arch);
      try {
        const auto graph = arch::build_arch(r.config.arch);
        const int tap = graph.taps().resolve_nominal(graph.taps().style_default);
        std::optional<arch::WeightedGraph> weighted;
        if (options.time_forward) weighted = arch::init_random(graph, r.config.seed);
        costs.push_back(cost::profile(graph, r.config.image_size, tap, weighted ? &*weighted : nullptr));
      } catch (const ConfigError& e) {
        notes.push_back(fmt::format("cost report for {} skipped: {}", r.config.arch, e.what()));
      }
    }
    std::string cost_text = "# FLOPs: 1 multiply-accumulate = 2 FLOPs; memory: float32 activations\n";
    cost_text += "arch,input_size,params_millions,bn_running_stats,flops_full_giga,tap,flops_up_to_tap_giga,"
                 "activation_total_gb,activation_peak_gb\n";
    for (const auto& c : costs) {
      cost_text += fmt::format("{},{},{:.6f},{},{:.6f},{},{:.6f},{:.6f},{:.6f}\n", c.arch, c.input_size,
                               c.params_millions(), c.running_stats, c.flops_full_giga(), c.tap,
                               c.flops_up_to_tap_giga(), c.activation_total_gb(), c.activation_peak_gb());
    }
    emit("cost.csv", cost_text);
    emit("timing.csv", timing_csv(records));
    if (options.time_forward) {
      std::string t = "arch,input_size,forward_ms,forward_cv,repeats,cpu_model,threads_used,simd\n";
      for (const auto& c : costs) {
        t += fmt::format("{},{},{:.4f},{:.4f},{},\"{}\",{},{}\n", c.arch, c.input_size, c.timing->median_ms,
                         c.timing->cv, c.timing->samples_ms.size(), c.timing->machine.cpu_model,
                         c.timing->machine.threads_used, c.timing->machine.simd);
      }
      emit("forward_timing.csv", t);
    }

    emit("box_ssim.svg", box_plot_svg("SSIM by architecture", "SSIM", ssim));
    emit("box_psnr_db.svg", box_plot_svg("PSNR by architecture", "PSNR (dB)", metric_groups(records, "psnr_db")));
    emit("box_deep_feature_distance.svg",
         box_plot_svg("Deep-feature distance by architecture", "deep-feature distance (uncalibrated)",
                      metric_groups(records, "deep_feature_distance")));
    emit("box_training_seconds.svg",
         box_plot_svg("Training time by architecture", "seconds", training_time_groups(records)));

    std::size_t failed = 0;
    for (const auto& r : records) failed += r.status != RunStatus::ok;
    notes.push_back("deep_feature_distance is LPIPS-shaped but uncalibrated; compare it only within this report");
    notes.push_back("SSIM is computed on BT.601 luma over the valid window region");
    json manifest{
        {"generated_at", iso_now()},
        {"records", records.size()},
        {"failed_records", failed},
        {"files", files},
        {"notes", notes},
        {"flop_convention", "1 multiply-accumulate = 2 FLOPs"},
    };
    write_file(tmp / "manifest.json", manifest.dump(2) + "\n");
    files.push_back("manifest.json");

    if (fs::exists(target)) fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  return files;
}

std::vector<ExperimentRecord> load_records(const std::filesystem::path& dir) {
  const auto path = dir / "records.json";
  std::ifstream in(path);
  if (!in) throw LoadError(fmt::format("cannot open {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!j.is_array()) throw LoadError(fmt::format("{}: expected an array of records", path.string()));
  std::vector<ExperimentRecord> out;
  for (const auto& r : j) out.push_back(record_from_json(r));
  return out;
}

}  // namespace nst::bench
