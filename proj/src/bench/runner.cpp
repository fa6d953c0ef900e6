#include "nst/bench/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fmt/core.h>
#include <mutex>
#include <thread>

#include "nst/arch/zoo.hpp"
#include "nst/bench/image_io.hpp"
#include "nst/errors.hpp"
#include "nst/metrics/metrics.hpp"

namespace nst::bench {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

constexpr std::uint64_t kPerceptualSeed = 0x5eed;

const arch::WeightedGraph& perceptual_network() {
  static const arch::WeightedGraph net = arch::init_random(arch::build_arch("tiny_vgg"), kPerceptualSeed);
  return net;
}

double seconds_since(Clock::time_point origin) {
  return std::chrono::duration<double>(Clock::now() - origin).count();
}

json metrics_json(const MetricValues& m) {
  json j{{"ssim", m.ssim}, {"mse", m.mse}, {"deep_feature_distance", m.deep_feature_distance}};
  j["psnr_db"] = m.psnr_db ? json(*m.psnr_db) : json(nullptr);
  if (!m.psnr_db) j["null_reasons"] = {{"psnr_db", "output identical to content (infinite PSNR)"}};
  return j;
}

MetricValues metrics_from_json(const json& j) {
  MetricValues m;
  m.ssim = j.at("ssim").get<double>();
  m.mse = j.at("mse").get<double>();
  m.deep_feature_distance = j.at("deep_feature_distance").get<double>();
  if (!j.at("psnr_db").is_null()) m.psnr_db = j.at("psnr_db").get<double>();
  return m;
}

bool same_metrics(const MetricValues& a, const MetricValues& b) {
  return a.ssim == b.ssim && a.psnr_db == b.psnr_db && a.mse == b.mse &&
         a.deep_feature_distance == b.deep_feature_distance;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.arch = j.at("arch").get<std::string>();
  c.content = j.at("content").get<std::string>();
  c.style = j.at("style").get<std::string>();
  c.image_size = j.at("image_size").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.content_layer = j.at("content_layer").get<int>();
  c.style_layers = j.at("style_layers").get<std::vector<int>>();
  c.style_weights = j.at("style_weights").get<std::vector<double>>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.checkpoint_epochs = j.at("checkpoint_epochs").get<std::vector<int>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.tag = j.at("tag").get<std::string>();
  c.weights_file = j.at("weights_file").get<std::string>();
  if (!j.at("time_budget_seconds").is_null()) c.time_budget_seconds = j.at("time_budget_seconds").get<double>();
  return c;
}

ExperimentRecord run_one(const ExperimentConfig& config, std::size_t index,
                         const std::optional<std::filesystem::path>& artifacts_dir, Clock::time_point origin) {
  ExperimentRecord rec;
  rec.index = index;
  rec.config = config;
  rec.fingerprint = config.fingerprint();
  rec.machine = cost::machine_fingerprint();
  rec.started_at = seconds_since(origin);

  std::filesystem::path run_dir;
  std::string run_rel;
  if (artifacts_dir) {
    run_rel = fmt::format("runs/{:03}_{}_{}", index, config.tag, rec.fingerprint.substr(0, 12));
    run_dir = *artifacts_dir / run_rel;
    std::filesystem::create_directories(run_dir);
  }

  const auto t0 = Clock::now();
  try {
    validate(config, fmt::format("experiment {}", index));
    const arch::ArchGraph graph = arch::build_arch(config.arch);
    rec.graph = graph.name();
    const arch::WeightedGraph weighted = config.weights_file.empty()
                                             ? arch::init_random(graph, config.seed)
                                             : arch::load_weights(graph, config.weights_file);
    const auto& reg = graph.taps();

    engine::LossWeights lw;
    lw.alpha = config.alpha;
    lw.beta = config.beta;
    rec.content_tap = reg.resolve_nominal(config.content_layer);
    for (std::size_t i = 0; i < config.style_layers.size(); ++i) {
      const int tap = reg.resolve_nominal(config.style_layers[i]);
      const double w = config.style_weights.empty() ? 1.0 / static_cast<double>(config.style_layers.size())
                                                    : config.style_weights[i];
      lw.layer_weights[tap] += w;
      rec.style_taps.push_back(tap);
    }

    engine::OptimConfig oc;
    oc.learning_rate = config.learning_rate;
    oc.max_epochs = config.max_epochs;
    oc.checkpoint_epochs = config.checkpoint_epochs;
    oc.content_tap = rec.content_tap;
    oc.style_taps = rec.style_taps;
    oc.seed = config.seed;
    oc.time_budget_seconds = config.time_budget_seconds;

    const Tensor content = load_image(config.content, config.image_size);
    const Tensor style = load_image(config.style, config.image_size);
    const auto result = engine::optimize(content, style, weighted, lw, oc);
    rec.training_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    rec.trace = result.trace.rows;
    rec.metrics = evaluate_metrics(result.output, content);
    for (const auto& cp : result.trace.checkpoints) {
      CheckpointRecord cr{cp.epoch, evaluate_metrics(cp.image, content), {}, {}};
      if (artifacts_dir) {
        cr.png = fmt::format("{}/checkpoint_{:05}.png", run_rel, cp.epoch);
        cr.raw = fmt::format("{}/checkpoint_{:05}.f32", run_rel, cp.epoch);
        write_png(cp.image, *artifacts_dir / cr.png);
        write_raw(cp.image, *artifacts_dir / cr.raw);
      }
      rec.checkpoints.push_back(std::move(cr));
    }
    if (artifacts_dir) {
      rec.trace_file = run_rel + "/trace.csv";
      rec.output_png = run_rel + "/output.png";
      rec.output_raw = run_rel + "/output.f32";
      engine::write_trace_csv(result.trace, *artifacts_dir / rec.trace_file);
      write_png(result.output, *artifacts_dir / rec.output_png);
      write_raw(result.output, *artifacts_dir / rec.output_raw);
    }
  } catch (const DivergenceError& e) {
    rec.status = RunStatus::diverged;
    rec.failure_reason = e.what();
    rec.failure_epoch = e.epoch();
  } catch (const BudgetExceeded& e) {
    rec.status = RunStatus::budget_exceeded;
    rec.failure_reason = e.what();
  } catch (const std::filesystem::filesystem_error&) {
    throw;
  } catch (const std::exception& e) {
    rec.status = RunStatus::failed;
    rec.failure_reason = e.what();
  }
  if (rec.status != RunStatus::ok) {
    rec.metrics.reset();
    rec.training_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  }
  rec.finished_at = seconds_since(origin);
  return rec;
}

}  // namespace

std::string_view status_name(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::diverged: return "diverged";
    case RunStatus::budget_exceeded: return "budget_exceeded";
    case RunStatus::failed: return "failed";
  }
  return "failed";
}

RunStatus parse_status(std::string_view s) {
  if (s == "ok") return RunStatus::ok;
  if (s == "diverged") return RunStatus::diverged;
  if (s == "budget_exceeded") return RunStatus::budget_exceeded;
  if (s == "failed") return RunStatus::failed;
  throw ConfigError(fmt::format("unknown run status '{}'", s));
}

bool ExperimentRecord::same_results(const ExperimentRecord& o) const {
  if (fingerprint != o.fingerprint || status != o.status || graph != o.graph || failure_epoch != o.failure_epoch ||
      metrics.has_value() != o.metrics.has_value() || checkpoints.size() != o.checkpoints.size() ||
      trace.size() != o.trace.size()) {
    return false;
  }
  if (metrics && !same_metrics(*metrics, *o.metrics)) return false;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i].epoch != o.checkpoints[i].epoch ||
        !same_metrics(checkpoints[i].metrics, o.checkpoints[i].metrics)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& a = trace[i];
    const auto& b = o.trace[i];
    if (a.epoch != b.epoch || a.total_loss != b.total_loss || a.content_loss != b.content_loss ||
        a.style_loss != b.style_loss) {
      return false;
    }
  }
  return true;
}

json to_json(const ExperimentRecord& r) {
  json j{
      {"index", r.index},
      {"fingerprint", r.fingerprint},
      {"config", r.config.to_json()},
      {"graph", r.graph},
      {"content_tap", r.content_tap},
      {"style_taps", r.style_taps},
      {"status", status_name(r.status)},
      {"failure_reason", r.failure_reason},
      {"ssim_channel_mode", r.ssim_channel_mode},
      {"trace_file", r.trace_file},
      {"output_png", r.output_png},
      {"output_raw", r.output_raw},
      {"training_seconds", r.training_seconds},
      {"started_at", r.started_at},
      {"finished_at", r.finished_at},
      {"machine",
       {{"cpu_model", r.machine.cpu_model},
        {"hardware_threads", r.machine.hardware_threads},
        {"threads_used", r.machine.threads_used},
        {"simd", r.machine.simd}}},
  };
  j["failure_epoch"] = r.failure_epoch ? json(*r.failure_epoch) : json(nullptr);
  if (r.metrics) {
    j["metrics"] = metrics_json(*r.metrics);
  } else {
    j["metrics"] = nullptr;
    j["metrics_null_reason"] = r.failure_reason;
  }
  json cps = json::array();
  for (const auto& c : r.checkpoints) {
    cps.push_back({{"epoch", c.epoch}, {"metrics", metrics_json(c.metrics)}, {"png", c.png}, {"raw", c.raw}});
  }
  j["checkpoints"] = cps;
  json trace = json::array();
  for (const auto& t : r.trace) trace.push_back({t.epoch, t.total_loss, t.content_loss, t.style_loss, t.wall_seconds});
  j["trace"] = trace;
  return j;
}

ExperimentRecord record_from_json(const json& j) {
  try {
    ExperimentRecord r;
    r.index = j.at("index").get<std::size_t>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.config = config_from_json(j.at("config"));
    r.graph = j.at("graph").get<std::string>();
    r.content_tap = j.at("content_tap").get<int>();
    r.style_taps = j.at("style_taps").get<std::vector<int>>();
    r.status = parse_status(j.at("status").get<std::string>());
    r.failure_reason = j.at("failure_reason").get<std::string>();
    if (!j.at("failure_epoch").is_null()) r.failure_epoch = j.at("failure_epoch").get<int>();
    r.ssim_channel_mode = j.at("ssim_channel_mode").get<std::string>();
    r.trace_file = j.at("trace_file").get<std::string>();
    r.output_png = j.at("output_png").get<std::string>();
    r.output_raw = j.at("output_raw").get<std::string>();
    r.training_seconds = j.at("training_seconds").get<double>();
    r.started_at = j.at("started_at").get<double>();
    r.finished_at = j.at("finished_at").get<double>();
    const json& m = j.at("machine");
    r.machine = {m.at("cpu_model").get<std::string>(), m.at("hardware_threads").get<unsigned>(),
                 m.at("threads_used").get<int>(), m.at("simd").get<std::string>()};
    if (!j.at("metrics").is_null()) r.metrics = metrics_from_json(j.at("metrics"));
    for (const auto& c : j.at("checkpoints")) {
      r.checkpoints.push_back({c.at("epoch").get<int>(), metrics_from_json(c.at("metrics")),
                               c.at("png").get<std::string>(), c.at("raw").get<std::string>()});
    }
    for (const auto& t : j.at("trace")) {
      r.trace.push_back({t.at(0).get<int>(), t.at(1).get<double>(), t.at(2).get<double>(), t.at(3).get<double>(),
                         t.at(4).get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("malformed experiment record: {}", e.what()));
  }
}

MetricValues evaluate_metrics(const Tensor& output, const Tensor& content) {
  MetricValues m;
  m.ssim = metrics::ssim(output, content);
  m.mse = metrics::mse(output, content);
  const double p = metrics::psnr(output, content);
  if (std::isfinite(p)) m.psnr_db = p;
  m.deep_feature_distance = metrics::perceptual_distance(output, content, {}, perceptual_network());
  return m;
}

int effective_parallelism(int requested, std::size_t jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("NST_BENCH_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  n = std::min<int>(n, static_cast<int>(std::max<std::size_t>(jobs, 1)));
  return std::max(n, 1);
}

ExperimentRecord run_experiment(const ExperimentConfig& config, std::size_t index,
                                const std::optional<std::filesystem::path>& artifacts_dir) {
  return run_one(config, index, artifacts_dir, Clock::now());
}

std::vector<ExperimentRecord> run_batch(std::span<const ExperimentConfig> configs, const BatchOptions& options) {
  if (options.artifacts_dir) std::filesystem::create_directories(*options.artifacts_dir / "runs");
  const auto origin = Clock::now();
  std::vector<ExperimentRecord> records(configs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        records[i] = run_one(configs[i], i, options.artifacts_dir, origin);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };

  const int workers = effective_parallelism(options.parallelism, configs.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return records;
}

}  // namespace nst::bench
