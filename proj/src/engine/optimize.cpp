#include "nst/engine/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/core.h>
#include <fmt/ranges.h>
#include <fstream>
#include <set>

#include "nst/arch/forward.hpp"
#include "nst/arch/normalize.hpp"
#include "nst/errors.hpp"
#include "nst/simd/kernels.hpp"

namespace nst::engine {

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError(fmt::format("learning rate must be positive, got {}", learning_rate));
  }
  if (max_epochs < 1) throw ConfigError(fmt::format("max_epochs must be >= 1, got {}", max_epochs));
  if (log_interval < 1) throw ConfigError(fmt::format("log_interval must be >= 1, got {}", log_interval));
  for (std::size_t i = 0; i < checkpoint_epochs.size(); ++i) {
    const int e = checkpoint_epochs[i];
    if (e < 1 || e > max_epochs) {
      throw ConfigError(fmt::format("checkpoint epoch {} outside [1, {}]", e, max_epochs));
    }
    if (i > 0 && e <= checkpoint_epochs[i - 1]) {
      throw ConfigError(fmt::format("checkpoint epochs must be strictly increasing: {}",
                                    fmt::join(checkpoint_epochs, ", ")));
    }
  }
  if (style_taps.empty()) throw ConfigError("at least one style tap is required");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
      !(adam_eps > 0.0)) {
    throw ConfigError("Adam parameters must satisfy 0 <= beta < 1 and eps > 0");
  }
  if (time_budget_seconds && !(*time_budget_seconds > 0.0)) {
    throw ConfigError(fmt::format("time budget must be positive, got {}", *time_budget_seconds));
  }
}

LossFunction::LossFunction(const arch::WeightedGraph& graph, const Tensor& content_normalized,
                           const Tensor& style_normalized, LossWeights weights, int content_tap,
                           std::vector<int> style_taps)
    : graph_(&graph), weights_(std::move(weights)), content_tap_(content_tap) {
  if (style_taps.empty()) throw ConfigError("at least one style tap is required");
  if (weights_.layer_weights.empty()) weights_.layer_weights = LossWeights::uniform(style_taps);
  const std::set<int> unique_style(style_taps.begin(), style_taps.end());
  for (const auto& [tap, w] : weights_.layer_weights) {
    if (!unique_style.contains(tap)) {
      throw ConfigError(fmt::format("style weight given for tap {}, which is not a style tap", tap));
    }
  }
  for (int tap : unique_style) {
    if (!weights_.layer_weights.contains(tap)) {
      throw ConfigError(fmt::format("no style weight for style tap {}", tap));
    }
  }
  weights_.validate();
  if (content_normalized.shape() != style_normalized.shape()) {
    throw ConfigError(fmt::format("content image {} and style image {} must have the same shape",
                                  content_normalized.shape().str(), style_normalized.shape().str()));
  }

  std::set<int> all(unique_style);
  all.insert(content_tap_);
  all_taps_.assign(all.begin(), all.end());

  const int content_only[] = {content_tap_};
  content_target_ = arch::forward_with_taps(graph, content_normalized, content_only)
                        .features.at(content_tap_);
  const std::vector<int> style_list(unique_style.begin(), unique_style.end());
  auto style_out = arch::forward_with_taps(graph, style_normalized, style_list);
  for (int tap : style_list) style_targets_.emplace(tap, gram(style_out.features.at(tap)));
}

Objective LossFunction::evaluate(const Tensor& image_normalized, bool with_grad,
                                 const arch::KinkPattern* frozen) const {
  auto out = arch::forward_with_taps(*graph_, image_normalized, all_taps_, frozen);
  Objective obj;
  std::map<int, Tensor> tap_grads;

  auto accumulate = [&](int tap, const Tensor& g, double scale) {
    if (!with_grad || scale == 0.0) return;
    auto [it, inserted] = tap_grads.try_emplace(tap, g.shape());
    auto dst = it->second.data();
    const auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<float>(dst[i] + scale * static_cast<double>(src[i]));
    }
  };

  auto c = content_loss(out.features.at(content_tap_), content_target_);
  obj.content = c.value;
  accumulate(content_tap_, c.grad, weights_.alpha);

  std::vector<WeightedTerm> terms;
  for (const auto& [tap, target] : style_targets_) {
    const double w = weights_.layer_weights.at(tap);
    auto s = style_term(out.features.at(tap), target);
    terms.push_back({w, s.value});
    accumulate(tap, s.grad, weights_.beta * w);
  }
  obj.style = style_loss(terms);
  obj.total = total_loss(obj.content, obj.style, weights_);
  if (with_grad) {
    obj.grad = tap_grads.empty() ? Tensor(image_normalized.shape()) : out.tape.backward(tap_grads);
  }
  return obj;
}

arch::KinkPattern LossFunction::kink_pattern(const Tensor& image_normalized) const {
  return arch::forward_with_taps(*graph_, image_normalized, all_taps_).tape.kink_pattern();
}

OptimizeResult optimize(const Tensor& content, const Tensor& style, const arch::WeightedGraph& graph,
                        const LossWeights& weights, const OptimConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const Tensor content_n = arch::normalize_input(content);
  const LossFunction loss(graph, content_n, arch::normalize_input(style), weights, config.content_tap,
                          config.style_taps);

  Tensor x = content_n;
  Tensor m(x.shape());
  Tensor v(x.shape());
  const auto& kernels = simd::active();
  const std::set<int> checkpoints(config.checkpoint_epochs.begin(), config.checkpoint_epochs.end());

  OptimizeResult result;
  double b1_pow = 1.0;
  double b2_pow = 1.0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const Objective obj = loss.evaluate(x);
    if (!std::isfinite(obj.total) || !obj.grad.all_finite()) {
      throw DivergenceError(epoch, fmt::format("loss diverged at epoch {} (total loss {})", epoch, obj.total));
    }
    const bool is_checkpoint = checkpoints.contains(epoch);
    if (epoch % config.log_interval == 0 || is_checkpoint) {
      result.trace.rows.push_back({epoch, obj.total, obj.content, obj.style, elapsed()});
    }

    b1_pow *= config.adam_beta1;
    b2_pow *= config.adam_beta2;
    const simd::AdamStep step{
        static_cast<float>(config.learning_rate), static_cast<float>(config.adam_beta1),
        static_cast<float>(config.adam_beta2),    static_cast<float>(config.adam_eps),
        static_cast<float>(1.0 - b1_pow),         static_cast<float>(1.0 - b2_pow),
    };
    kernels.adam_update(x.data().data(), m.data().data(), v.data().data(), obj.grad.data().data(),
                        x.size(), step);

    if (is_checkpoint) result.trace.checkpoints.push_back({epoch, arch::denormalize(x)});
    if (config.time_budget_seconds && elapsed() > *config.time_budget_seconds) {
      throw BudgetExceeded(fmt::format("time budget of {} s exceeded at epoch {}",
                                       *config.time_budget_seconds, epoch));
    }
  }
  result.output = arch::denormalize(x);
  return result;
}

void write_trace_csv(const OptimizationTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << "epoch,total_loss,content_loss,style_loss,wall_seconds\n";
  for (const auto& r : trace.rows) {
    out << fmt::format("{},{},{},{},{:.6f}\n", r.epoch, r.total_loss, r.content_loss, r.style_loss,
                       r.wall_seconds);
  }
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

}  // namespace nst::engine
