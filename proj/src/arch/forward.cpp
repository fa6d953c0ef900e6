#include "nst/arch/forward.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <optional>

#include "nst/errors.hpp"

namespace nst::arch {
namespace {

void check_image(const ArchGraph& g, const Tensor& image) {
  if (image.channels() != g.input_channels()) {
    throw ConfigError(fmt::format("{}: expects {} input channels, image has {}", g.name(),
                                  g.input_channels(), image.channels()));
  }
  if (image.height() < g.min_input_size() || image.width() < g.min_input_size()) {
    throw ConfigError(fmt::format("{}: input {}x{} below the minimum {}x{}", g.name(), image.height(),
                                  image.width(), g.min_input_size(), g.min_input_size()));
  }
}

const std::vector<std::uint32_t>* frozen_for(const KinkPattern* frozen, std::size_t layer, std::size_t expected) {
  if (!frozen) return nullptr;
  const auto it = frozen->decisions.find(layer);
  if (it == frozen->decisions.end() || it->second.size() != expected) {
    throw PreconditionError(fmt::format("kink pattern does not match layer {}", layer));
  }
  return &it->second;
}

// With `release`, each activation is dropped after its last consumer runs,
// leaving only the final layer's output populated.
std::vector<Tensor> run_prefix(const WeightedGraph& w, const Tensor& image, std::size_t count,
                               bool release = false, const KinkPattern* frozen = nullptr) {
  const ArchGraph& g = w.graph;
  std::vector<Tensor> acts;
  acts.reserve(count);
  std::vector<std::size_t> last_use(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    for (int idx : g.input_indices(i)) {
      if (idx >= 0) last_use[static_cast<std::size_t>(idx)] = i;
    }
  }
  auto in = [&](std::size_t i, std::size_t k) -> const Tensor& {
    const int idx = g.input_indices(i)[k];
    return idx < 0 ? image : acts[static_cast<std::size_t>(idx)];
  };
  for (std::size_t i = 0; i < count; ++i) {
    const LayerSpec& l = g.layers()[i];
    switch (l.kind) {
      case LayerKind::conv:
        acts.push_back(ops::conv2d_forward(in(i, 0), w.conv(i), l.conv().geometry(), l.id));
        break;
      case LayerKind::relu: {
        const Tensor& x = in(i, 0);
        if (const auto* mask = frozen_for(frozen, i, x.size())) {
          Tensor out(x.shape());
          for (std::size_t j = 0; j < x.size(); ++j) out[j] = (*mask)[j] ? x[j] : 0.0f;
          acts.push_back(std::move(out));
        } else {
          acts.push_back(ops::relu(x));
        }
        break;
      }
      case LayerKind::maxpool:
      case LayerKind::avgpool: {
        const Tensor& x = in(i, 0);
        const auto geometry = l.pool_geometry();
        const Shape out_shape = ops::pool2d_output_shape(x.shape(), geometry, l.id);
        const auto* arg = l.kind == LayerKind::maxpool ? frozen_for(frozen, i, out_shape.size()) : nullptr;
        if (arg) {
          Tensor out(out_shape);
          const std::size_t out_plane = out_shape.plane();
          const std::size_t in_plane = x.shape().plane();
          for (std::size_t j = 0; j < out.size(); ++j) out[j] = x[(j / out_plane) * in_plane + (*arg)[j]];
          acts.push_back(std::move(out));
        } else {
          acts.push_back(ops::pool2d(x, geometry, l.id));
        }
        break;
      }
      case LayerKind::batchnorm:
        acts.push_back(ops::batchnorm_inference(in(i, 0), w.batchnorm(i), l.id));
        break;
      case LayerKind::add: {
        Tensor sum = ops::add(in(i, 0), in(i, 1), l.id);
        for (std::size_t k = 2; k < g.input_indices(i).size(); ++k) sum = ops::add(sum, in(i, k), l.id);
        acts.push_back(std::move(sum));
        break;
      }
      case LayerKind::concat: {
        std::vector<const Tensor*> parts;
        for (std::size_t k = 0; k < g.input_indices(i).size(); ++k) parts.push_back(&in(i, k));
        acts.push_back(ops::concat_channels(parts, l.id));
        break;
      }
    }
    if (release) {
      for (int idx : g.input_indices(i)) {
        if (idx >= 0 && last_use[static_cast<std::size_t>(idx)] == i) acts[static_cast<std::size_t>(idx)] = Tensor();
      }
    }
  }
  return acts;
}

void accumulate(std::optional<Tensor>& slot, Tensor g) {
  if (!slot) {
    slot = std::move(g);
    return;
  }
  auto dst = slot->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

const Tensor& Tape::input_of(std::size_t layer, std::size_t k) const {
  const int idx = weighted_->graph.input_indices(layer)[k];
  return idx < 0 ? input_ : acts_[static_cast<std::size_t>(idx)];
}

Tensor Tape::backward(const std::map<int, Tensor>& tap_grads) const {
  const ArchGraph& g = weighted_->graph;
  std::vector<std::optional<Tensor>> grads(acts_.size());
  for (const auto& [ordinal, grad] : tap_grads) {
    const std::size_t idx = g.tap_index(ordinal);
    if (idx >= acts_.size()) {
      throw InternalError(fmt::format("tap {} lies beyond the recorded forward pass", ordinal));
    }
    if (grad.shape() != acts_[idx].shape()) {
      throw InternalError(fmt::format("gradient for tap {} has shape {}, activation {}", ordinal,
                                      grad.shape().str(), acts_[idx].shape().str()));
    }
    accumulate(grads[idx], grad);
  }

  std::optional<Tensor> image_grad;
  auto route = [&](std::size_t layer, std::size_t k, Tensor gin) {
    const int idx = g.input_indices(layer)[k];
    if (idx < 0) {
      accumulate(image_grad, std::move(gin));
    } else {
      accumulate(grads[static_cast<std::size_t>(idx)], std::move(gin));
    }
  };

  for (std::size_t i = acts_.size(); i-- > 0;) {
    if (!grads[i]) continue;
    const Tensor up = std::move(*grads[i]);
    grads[i].reset();
    const LayerSpec& l = g.layers()[i];
    switch (l.kind) {
      case LayerKind::conv:
        route(i, 0,
              ops::conv2d_backward(up, input_of(i, 0).shape(), weighted_->conv(i), l.conv().geometry())
                  .wrt_input);
        break;
      case LayerKind::relu:
        route(i, 0, ops::relu_backward(up, input_of(i, 0)).wrt_input);
        break;
      case LayerKind::maxpool:
      case LayerKind::avgpool:
        route(i, 0, ops::pool2d_backward(up, input_of(i, 0), l.pool_geometry()).wrt_input);
        break;
      case LayerKind::batchnorm:
        route(i, 0, ops::batchnorm_backward(up, weighted_->batchnorm(i)).wrt_input);
        break;
      case LayerKind::add:
        for (std::size_t k = 0; k < g.input_indices(i).size(); ++k) route(i, k, up);
        break;
      case LayerKind::concat: {
        std::vector<int> counts;
        for (std::size_t k = 0; k < g.input_indices(i).size(); ++k) counts.push_back(input_of(i, k).channels());
        auto parts = ops::concat_backward(up, counts);
        for (std::size_t k = 0; k < parts.size(); ++k) route(i, k, std::move(parts[k]));
        break;
      }
    }
  }
  return image_grad ? std::move(*image_grad) : Tensor(input_.shape());
}

KinkPattern Tape::kink_pattern() const {
  const ArchGraph& g = weighted_->graph;
  KinkPattern p;
  for (std::size_t i = 0; i < acts_.size(); ++i) {
    const LayerSpec& l = g.layers()[i];
    if (l.kind == LayerKind::relu) {
      auto& mask = p.decisions[i];
      for (float v : input_of(i, 0).data()) mask.push_back(v > 0.0f ? 1u : 0u);
    } else if (l.kind == LayerKind::maxpool) {
      p.decisions[i] = ops::pool2d_argmax(input_of(i, 0), l.pool_geometry());
    }
  }
  return p;
}

TapOutputs forward_with_taps(const WeightedGraph& weighted, const Tensor& image, std::span<const int> taps,
                             const KinkPattern* frozen) {
  const ArchGraph& g = weighted.graph;
  check_image(g, image);
  std::size_t deepest = 0;
  for (int t : taps) deepest = std::max(deepest, g.tap_index(t) + 1);

  auto acts = run_prefix(weighted, image, deepest, false, frozen);
  std::map<int, FeatureMap> features;
  for (int t : taps) {
    const std::size_t idx = g.tap_index(t);
    features.emplace(t, FeatureMap{g.layers()[idx].id, acts[idx]});
  }
  return {std::move(features), Tape(weighted, image, std::move(acts))};
}

Tensor forward_full(const WeightedGraph& weighted, const Tensor& image) {
  check_image(weighted.graph, image);
  auto acts = run_prefix(weighted, image, weighted.graph.layers().size(), true);
  if (acts.empty()) return image;
  return std::move(acts.back());
}

}  // namespace nst::arch
