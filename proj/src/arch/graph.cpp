#include "nst/arch/graph.hpp"

#include <algorithm>
#include <fmt/format.h>

#include "nst/errors.hpp"

namespace nst::arch {

namespace {
constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::conv, "conv"},         {LayerKind::relu, "relu"},
    {LayerKind::maxpool, "maxpool"},   {LayerKind::avgpool, "avgpool"},
    {LayerKind::batchnorm, "batchnorm"}, {LayerKind::add, "add"},
    {LayerKind::concat, "concat"},
};
}  // namespace

std::string_view kind_name(LayerKind kind) noexcept {
  for (const auto& [k, n] : kKindNames) {
    if (k == kind) return n;
  }
  return "unknown";
}

LayerKind parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError(fmt::format("unknown layer kind '{}'", name));
}

ops::PoolGeometry LayerSpec::pool_geometry() const {
  const PoolSpec& p = pool();
  return {kind == LayerKind::maxpool ? ops::PoolKind::max : ops::PoolKind::avg,
          p.window_h, p.window_w, p.stride_h, p.stride_w, p.pad_h, p.pad_w};
}

const std::string& TapRegistry::layer_for(int ordinal) const {
  if (ordinal < 1 || ordinal > depth()) {
    throw ConfigError(fmt::format("tap ordinal {} out of range: graph has taps 1..{}", ordinal, depth()));
  }
  return layer_ids[static_cast<std::size_t>(ordinal - 1)];
}

int TapRegistry::resolve_nominal(int nominal) const {
  if (nominal < 1 || nominal > kNominalDepth) {
    throw ConfigError(fmt::format("nominal tap ordinal {} out of range 1..{}", nominal, kNominalDepth));
  }
  if (depth() >= kNominalDepth) return nominal;
  return std::max(1, (nominal * depth() + kNominalDepth - 1) / kNominalDepth);
}

ArchGraph::ArchGraph(std::string name, std::vector<LayerSpec> layers, TapRegistry taps,
                     int input_channels, int min_input)
    : name_(std::move(name)),
      layers_(std::move(layers)),
      taps_(std::move(taps)),
      input_channels_(input_channels),
      min_input_(min_input) {
  const std::size_t n = layers_.size();
  input_index_.resize(n);
  in_channels_.resize(n);
  out_channels_.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const LayerSpec& l = layers_[i];
    if (l.id.empty()) throw ConfigError(fmt::format("{}: layer #{} has an empty id", name_, i));

    // Inputs must already be registered, which rules out cycles and forward references.
    std::vector<int> ins;
    std::vector<int> in_ch;
    if (l.inputs.empty()) {
      ins.push_back(-1);
      in_ch.push_back(input_channels_);
    }
    for (const std::string& src : l.inputs) {
      auto it = index_.find(src);
      if (it == index_.end()) {
        throw ConfigError(fmt::format("{}: layer '{}' reads '{}' which is not defined before it",
                                      name_, l.id, src));
      }
      ins.push_back(static_cast<int>(it->second));
      in_ch.push_back(out_channels_[it->second]);
    }
    if (!index_.emplace(l.id, i).second) {
      throw ConfigError(fmt::format("{}: duplicate layer id '{}'", name_, l.id));
    }

    const bool multi = l.kind == LayerKind::add || l.kind == LayerKind::concat;
    if (!multi && ins.size() != 1) {
      throw ConfigError(fmt::format("{}: layer '{}' ({}) takes exactly one input", name_, l.id,
                                    kind_name(l.kind)));
    }
    if (multi && ins.size() < 2) {
      throw ConfigError(fmt::format("{}: layer '{}' ({}) needs at least two inputs", name_, l.id,
                                    kind_name(l.kind)));
    }

    int total = 0;
    for (int c : in_ch) total += c;
    switch (l.kind) {
      case LayerKind::conv:
        if (!std::holds_alternative<ConvSpec>(l.params) || l.conv().out_channels < 1) {
          throw ConfigError(fmt::format("{}: conv layer '{}' lacks a valid spec", name_, l.id));
        }
        in_channels_[i] = in_ch[0];
        out_channels_[i] = l.conv().out_channels;
        break;
      case LayerKind::maxpool:
      case LayerKind::avgpool:
        if (!std::holds_alternative<PoolSpec>(l.params)) {
          throw ConfigError(fmt::format("{}: pool layer '{}' lacks a pool spec", name_, l.id));
        }
        in_channels_[i] = out_channels_[i] = in_ch[0];
        break;
      case LayerKind::batchnorm:
        if (!std::holds_alternative<BatchNormSpec>(l.params)) {
          throw ConfigError(fmt::format("{}: batchnorm layer '{}' lacks a spec", name_, l.id));
        }
        in_channels_[i] = out_channels_[i] = in_ch[0];
        break;
      case LayerKind::relu:
        in_channels_[i] = out_channels_[i] = in_ch[0];
        break;
      case LayerKind::add:
        for (int c : in_ch) {
          if (c != in_ch[0]) {
            throw ConfigError(fmt::format("{}: add layer '{}' mixes {} and {} channels", name_,
                                          l.id, in_ch[0], c));
          }
        }
        in_channels_[i] = out_channels_[i] = in_ch[0];
        break;
      case LayerKind::concat:
        in_channels_[i] = out_channels_[i] = total;
        break;
    }
    input_index_[i] = std::move(ins);
  }

  std::size_t prev = 0;
  for (int k = 1; k <= taps_.depth(); ++k) {
    const auto it = index_.find(taps_.layer_for(k));
    if (it == index_.end()) {
      throw ConfigError(fmt::format("{}: tap {} references unknown layer '{}'", name_, k,
                                    taps_.layer_for(k)));
    }
    if (k > 1 && it->second <= prev) {
      throw ConfigError(fmt::format("{}: tap ordinals must increase with depth (tap {})", name_, k));
    }
    prev = it->second;
  }
}

std::size_t ArchGraph::index_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ConfigError(fmt::format("{}: no layer '{}'", name_, id));
  return it->second;
}

std::vector<Shape> ArchGraph::infer_shapes(int height, int width) const {
  const Shape input{input_channels_, height, width};
  std::vector<Shape> shapes(layers_.size());
  auto in_shape = [&](std::size_t i, std::size_t k) {
    const int idx = input_index_[i][k];
    return idx < 0 ? input : shapes[static_cast<std::size_t>(idx)];
  };
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    const Shape in = in_shape(i, 0);
    switch (l.kind) {
      case LayerKind::conv: {
        const ConvSpec& c = l.conv();
        ops::ConvWeights w;
        w.out_channels = c.out_channels;
        w.in_channels = in_channels_[i];
        w.kernel_h = c.kernel_h;
        w.kernel_w = c.kernel_w;
        shapes[i] = ops::conv2d_output_shape(in, w, c.geometry(), l.id);
        break;
      }
      case LayerKind::maxpool:
      case LayerKind::avgpool:
        shapes[i] = ops::pool2d_output_shape(in, l.pool_geometry(), l.id);
        break;
      case LayerKind::relu:
      case LayerKind::batchnorm:
        shapes[i] = in;
        break;
      case LayerKind::add:
      case LayerKind::concat: {
        Shape out = in;
        out.channels = 0;
        for (std::size_t k = 0; k < input_index_[i].size(); ++k) {
          const Shape s = in_shape(i, k);
          if (s.height != in.height || s.width != in.width) {
            throw ConfigError(fmt::format("layer '{}': inputs disagree on spatial size ({} vs {})",
                                          l.id, in.str(), s.str()));
          }
          out.channels += s.channels;
        }
        if (l.kind == LayerKind::add) out.channels = in.channels;
        shapes[i] = out;
        break;
      }
    }
  }
  return shapes;
}

std::vector<int> ArchGraph::receptive_fields() const {
  struct Field {
    int rf_h = 1, rf_w = 1, jump_h = 1, jump_w = 1;
  };
  std::vector<Field> f(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Field in;
    bool first = true;
    for (int idx : input_index_[i]) {
      const Field src = idx < 0 ? Field{} : f[static_cast<std::size_t>(idx)];
      if (first) {
        in = src;
        first = false;
      } else {
        in.rf_h = std::max(in.rf_h, src.rf_h);
        in.rf_w = std::max(in.rf_w, src.rf_w);
        in.jump_h = std::max(in.jump_h, src.jump_h);
        in.jump_w = std::max(in.jump_w, src.jump_w);
      }
    }
    const LayerSpec& l = layers_[i];
    int kh = 1, kw = 1, sh = 1, sw = 1;
    if (l.kind == LayerKind::conv) {
      kh = l.conv().kernel_h, kw = l.conv().kernel_w, sh = l.conv().stride_h, sw = l.conv().stride_w;
    } else if (l.kind == LayerKind::maxpool || l.kind == LayerKind::avgpool) {
      kh = l.pool().window_h, kw = l.pool().window_w, sh = l.pool().stride_h, sw = l.pool().stride_w;
    }
    f[i] = {in.rf_h + (kh - 1) * in.jump_h, in.rf_w + (kw - 1) * in.jump_w, in.jump_h * sh,
            in.jump_w * sw};
  }
  std::vector<int> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = std::max(f[i].rf_h, f[i].rf_w);
  return out;
}

nlohmann::json ArchGraph::to_json() const {
  using nlohmann::json;
  json layers = json::array();
  for (const LayerSpec& l : layers_) {
    json j{{"id", l.id}, {"kind", kind_name(l.kind)}, {"inputs", l.inputs}};
    if (const auto* c = std::get_if<ConvSpec>(&l.params)) {
      j["out_channels"] = c->out_channels;
      j["kernel"] = {c->kernel_h, c->kernel_w};
      j["stride"] = {c->stride_h, c->stride_w};
      j["pad"] = {c->pad_h, c->pad_w};
      j["bias"] = c->bias;
    } else if (const auto* p = std::get_if<PoolSpec>(&l.params)) {
      j["window"] = {p->window_h, p->window_w};
      j["stride"] = {p->stride_h, p->stride_w};
      j["pad"] = {p->pad_h, p->pad_w};
    } else if (const auto* b = std::get_if<BatchNormSpec>(&l.params)) {
      j["eps"] = b->eps;
    }
    layers.push_back(std::move(j));
  }
  return json{{"name", name_},
              {"input_channels", input_channels_},
              {"min_input", min_input_},
              {"layers", std::move(layers)},
              {"taps",
               {{"layers", taps_.layer_ids},
                {"content_default", taps_.content_default},
                {"style_default", taps_.style_default}}}};
}

ArchGraph ArchGraph::from_json(const nlohmann::json& j) {
  try {
    std::vector<LayerSpec> layers;
    for (const auto& jl : j.at("layers")) {
      LayerSpec l;
      l.id = jl.at("id").get<std::string>();
      l.kind = parse_kind(jl.at("kind").get<std::string>());
      l.inputs = jl.at("inputs").get<std::vector<std::string>>();
      switch (l.kind) {
        case LayerKind::conv: {
          ConvSpec c;
          c.out_channels = jl.at("out_channels").get<int>();
          c.kernel_h = jl.at("kernel").at(0), c.kernel_w = jl.at("kernel").at(1);
          c.stride_h = jl.at("stride").at(0), c.stride_w = jl.at("stride").at(1);
          c.pad_h = jl.at("pad").at(0), c.pad_w = jl.at("pad").at(1);
          c.bias = jl.at("bias").get<bool>();
          l.params = c;
          break;
        }
        case LayerKind::maxpool:
        case LayerKind::avgpool: {
          PoolSpec p;
          p.window_h = jl.at("window").at(0), p.window_w = jl.at("window").at(1);
          p.stride_h = jl.at("stride").at(0), p.stride_w = jl.at("stride").at(1);
          p.pad_h = jl.at("pad").at(0), p.pad_w = jl.at("pad").at(1);
          l.params = p;
          break;
        }
        case LayerKind::batchnorm:
          l.params = BatchNormSpec{jl.at("eps").get<float>()};
          break;
        default:
          break;
      }
      layers.push_back(std::move(l));
    }
    TapRegistry taps;
    taps.layer_ids = j.at("taps").at("layers").get<std::vector<std::string>>();
    taps.content_default = j.at("taps").at("content_default").get<int>();
    taps.style_default = j.at("taps").at("style_default").get<int>();
    return ArchGraph(j.at("name").get<std::string>(), std::move(layers), std::move(taps),
                     j.at("input_channels").get<int>(), j.at("min_input").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed graph description: ") + e.what());
  }
}

}  // namespace nst::arch
