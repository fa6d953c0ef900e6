#include "nst/arch/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "nst/errors.hpp"

namespace nst::arch {
namespace {

// mt19937_64 is fully specified by the standard; the distributions are not,
// so the transforms below are spelled out to keep weights identical across
// standard libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

ops::ConvWeights conv_shell(const ArchGraph& g, std::size_t i) {
  const ConvSpec& c = g.layers()[i].conv();
  ops::ConvWeights w;
  w.out_channels = c.out_channels;
  w.in_channels = g.in_channels(i);
  w.kernel_h = c.kernel_h;
  w.kernel_w = c.kernel_w;
  return w;
}

// ---- little-endian primitives ------------------------------------------------

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_floats(std::ostream& os, std::span<const float> values) {
  for (float f : values) put_u32(os, std::bit_cast<std::uint32_t>(f));
}

class Reader {
 public:
  Reader(std::istream& is, const std::filesystem::path& path) : is_(is), path_(path) {}

  void bytes(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw LoadError(fmt::format("{}: truncated weight file", path_.string()));
    }
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::vector<float> floats(std::size_t n) {
    std::vector<float> out(n);
    for (float& f : out) f = std::bit_cast<float>(u32());
    return out;
  }

 private:
  std::istream& is_;
  const std::filesystem::path& path_;
};

struct Expected {
  std::string layer;
  std::vector<std::uint32_t> dims;
  std::vector<float>* target;
};

}  // namespace

WeightedGraph init_random(const ArchGraph& graph, std::uint64_t seed) {
  Stream s(seed);
  WeightedGraph out{graph, std::vector<LayerWeights>(graph.layers().size())};
  for (std::size_t i = 0; i < graph.layers().size(); ++i) {
    const LayerSpec& l = graph.layers()[i];
    if (l.kind == LayerKind::conv) {
      ops::ConvWeights w = conv_shell(graph, i);
      const double fan_in = static_cast<double>(w.in_channels) * w.kernel_h * w.kernel_w;
      const double std_dev = std::sqrt(2.0 / fan_in);
      w.weight.resize(w.weight_count());
      for (float& v : w.weight) v = static_cast<float>(std_dev * s.normal());
      if (l.conv().bias) w.bias.assign(static_cast<std::size_t>(w.out_channels), 0.0f);
      out.weights[i] = std::move(w);
    } else if (l.kind == LayerKind::batchnorm) {
      const auto c = static_cast<std::size_t>(graph.out_channels(i));
      ops::BatchNormParams p;
      p.eps = l.batchnorm().eps;
      p.gamma.resize(c);
      p.beta.resize(c);
      p.running_mean.resize(c);
      p.running_var.resize(c);
      for (std::size_t k = 0; k < c; ++k) {
        p.gamma[k] = static_cast<float>(s.uniform(0.8, 1.2));
        p.beta[k] = static_cast<float>(s.uniform(-0.1, 0.1));
        p.running_mean[k] = static_cast<float>(s.uniform(-0.1, 0.1));
        p.running_var[k] = static_cast<float>(s.uniform(0.8, 1.2));
      }
      out.weights[i] = std::move(p);
    }
  }
  return out;
}

void save_weights(const WeightedGraph& weighted, const std::filesystem::path& path) {
  struct Out {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::span<const float> values;
  };
  std::vector<Out> entries;
  const auto& layers = weighted.graph.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string& id = layers[i].id;
    if (const auto* w = std::get_if<ops::ConvWeights>(&weighted.weights[i])) {
      entries.push_back({id + ".weight",
                         {static_cast<std::uint32_t>(w->out_channels), static_cast<std::uint32_t>(w->in_channels),
                          static_cast<std::uint32_t>(w->kernel_h), static_cast<std::uint32_t>(w->kernel_w)},
                         w->weight});
      if (!w->bias.empty()) {
        entries.push_back({id + ".bias", {static_cast<std::uint32_t>(w->bias.size())}, w->bias});
      }
    } else if (const auto* p = std::get_if<ops::BatchNormParams>(&weighted.weights[i])) {
      const auto c = static_cast<std::uint32_t>(p->gamma.size());
      entries.push_back({id + ".gamma", {c}, p->gamma});
      entries.push_back({id + ".beta", {c}, p->beta});
      entries.push_back({id + ".running_mean", {c}, p->running_mean});
      entries.push_back({id + ".running_var", {c}, p->running_var});
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError(fmt::format("cannot open '{}' for writing", path.string()));
  os.write("NSTW1", 5);
  put_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const Out& e : entries) {
    put_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u32(os, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) put_u32(os, d);
    put_floats(os, e.values);
  }
  if (!os) throw LoadError(fmt::format("failed writing '{}'", path.string()));
}

WeightedGraph load_weights(const ArchGraph& graph, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(fmt::format("cannot open weight file '{}'", path.string()));
  Reader r(is, path);

  char magic[5];
  r.bytes(magic, 5);
  if (std::memcmp(magic, "NSTW1", 5) != 0) {
    throw LoadError(fmt::format("{}: bad magic, expected NSTW1", path.string()));
  }

  // Shells for every parameter block the graph needs, keyed by entry name.
  WeightedGraph out{graph, std::vector<LayerWeights>(graph.layers().size())};
  std::map<std::string, Expected> expected;
  for (std::size_t i = 0; i < graph.layers().size(); ++i) {
    const LayerSpec& l = graph.layers()[i];
    if (l.kind == LayerKind::conv) {
      out.weights[i] = conv_shell(graph, i);
      auto& w = std::get<ops::ConvWeights>(out.weights[i]);
      expected[l.id + ".weight"] = {l.id,
                                    {static_cast<std::uint32_t>(w.out_channels), static_cast<std::uint32_t>(w.in_channels),
                                     static_cast<std::uint32_t>(w.kernel_h), static_cast<std::uint32_t>(w.kernel_w)},
                                    &w.weight};
      if (l.conv().bias) {
        expected[l.id + ".bias"] = {l.id, {static_cast<std::uint32_t>(w.out_channels)}, &w.bias};
      }
    } else if (l.kind == LayerKind::batchnorm) {
      ops::BatchNormParams p;
      p.eps = l.batchnorm().eps;
      out.weights[i] = std::move(p);
      auto& bn = std::get<ops::BatchNormParams>(out.weights[i]);
      const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(graph.out_channels(i))};
      expected[l.id + ".gamma"] = {l.id, dims, &bn.gamma};
      expected[l.id + ".beta"] = {l.id, dims, &bn.beta};
      expected[l.id + ".running_mean"] = {l.id, dims, &bn.running_mean};
      expected[l.id + ".running_var"] = {l.id, dims, &bn.running_var};
    }
  }

  const std::uint32_t count = r.u32();
  std::map<std::string, bool> seen;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw LoadError(fmt::format("{}: entry {} has an implausible name length", path.string(), e));
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw LoadError(fmt::format("{}: entry '{}' has rank {}", path.string(), name, rank));
    std::vector<std::uint32_t> dims(rank);
    std::size_t n = 1;
    for (auto& d : dims) {
      d = r.u32();
      n *= d;
    }
    auto it = expected.find(name);
    if (it == expected.end()) {
      throw LoadError(fmt::format("{}: entry '{}' does not belong to any layer of {}", path.string(), name,
                                  graph.name()));
    }
    const Expected& want = it->second;
    if (seen[name]) {
      throw LoadError(fmt::format("{}: layer '{}' has duplicate entry '{}'", path.string(), want.layer, name));
    }
    seen[name] = true;
    if (dims != want.dims) {
      throw LoadError(fmt::format("{}: layer '{}' entry '{}' has dims [{}] but the graph needs [{}]",
                                  path.string(), want.layer, name, fmt::join(dims, ","),
                                  fmt::join(want.dims, ",")));
    }
    *want.target = r.floats(n);
  }

  for (const auto& [name, want] : expected) {
    if (!seen[name]) {
      throw LoadError(fmt::format("{}: layer '{}' is missing entry '{}'", path.string(), want.layer, name));
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw LoadError(fmt::format("{}: trailing bytes after {} entries", path.string(), count));
  }
  return out;
}

}  // namespace nst::arch
