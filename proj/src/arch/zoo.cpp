#include "nst/arch/zoo.hpp"

#include <array>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "nst/errors.hpp"

namespace nst::arch {
namespace {

constexpr std::array<std::string_view, 8> kNames = {
    "vgg16", "vgg19", "resnet50", "resnet101", "inception_v3", "tiny_vgg", "tiny_resnet", "tiny_inception",
};

class Builder {
 public:
  std::string conv(std::string id, const std::string& in, int cout, int kh, int kw, int stride,
                   int ph, int pw, bool bias) {
    ConvSpec c{cout, kh, kw, stride, stride, ph, pw, bias};
    return push(std::move(id), LayerKind::conv, c, {in});
  }
  std::string relu(std::string id, const std::string& in) {
    return push(std::move(id), LayerKind::relu, std::monostate{}, {in});
  }
  std::string bn(std::string id, const std::string& in, float eps) {
    return push(std::move(id), LayerKind::batchnorm, BatchNormSpec{eps}, {in});
  }
  std::string pool(std::string id, const std::string& in, LayerKind kind, int window, int stride,
                   int pad) {
    return push(std::move(id), kind, PoolSpec{window, window, stride, stride, pad, pad}, {in});
  }
  std::string add(std::string id, const std::string& a, const std::string& b) {
    return push(std::move(id), LayerKind::add, std::monostate{}, {a, b});
  }
  std::string concat(std::string id, std::vector<std::string> ins) {
    return push(std::move(id), LayerKind::concat, std::monostate{}, std::move(ins));
  }

  /// conv (no bias) -> batchnorm -> relu, the Inception "BasicConv2d" unit.
  std::string basic(const std::string& prefix, const std::string& in, int cout, int kh, int kw,
                    int stride, int ph, int pw, float eps) {
    const auto c = conv(prefix + ".conv", in, cout, kh, kw, stride, ph, pw, false);
    return relu(prefix + ".relu", bn(prefix + ".bn", c, eps));
  }

  std::vector<LayerSpec> take() { return std::move(layers_); }

 private:
  // An empty input name means "the network input image".
  std::string push(std::string id, LayerKind kind, LayerParams params, std::vector<std::string> ins) {
    std::erase(ins, std::string{});
    layers_.push_back({id, kind, std::move(params), std::move(ins)});
    return id;
  }
  std::vector<LayerSpec> layers_;
};

TapRegistry first_ten(const std::vector<std::string>& candidates) {
  TapRegistry t;
  t.layer_ids.assign(candidates.begin(), candidates.begin() + 10);
  return t;
}

ArchGraph build_vgg(std::string_view name, std::span<const int> convs_per_block) {
  constexpr int widths[] = {64, 128, 256, 512, 512};
  Builder b;
  std::string x;
  std::vector<std::string> units;
  for (int blk = 0; blk < 5; ++blk) {
    for (int i = 0; i < convs_per_block[blk]; ++i) {
      const auto tag = fmt::format("{}_{}", blk + 1, i + 1);
      x = b.conv("conv" + tag, x, widths[blk], 3, 3, 1, 1, 1, true);
      x = b.relu("relu" + tag, x);
      units.push_back(x);
    }
    x = b.pool(fmt::format("pool{}", blk + 1), x, LayerKind::maxpool, 2, 2, 0);
  }
  return ArchGraph(std::string(name), b.take(), first_ten(units), 3, 64);
}

// Bottleneck v1.5: the stride sits on the 3x3 convolution.
std::string bottleneck(Builder& b, const std::string& prefix, const std::string& in, int width,
                       int stride, bool downsample) {
  constexpr float eps = 1e-5f;
  auto y = b.relu(prefix + ".relu1", b.bn(prefix + ".bn1", b.conv(prefix + ".conv1", in, width, 1, 1, 1, 0, 0, false), eps));
  y = b.relu(prefix + ".relu2", b.bn(prefix + ".bn2", b.conv(prefix + ".conv2", y, width, 3, 3, stride, 1, 1, false), eps));
  y = b.bn(prefix + ".bn3", b.conv(prefix + ".conv3", y, width * 4, 1, 1, 1, 0, 0, false), eps);
  std::string identity = in;
  if (downsample) {
    identity = b.bn(prefix + ".downsample.bn",
                    b.conv(prefix + ".downsample.conv", in, width * 4, 1, 1, stride, 0, 0, false), eps);
  }
  return b.relu(prefix + ".out", b.add(prefix + ".add", y, identity));
}

ArchGraph build_resnet(std::string_view name, std::span<const int> blocks) {
  constexpr int widths[] = {64, 128, 256, 512};
  Builder b;
  auto x = b.conv("conv1", "", 64, 7, 7, 2, 3, 3, false);
  x = b.relu("relu", b.bn("bn1", x, 1e-5f));
  x = b.pool("maxpool", x, LayerKind::maxpool, 3, 2, 1);
  std::vector<std::string> outs;
  for (int stage = 0; stage < 4; ++stage) {
    for (int i = 0; i < blocks[stage]; ++i) {
      const int stride = (i == 0 && stage > 0) ? 2 : 1;
      x = bottleneck(b, fmt::format("layer{}.{}", stage + 1, i), x, widths[stage], stride, i == 0);
      outs.push_back(x);
    }
  }
  return ArchGraph(std::string(name), b.take(), first_ten(outs), 3, 64);
}

// Inception-V3 modules (torchvision layout; batchnorm eps 1e-3).
constexpr float kIncEps = 1e-3f;

std::string inception_a(Builder& b, const std::string& p, const std::string& in, int pool_features) {
  const auto b1 = b.basic(p + ".branch1x1", in, 64, 1, 1, 1, 0, 0, kIncEps);
  auto b5 = b.basic(p + ".branch5x5_1", in, 48, 1, 1, 1, 0, 0, kIncEps);
  b5 = b.basic(p + ".branch5x5_2", b5, 64, 5, 5, 1, 2, 2, kIncEps);
  auto b3 = b.basic(p + ".branch3x3dbl_1", in, 64, 1, 1, 1, 0, 0, kIncEps);
  b3 = b.basic(p + ".branch3x3dbl_2", b3, 96, 3, 3, 1, 1, 1, kIncEps);
  b3 = b.basic(p + ".branch3x3dbl_3", b3, 96, 3, 3, 1, 1, 1, kIncEps);
  auto bp = b.pool(p + ".branch_pool.avg", in, LayerKind::avgpool, 3, 1, 1);
  bp = b.basic(p + ".branch_pool", bp, pool_features, 1, 1, 1, 0, 0, kIncEps);
  return b.concat(p + ".concat", {b1, b5, b3, bp});
}

std::string inception_b(Builder& b, const std::string& p, const std::string& in) {
  const auto b3 = b.basic(p + ".branch3x3", in, 384, 3, 3, 2, 0, 0, kIncEps);
  auto bd = b.basic(p + ".branch3x3dbl_1", in, 64, 1, 1, 1, 0, 0, kIncEps);
  bd = b.basic(p + ".branch3x3dbl_2", bd, 96, 3, 3, 1, 1, 1, kIncEps);
  bd = b.basic(p + ".branch3x3dbl_3", bd, 96, 3, 3, 2, 0, 0, kIncEps);
  const auto bp = b.pool(p + ".branch_pool", in, LayerKind::maxpool, 3, 2, 0);
  return b.concat(p + ".concat", {b3, bd, bp});
}

std::string inception_c(Builder& b, const std::string& p, const std::string& in, int c7) {
  const auto b1 = b.basic(p + ".branch1x1", in, 192, 1, 1, 1, 0, 0, kIncEps);
  auto b7 = b.basic(p + ".branch7x7_1", in, c7, 1, 1, 1, 0, 0, kIncEps);
  b7 = b.basic(p + ".branch7x7_2", b7, c7, 1, 7, 1, 0, 3, kIncEps);
  b7 = b.basic(p + ".branch7x7_3", b7, 192, 7, 1, 1, 3, 0, kIncEps);
  auto bd = b.basic(p + ".branch7x7dbl_1", in, c7, 1, 1, 1, 0, 0, kIncEps);
  bd = b.basic(p + ".branch7x7dbl_2", bd, c7, 7, 1, 1, 3, 0, kIncEps);
  bd = b.basic(p + ".branch7x7dbl_3", bd, c7, 1, 7, 1, 0, 3, kIncEps);
  bd = b.basic(p + ".branch7x7dbl_4", bd, c7, 7, 1, 1, 3, 0, kIncEps);
  bd = b.basic(p + ".branch7x7dbl_5", bd, 192, 1, 7, 1, 0, 3, kIncEps);
  auto bp = b.pool(p + ".branch_pool.avg", in, LayerKind::avgpool, 3, 1, 1);
  bp = b.basic(p + ".branch_pool", bp, 192, 1, 1, 1, 0, 0, kIncEps);
  return b.concat(p + ".concat", {b1, b7, bd, bp});
}

std::string inception_d(Builder& b, const std::string& p, const std::string& in) {
  auto b3 = b.basic(p + ".branch3x3_1", in, 192, 1, 1, 1, 0, 0, kIncEps);
  b3 = b.basic(p + ".branch3x3_2", b3, 320, 3, 3, 2, 0, 0, kIncEps);
  auto b7 = b.basic(p + ".branch7x7x3_1", in, 192, 1, 1, 1, 0, 0, kIncEps);
  b7 = b.basic(p + ".branch7x7x3_2", b7, 192, 1, 7, 1, 0, 3, kIncEps);
  b7 = b.basic(p + ".branch7x7x3_3", b7, 192, 7, 1, 1, 3, 0, kIncEps);
  b7 = b.basic(p + ".branch7x7x3_4", b7, 192, 3, 3, 2, 0, 0, kIncEps);
  const auto bp = b.pool(p + ".branch_pool", in, LayerKind::maxpool, 3, 2, 0);
  return b.concat(p + ".concat", {b3, b7, bp});
}

std::string inception_e(Builder& b, const std::string& p, const std::string& in) {
  const auto b1 = b.basic(p + ".branch1x1", in, 320, 1, 1, 1, 0, 0, kIncEps);
  const auto b3 = b.basic(p + ".branch3x3_1", in, 384, 1, 1, 1, 0, 0, kIncEps);
  const auto b3a = b.basic(p + ".branch3x3_2a", b3, 384, 1, 3, 1, 0, 1, kIncEps);
  const auto b3b = b.basic(p + ".branch3x3_2b", b3, 384, 3, 1, 1, 1, 0, kIncEps);
  auto bd = b.basic(p + ".branch3x3dbl_1", in, 448, 1, 1, 1, 0, 0, kIncEps);
  bd = b.basic(p + ".branch3x3dbl_2", bd, 384, 3, 3, 1, 1, 1, kIncEps);
  const auto bda = b.basic(p + ".branch3x3dbl_3a", bd, 384, 1, 3, 1, 0, 1, kIncEps);
  const auto bdb = b.basic(p + ".branch3x3dbl_3b", bd, 384, 3, 1, 1, 1, 0, kIncEps);
  auto bp = b.pool(p + ".branch_pool.avg", in, LayerKind::avgpool, 3, 1, 1);
  bp = b.basic(p + ".branch_pool", bp, 192, 1, 1, 1, 0, 0, kIncEps);
  return b.concat(p + ".concat", {b1, b3a, b3b, bda, bdb, bp});
}

ArchGraph build_inception_v3() {
  Builder b;
  std::vector<std::string> taps;
  auto x = b.basic("Conv2d_1a_3x3", "", 32, 3, 3, 2, 0, 0, kIncEps);
  taps.push_back(x);
  x = b.basic("Conv2d_2a_3x3", x, 32, 3, 3, 1, 0, 0, kIncEps);
  taps.push_back(x);
  x = b.basic("Conv2d_2b_3x3", x, 64, 3, 3, 1, 1, 1, kIncEps);
  taps.push_back(x);
  x = b.pool("maxpool1", x, LayerKind::maxpool, 3, 2, 0);
  x = b.basic("Conv2d_3b_1x1", x, 80, 1, 1, 1, 0, 0, kIncEps);
  taps.push_back(x);
  x = b.basic("Conv2d_4a_3x3", x, 192, 3, 3, 1, 0, 0, kIncEps);
  taps.push_back(x);
  x = b.pool("maxpool2", x, LayerKind::maxpool, 3, 2, 0);
  x = inception_a(b, "Mixed_5b", x, 32);
  taps.push_back(x);
  x = inception_a(b, "Mixed_5c", x, 64);
  taps.push_back(x);
  x = inception_a(b, "Mixed_5d", x, 64);
  taps.push_back(x);
  x = inception_b(b, "Mixed_6a", x);
  taps.push_back(x);
  x = inception_c(b, "Mixed_6b", x, 128);
  taps.push_back(x);
  x = inception_c(b, "Mixed_6c", x, 160);
  x = inception_c(b, "Mixed_6d", x, 160);
  x = inception_c(b, "Mixed_6e", x, 192);
  x = inception_d(b, "Mixed_7a", x);
  x = inception_e(b, "Mixed_7b", x);
  inception_e(b, "Mixed_7c", x);
  return ArchGraph("inception_v3", b.take(), first_ten(taps), 3, 75);
}

ArchGraph build_tiny_vgg() {
  Builder b;
  std::vector<std::string> taps;
  auto x = b.relu("relu1", b.conv("conv1", "", 8, 3, 3, 1, 1, 1, true));
  taps.push_back(x);
  x = b.relu("relu2", b.conv("conv2", x, 8, 3, 3, 1, 1, 1, true));
  taps.push_back(x);
  x = b.pool("pool", x, LayerKind::maxpool, 2, 2, 0);
  x = b.relu("relu3", b.conv("conv3", x, 16, 3, 3, 1, 1, 1, true));
  taps.push_back(x);
  x = b.relu("relu4", b.conv("conv4", x, 16, 3, 3, 1, 1, 1, true));
  taps.push_back(x);
  return ArchGraph("tiny_vgg", b.take(), TapRegistry{taps, 2, 8}, 3, 8);
}

ArchGraph build_tiny_resnet() {
  constexpr float eps = 1e-5f;
  Builder b;
  std::vector<std::string> taps;
  auto x = b.relu("stem.relu", b.bn("stem.bn", b.conv("stem.conv", "", 8, 3, 3, 1, 1, 1, false), eps));
  taps.push_back(x);
  for (int i = 1; i <= 3; ++i) {
    const auto p = fmt::format("block{}", i);
    auto y = b.relu(p + ".relu1", b.bn(p + ".bn1", b.conv(p + ".conv1", x, 8, 3, 3, 1, 1, 1, false), eps));
    y = b.bn(p + ".bn2", b.conv(p + ".conv2", y, 8, 3, 3, 1, 1, 1, false), eps);
    x = b.relu(p + ".out", b.add(p + ".add", y, x));
    taps.push_back(x);
  }
  return ArchGraph("tiny_resnet", b.take(), TapRegistry{taps, 2, 8}, 3, 4);
}

ArchGraph build_tiny_inception() {
  constexpr float eps = 1e-3f;
  Builder b;
  std::vector<std::string> taps;
  auto x = b.basic("stem1", "", 8, 3, 3, 1, 1, 1, eps);
  taps.push_back(x);
  x = b.basic("stem2", x, 8, 3, 3, 1, 1, 1, eps);
  taps.push_back(x);
  {
    const auto a = b.basic("mixed1.branch1x1", x, 8, 1, 1, 1, 0, 0, eps);
    auto c = b.basic("mixed1.branch3x3_1", x, 4, 1, 1, 1, 0, 0, eps);
    c = b.basic("mixed1.branch3x3_2", c, 8, 3, 3, 1, 1, 1, eps);
    x = b.concat("mixed1.concat", {a, c});
    taps.push_back(x);
  }
  x = b.pool("pool", x, LayerKind::maxpool, 2, 2, 0);
  {
    const auto a = b.basic("mixed2.branch1x1", x, 8, 1, 1, 1, 0, 0, eps);
    auto c = b.basic("mixed2.branch3x3_1", x, 8, 1, 1, 1, 0, 0, eps);
    c = b.basic("mixed2.branch3x3_2", c, 8, 3, 3, 1, 1, 1, eps);
    x = b.concat("mixed2.concat", {a, c});
    taps.push_back(x);
  }
  return ArchGraph("tiny_inception", b.take(), TapRegistry{taps, 2, 8}, 3, 8);
}

}  // namespace

std::span<const std::string_view> arch_names() noexcept { return kNames; }

bool is_tiny(std::string_view name) noexcept { return name.starts_with("tiny_"); }

ArchGraph build_arch(std::string_view name) {
  static constexpr int vgg16[] = {2, 2, 3, 3, 3};
  static constexpr int vgg19[] = {2, 2, 4, 4, 4};
  static constexpr int resnet50[] = {3, 4, 6, 3};
  static constexpr int resnet101[] = {3, 4, 23, 3};
  if (name == "vgg16") return build_vgg(name, vgg16);
  if (name == "vgg19") return build_vgg(name, vgg19);
  if (name == "resnet50") return build_resnet(name, resnet50);
  if (name == "resnet101") return build_resnet(name, resnet101);
  if (name == "inception_v3") return build_inception_v3();
  if (name == "tiny_vgg") return build_tiny_vgg();
  if (name == "tiny_resnet") return build_tiny_resnet();
  if (name == "tiny_inception") return build_tiny_inception();
  throw ConfigError(fmt::format("unknown architecture '{}'; valid names: {}", name,
                                fmt::join(kNames, ", ")));
}

}  // namespace nst::arch
