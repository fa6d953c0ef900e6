#include "nst/bench/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/core.h>
#include <fmt/ranges.h>
#include <fstream>
#include <openssl/evp.h>
#include <set>

#include "nst/arch/zoo.hpp"
#include "nst/bench/patterns.hpp"
#include "nst/errors.hpp"

namespace nst::bench {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 10> kVariantTags = {
    "baseline", "variant_a", "variant_b", "variant_c", "shallow",
    "deep",     "multi",     "lr_0.01",   "lr_0.1",    "lr_0.2",
};

// Keys each tag controls, for contradiction checks.
std::vector<std::string_view> variant_keys(std::string_view tag) {
  if (tag == "variant_a" || tag == "variant_b") return {"beta"};
  if (tag == "variant_c") return {"alpha"};
  if (tag == "shallow" || tag == "deep" || tag == "multi") return {"content_layer", "style_layers", "style_weights"};
  if (tag.starts_with("lr_")) return {"learning_rate"};
  return {};
}

constexpr std::array<std::string_view, 16> kExperimentKeys = {
    "arch",          "content",       "style",         "image_size",        "alpha", "beta",
    "content_layer", "style_layers",  "style_weights", "learning_rate",     "max_epochs",
    "checkpoint_epochs", "seed",      "tag",           "weights_file",      "time_budget_seconds",
};

std::string type_error(const std::string& path, const char* expected, const json& v) {
  return fmt::format("{}: expected {}, got {}", path, expected, v.type_name());
}

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(type_error(path, "a number", v));
  return v.get<double>();
}

std::int64_t get_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) {
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::fabs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    throw ConfigError(type_error(path, "an integer", v));
  }
  return v.get<std::int64_t>();
}

int get_int(const json& v, const std::string& path) {
  const auto i = get_integer(v, path);
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
    throw ConfigError(fmt::format("{}: value {} out of range", path, i));
  }
  return static_cast<int>(i);
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(type_error(path, "a string", v));
  return v.get<std::string>();
}

template <typename T, typename F>
std::vector<T> get_list(const json& v, const std::string& path, F element) {
  if (!v.is_array()) throw ConfigError(type_error(path, "an array", v));
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(element(v[i], fmt::format("{}[{}]", path, i)));
  return out;
}

std::string resolve_image(const std::string& ref, const std::filesystem::path& base_dir) {
  if (ref.empty() || ref.starts_with("pattern:")) return ref;
  std::filesystem::path p(ref);
  if (p.is_relative()) p = base_dir / p;
  return p.lexically_normal().string();
}

// Applies the fields of `obj` onto `cfg`; returns the keys that were set.
std::set<std::string> apply_fields(ExperimentConfig& cfg, const json& obj, const std::string& path,
                                   const std::filesystem::path& base_dir) {
  if (!obj.is_object()) throw ConfigError(type_error(path, "an object", obj));
  std::set<std::string> seen;
  for (const auto& [key, v] : obj.items()) {
    const std::string kp = path + "." + key;
    if (std::find(kExperimentKeys.begin(), kExperimentKeys.end(), key) == kExperimentKeys.end()) {
      throw ConfigError(fmt::format("{}: unknown key (allowed: {})", kp, fmt::join(kExperimentKeys, ", ")));
    }
    seen.insert(key);
    if (key == "arch") cfg.arch = get_string(v, kp);
    else if (key == "content") cfg.content = resolve_image(get_string(v, kp), base_dir);
    else if (key == "style") cfg.style = resolve_image(get_string(v, kp), base_dir);
    else if (key == "image_size") cfg.image_size = get_int(v, kp);
    else if (key == "alpha") cfg.alpha = get_number(v, kp);
    else if (key == "beta") cfg.beta = get_number(v, kp);
    else if (key == "content_layer") cfg.content_layer = get_int(v, kp);
    else if (key == "style_layers") cfg.style_layers = get_list<int>(v, kp, get_int);
    else if (key == "style_weights") cfg.style_weights = get_list<double>(v, kp, get_number);
    else if (key == "learning_rate") cfg.learning_rate = get_number(v, kp);
    else if (key == "max_epochs") cfg.max_epochs = get_int(v, kp);
    else if (key == "checkpoint_epochs") cfg.checkpoint_epochs = get_list<int>(v, kp, get_int);
    else if (key == "seed") {
      const auto s = get_integer(v, kp);
      if (s < 0) throw ConfigError(fmt::format("{}: seed must be non-negative", kp));
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "tag") cfg.tag = get_string(v, kp);
    else if (key == "weights_file") cfg.weights_file = resolve_image(get_string(v, kp), base_dir);
    else if (key == "time_budget_seconds") {
      if (v.is_null()) cfg.time_budget_seconds.reset();
      else cfg.time_budget_seconds = get_number(v, kp);
    }
  }
  return seen;
}

void check_image_ref(const std::string& ref, const std::string& path) {
  if (ref.empty()) throw ConfigError(fmt::format("{}: missing image reference", path));
  if (ref.starts_with("pattern:")) {
    try {
      (void)parse_pattern_ref(ref);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
    return;
  }
  if (!std::filesystem::is_regular_file(ref)) {
    throw ConfigError(fmt::format("{}: image file '{}' does not exist", path, ref));
  }
}

}  // namespace

std::string_view preset_name(Preset p) noexcept { return p == Preset::desk ? "desk" : "full"; }

Preset parse_preset(std::string_view name) {
  if (name == "desk") return Preset::desk;
  if (name == "full") return Preset::full;
  throw ConfigError(fmt::format("unknown preset '{}' (expected desk or full)", name));
}

json ExperimentConfig::to_json() const {
  json j{
      {"arch", arch},
      {"content", content},
      {"style", style},
      {"image_size", image_size},
      {"alpha", alpha},
      {"beta", beta},
      {"content_layer", content_layer},
      {"style_layers", style_layers},
      {"style_weights", style_weights},
      {"learning_rate", learning_rate},
      {"max_epochs", max_epochs},
      {"checkpoint_epochs", checkpoint_epochs},
      {"seed", seed},
      {"tag", tag},
      {"weights_file", weights_file},
  };
  j["time_budget_seconds"] = time_budget_seconds ? json(*time_budget_seconds) : json(nullptr);
  return j;
}

std::string ExperimentConfig::fingerprint() const {
  const std::string text = to_json().dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw InternalError("SHA-256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

ExperimentConfig preset_defaults(Preset preset) {
  ExperimentConfig c;
  if (preset == Preset::desk) {
    c.arch = "tiny_vgg";
    c.image_size = 64;
    c.max_epochs = 500;
    c.checkpoint_epochs = {100, 250, 500};
  }
  c.content = "pattern:kawung:1";
  c.style = "pattern:parang:2";
  return c;
}

std::string desk_arch(std::string_view arch) {
  if (arch == "vgg16" || arch == "vgg19") return "tiny_vgg";
  if (arch == "resnet50" || arch == "resnet101") return "tiny_resnet";
  if (arch == "inception_v3") return "tiny_inception";
  return std::string(arch);
}

std::span<const std::string_view> variant_tags() noexcept { return kVariantTags; }

void apply_variant(ExperimentConfig& c, std::string_view tag) {
  if (tag == "baseline") {
  } else if (tag == "variant_a") {
    c.beta = 1e7;
  } else if (tag == "variant_b") {
    c.beta = 1e9;
  } else if (tag == "variant_c") {
    c.alpha = 10.0;
  } else if (tag == "shallow") {
    c.content_layer = 1;
    c.style_layers = {6};
    c.style_weights.clear();
  } else if (tag == "deep") {
    c.content_layer = 3;
    c.style_layers = {10};
    c.style_weights.clear();
  } else if (tag == "multi") {
    c.content_layer = 2;
    c.style_layers = {6, 8, 10};
    c.style_weights.clear();
  } else if (tag == "lr_0.01") {
    c.learning_rate = 0.01;
  } else if (tag == "lr_0.1") {
    c.learning_rate = 0.1;
  } else if (tag == "lr_0.2") {
    c.learning_rate = 0.2;
  } else {
    throw ConfigError(fmt::format("unknown variant tag '{}' (allowed: {})", tag, fmt::join(kVariantTags, ", ")));
  }
  c.tag = std::string(tag);
}

void validate(const ExperimentConfig& c, const std::string& where) {
  const auto names = arch::arch_names();
  if (std::find(names.begin(), names.end(), c.arch) == names.end()) {
    throw ConfigError(fmt::format("{}.arch: unknown architecture '{}' (allowed: {})", where, c.arch,
                                  fmt::join(names, ", ")));
  }
  check_image_ref(c.content, where + ".content");
  check_image_ref(c.style, where + ".style");
  if (c.image_size < 1) throw ConfigError(fmt::format("{}.image_size: must be positive", where));
  if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) throw ConfigError(fmt::format("{}.alpha: must be >= 0", where));
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw ConfigError(fmt::format("{}.beta: must be >= 0", where));
  if (c.alpha == 0.0 && c.beta == 0.0) throw ConfigError(fmt::format("{}: alpha and beta cannot both be 0", where));
  auto nominal = [&](int k, const std::string& key) {
    if (k < 1 || k > 10) throw ConfigError(fmt::format("{}.{}: layer {} outside 1..10", where, key, k));
  };
  nominal(c.content_layer, "content_layer");
  if (c.style_layers.empty()) throw ConfigError(fmt::format("{}.style_layers: must not be empty", where));
  for (int k : c.style_layers) nominal(k, "style_layers");
  if (!c.style_weights.empty()) {
    if (c.style_weights.size() != c.style_layers.size()) {
      throw ConfigError(fmt::format("{}.style_weights: {} weights for {} style layers", where,
                                    c.style_weights.size(), c.style_layers.size()));
    }
    bool positive = false;
    for (double w : c.style_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError(fmt::format("{}.style_weights: must be >= 0", where));
      positive = positive || w > 0.0;
    }
    if (!positive) throw ConfigError(fmt::format("{}.style_weights: at least one must be positive", where));
  }
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError(fmt::format("{}.learning_rate: must be positive", where));
  }
  if (c.max_epochs < 1) throw ConfigError(fmt::format("{}.max_epochs: must be >= 1", where));
  for (std::size_t i = 0; i < c.checkpoint_epochs.size(); ++i) {
    const int e = c.checkpoint_epochs[i];
    if (e < 1 || e > c.max_epochs || (i > 0 && e <= c.checkpoint_epochs[i - 1])) {
      throw ConfigError(fmt::format("{}.checkpoint_epochs: must be strictly increasing within [1, {}]", where,
                                    c.max_epochs));
    }
  }
  if (std::find(kVariantTags.begin(), kVariantTags.end(), c.tag) == kVariantTags.end()) {
    throw ConfigError(fmt::format("{}.tag: unknown variant '{}'", where, c.tag));
  }
  if (!c.weights_file.empty() && !std::filesystem::is_regular_file(c.weights_file)) {
    throw ConfigError(fmt::format("{}.weights_file: '{}' does not exist", where, c.weights_file));
  }
  if (c.time_budget_seconds && !(*c.time_budget_seconds > 0.0)) {
    throw ConfigError(fmt::format("{}.time_budget_seconds: must be positive", where));
  }
}

LoadedConfig parse_config(const json& j, const std::filesystem::path& base_dir,
                          std::optional<Preset> preset_override) {
  if (!j.is_object()) throw ConfigError(type_error("$", "an object", j));
  for (const auto& [key, v] : j.items()) {
    if (key != "preset" && key != "defaults" && key != "experiments") {
      throw ConfigError(fmt::format("$.{}: unknown key (allowed: preset, defaults, experiments)", key));
    }
  }
  LoadedConfig out;
  if (j.contains("preset")) out.preset = parse_preset(get_string(j["preset"], "$.preset"));
  if (preset_override) out.preset = *preset_override;
  if (!j.contains("experiments")) throw ConfigError("$.experiments: missing");
  const json& list = j["experiments"];
  if (!list.is_array()) throw ConfigError(type_error("$.experiments", "an array", list));
  if (list.empty()) throw ConfigError("$.experiments: no experiments");

  ExperimentConfig base = preset_defaults(out.preset);
  std::set<std::string> default_keys;
  if (j.contains("defaults")) default_keys = apply_fields(base, j["defaults"], "$.defaults", base_dir);

  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = fmt::format("$.experiments[{}]", i);
    ExperimentConfig c = base;
    std::set<std::string> keys = apply_fields(c, list[i], path, base_dir);
    keys.insert(default_keys.begin(), default_keys.end());

    ExperimentConfig tagged = c;
    apply_variant(tagged, c.tag);
    for (std::string_view k : variant_keys(c.tag)) {
      if (keys.contains(std::string(k)) && tagged.to_json()[std::string(k)] != c.to_json()[std::string(k)]) {
        throw ConfigError(fmt::format("{}.{}: contradicts tag '{}'", path, k, c.tag));
      }
    }
    c = tagged;
    if (!keys.contains("checkpoint_epochs")) {
      std::erase_if(c.checkpoint_epochs, [&](int e) { return e >= c.max_epochs; });
      c.checkpoint_epochs.push_back(c.max_epochs);
    }
    if (out.preset == Preset::desk) c.arch = desk_arch(c.arch);
    validate(c, path);
    out.experiments.push_back(std::move(c));
  }
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path, std::optional<Preset> preset_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
  return parse_config(j, path.parent_path(), preset_override);
}

const std::vector<ExperimentConfig>& AblationSets::set(int index) const {
  switch (index) {
    case 1: return weights;
    case 2: return layers;
    case 3: return rates;
    default: throw ConfigError(fmt::format("ablation set must be 1, 2 or 3, got {}", index));
  }
}

AblationSets make_ablation_sets(const ExperimentConfig& base) {
  AblationSets s;
  auto variant = [&](std::string_view tag) {
    ExperimentConfig c = base;
    apply_variant(c, tag);
    return c;
  };
  s.weights = {variant("baseline"), variant("variant_a"), variant("variant_b"), variant("variant_c")};
  s.layers = {variant("baseline"), variant("shallow"), variant("deep"), variant("multi")};
  s.rates = {variant("baseline"), variant("lr_0.01"), variant("lr_0.1"), variant("lr_0.2")};
  return s;
}

}  // namespace nst::bench
