#pragma once

#include <span>
#include <string_view>

#include "nst/arch/graph.hpp"

namespace nst::arch {

/// Recognized backbone names: the five full-size feature extractors followed by
/// the desk-scale variants.
std::span<const std::string_view> arch_names() noexcept;
bool is_tiny(std::string_view name) noexcept;

/// Builds the feature-extraction part of a backbone (classification head and
/// auxiliary classifiers excluded). Throws ConfigError listing valid names.
///
/// Tap ordinals: VGG tap k is the k-th conv+ReLU unit, ResNet tap k the output of
/// the k-th bottleneck block, Inception-V3 taps 1-5 the stem convolutions and
/// 6-10 the first five mixed modules. Tiny graphs expose four taps each.
ArchGraph build_arch(std::string_view name);

}  // namespace nst::arch
