#include "nst/bench/image_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fmt/core.h>
#include <fstream>
#include <png.h>
#include <vector>

#include "nst/bench/patterns.hpp"
#include "nst/errors.hpp"

namespace nst::bench {

namespace {

static_assert(std::endian::native == std::endian::little, "raw image I/O assumes a little-endian host");

constexpr std::array<char, 5> kRawMagic = {'N', 'S', 'T', 'F', '1'};

}  // namespace

Tensor read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw LoadError(fmt::format("{}: cannot read PNG: {}", path.string(), image.message));
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw LoadError(fmt::format("{}: cannot decode PNG: {}", path.string(), image.message));
  }
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  Tensor out(Shape{3, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(c, y, x) = buffer[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
      }
    }
  }
  return out;
}

void write_png(const Tensor& image, const std::filesystem::path& path) {
  const int channels = image.channels();
  if (channels != 3 && channels != 1) {
    throw PreconditionError(fmt::format("write_png: expected 1 or 3 channels, got {}", image.shape().str()));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int h = image.height();
  const int w = image.width();
  std::vector<png_byte> buffer(static_cast<std::size_t>(h) * w * channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        buffer[(static_cast<std::size_t>(y) * w + x) * channels + c] =
            static_cast<png_byte>(std::lround(v * 255.0f));
      }
    }
  }
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw std::runtime_error(fmt::format("{}: cannot write PNG: {}", path.string(), png.message));
  }
}

void write_raw(const Tensor& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out.write(kRawMagic.data(), kRawMagic.size());
  const std::array<std::uint32_t, 3> dims = {static_cast<std::uint32_t>(image.channels()),
                                             static_cast<std::uint32_t>(image.height()),
                                             static_cast<std::uint32_t>(image.width())};
  out.write(reinterpret_cast<const char*>(dims.data()), sizeof(dims));
  out.write(reinterpret_cast<const char*>(image.data().data()),
            static_cast<std::streamsize>(image.size() * sizeof(float)));
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

Tensor read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(fmt::format("cannot open {}", path.string()));
  std::array<char, 5> magic{};
  std::array<std::uint32_t, 3> dims{};
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(dims.data()), sizeof(dims));
  if (!in || magic != kRawMagic) throw LoadError(fmt::format("{}: not an NSTF1 image", path.string()));
  const std::uint64_t count = static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
  if (count == 0 || count > (1ULL << 32)) throw LoadError(fmt::format("{}: implausible dimensions", path.string()));
  std::vector<float> data(count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw LoadError(fmt::format("{}: truncated payload", path.string()));
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError(fmt::format("{}: trailing bytes", path.string()));
  return Tensor(Shape{static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])},
                std::move(data));
}

Tensor resize_bilinear(const Tensor& image, int height, int width) {
  if (height < 1 || width < 1) throw PreconditionError("resize target must be positive");
  if (image.height() == height && image.width() == width) return image;
  Tensor out(Shape{image.channels(), height, width});
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top = image.at(c, y0, x0) * (1 - tx) + image.at(c, y0, x1) * tx;
        const double bottom = image.at(c, y1, x0) * (1 - tx) + image.at(c, y1, x1) * tx;
        out.at(c, y, x) = static_cast<float>(top * (1 - ty) + bottom * ty);
      }
    }
  }
  return out;
}

Tensor load_image(const std::string& ref, int size) {
  if (ref.starts_with("pattern:")) {
    const PatternRef p = parse_pattern_ref(ref);
    return make_pattern(p.name, p.seed, size);
  }
  std::ifstream probe(ref, std::ios::binary);
  std::array<char, 5> magic{};
  probe.read(magic.data(), magic.size());
  Tensor img = (probe && magic == kRawMagic) ? read_raw(ref) : read_png(ref);
  if (img.channels() != 3) throw LoadError(fmt::format("{}: expected an RGB image, got {}", ref, img.shape().str()));
  return resize_bilinear(img, size, size);
}

}  // namespace nst::bench
