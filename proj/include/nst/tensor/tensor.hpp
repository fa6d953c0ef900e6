#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nst {

/// Channels x height x width extent of an image or activation.
struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  std::size_t plane() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense C x H x W float tensor, row-major (channel, row, column).
///
/// Holds images (pixel intensities, normalized or not), activations and their
/// gradients. Value semantic; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  int channels() const noexcept { return shape_.channels; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> channel(int c) noexcept { return {data_.data() + c * shape_.plane(), shape_.plane()}; }
  std::span<const float> channel(int c) const noexcept {
    return {data_.data() + c * shape_.plane(), shape_.plane()};
  }

  float& at(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }
  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  bool all_finite() const noexcept;
  bool operator==(const Tensor&) const = default;

 private:
  std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_{};
  std::vector<float> data_;
};

using ImageTensor = Tensor;

/// A tapped activation viewed as an N_l x M_l matrix: one row per filter,
/// one column per spatial position. The row data is the tensor's own storage.
struct FeatureMap {
  std::string layer_id;
  Tensor tensor;

  int filters() const noexcept { return tensor.channels(); }
  std::size_t positions() const noexcept { return tensor.shape().plane(); }
  std::span<const float> row(int i) const noexcept { return tensor.channel(i); }
};

/// Gradient of a scalar with respect to a layer's input. Weight gradients are
/// never formed: the image is the only optimization variable.
struct LayerGrad {
  Tensor wrt_input;
};

}  // namespace nst
