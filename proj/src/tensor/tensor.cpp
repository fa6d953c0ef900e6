#include "nst/tensor/tensor.hpp"

#include <cmath>
#include <fmt/format.h>

#include "nst/errors.hpp"

namespace nst {

std::string Shape::str() const { return fmt::format("{}x{}x{}", channels, height, width); }

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(shape.size(), fill) {
  if (shape.channels < 0 || shape.height < 0 || shape.width < 0) {
    throw PreconditionError("negative tensor extent " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw PreconditionError(fmt::format("tensor data length {} does not match shape {}",
                                        data_.size(), shape_.str()));
  }
}

bool Tensor::all_finite() const noexcept {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace nst
