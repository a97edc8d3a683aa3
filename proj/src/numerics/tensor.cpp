#include "clarigen/numerics/tensor.h"

#include <algorithm>
#include <sstream>

#include "clarigen/error.h"

namespace clarigen::numerics {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void check_extents(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (std::size_t d : shape) {
    if (d == 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           shape_string(shape));
    }
  }
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_extents(shape_);
  if (values_.size() != shape_size(shape_)) {
    throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(values_.size()));
  }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace clarigen::numerics
