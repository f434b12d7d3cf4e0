#include "lmstyle/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lmstyle/errors.h"

namespace lmstyle {

int64_t shape_size(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    LMS_REQUIRE(d > 0, "extents must be positive, got " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(static_cast<size_t>(shape_size(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  LMS_REQUIRE(shape_size(shape_) == size(),
              "shape " + shape_string(shape_) + " does not match " + std::to_string(size()) + " values");
}

int64_t Tensor::rows() const {
  LMS_REQUIRE(rank() <= 2, "matrix view needs rank <= 2");
  return rank() == 2 ? shape_[0] : 1;
}

int64_t Tensor::cols() const {
  LMS_REQUIRE(rank() <= 2, "matrix view needs rank <= 2");
  if (rank() == 0) return 1;
  return rank() == 2 ? shape_[1] : shape_[0];
}

double Tensor::item() const {
  LMS_REQUIRE(size() == 1, "item() needs a single-element tensor, got " + shape_string(shape_));
  return values_[0];
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace lmstyle
