#ifndef LMSTYLE_TENSOR_H_
#define LMSTYLE_TENSOR_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lmstyle {

using Shape = std::vector<int64_t>;

// Dense row-major array of doubles. Rank 0 is a scalar; rank 1 and rank 2
// are viewed as matrices by the graph ops (a vector is a single row).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor matrix(int64_t rows, int64_t cols, double fill = 0.0) {
    return Tensor(Shape{rows, cols}, fill);
  }

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(values_.size()); }
  bool empty() const { return values_.empty(); }

  // Matrix view: rank 0 -> 1x1, rank 1 -> 1xN, rank 2 -> RxC.
  int64_t rows() const;
  int64_t cols() const;

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  double& operator[](int64_t i) { return values_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return values_[static_cast<size_t>(i)]; }
  double& at(int64_t r, int64_t c) { return values_[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return values_[static_cast<size_t>(r * cols() + c)]; }

  double item() const;
  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_ && size() == other.size(); }
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> values_;
};

int64_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

}  // namespace lmstyle

#endif  // LMSTYLE_TENSOR_H_
