#include "hcr/nd/tensor.h"

#include <algorithm>
#include <cmath>

#include "hcr/common/error.h"

namespace hcr::nd {

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  Check(NumElements(shape_) == data_.size(), ErrorKind::kContract,
        "tensor shape " + ShapeString(shape_) + " does not match " + std::to_string(data_.size()) +
            " values");
}

Tensor Tensor::Vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    Check(row.size() == c, ErrorKind::kContract, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(data));
}

double Tensor::item() const {
  Check(data_.size() == 1, ErrorKind::kContract,
        "item() on tensor of shape " + ShapeString(shape_));
  return data_[0];
}

Tensor Tensor::Reshaped(Shape shape) const {
  Check(NumElements(shape) == data_.size(), ErrorKind::kContract,
        "cannot reshape " + ShapeString(shape_) + " to " + ShapeString(shape));
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void Tensor::Fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void Tensor::CheckFinite(const std::string& what) const {
  Check(AllFinite(), ErrorKind::kContract, what + ": non-finite value");
}

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  Check(a.shape() == b.shape(), ErrorKind::kContract,
        "MaxAbsDiff shape mismatch " + ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace hcr::nd
