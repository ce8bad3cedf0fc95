#include "lranker/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "lranker/errors.hpp"

namespace lranker::num {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, Scalar fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<Scalar> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ContractViolation("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + num::shape_string(rows_, cols_));
  }
}

Tensor2::Tensor2(std::initializer_list<std::initializer_list<Scalar>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ContractViolation("ragged tensor literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Tensor2 Tensor2::row_vector(std::span<const Scalar> values) {
  return Tensor2(1, values.size(), std::vector<Scalar>(values.begin(), values.end()));
}

Tensor2 Tensor2::row_vector(std::span<const float> values) {
  return Tensor2(1, values.size(), std::vector<Scalar>(values.begin(), values.end()));
}

void Tensor2::fill(Scalar value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
}

std::string Tensor2::shape_string() const { return num::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

}  // namespace lranker::num
