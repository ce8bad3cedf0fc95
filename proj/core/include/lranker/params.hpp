#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lranker/tensor.hpp"

namespace lranker::num {

struct NamedTensor {
  std::string name;
  Tensor2 value;
};

/// Ordered collection of named tensors. Order is the insertion order and is
/// what flatten()/unflatten(), optimizers and checkpoints iterate over.
class ParamSet {
 public:
  ParamSet() = default;

  Tensor2& add(std::string name, Tensor2 value);

  std::size_t tensor_count() const noexcept { return tensors_.size(); }
  /// Brute-force count of learnable scalars.
  std::size_t scalar_count() const noexcept;

  bool contains(std::string_view name) const noexcept;
  Tensor2& at(std::string_view name);
  const Tensor2& at(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const noexcept;

  NamedTensor& operator[](std::size_t i) { return tensors_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return tensors_[i]; }
  auto begin() noexcept { return tensors_.begin(); }
  auto end() noexcept { return tensors_.end(); }
  auto begin() const noexcept { return tensors_.begin(); }
  auto end() const noexcept { return tensors_.end(); }

  std::vector<std::string> names() const;

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  void set_zero();
  /// this += other (shapes must match).
  void accumulate(const ParamSet& other);
  bool all_finite() const noexcept;

  std::vector<Scalar> flatten() const;
  void unflatten(std::span<const Scalar> flat);

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<NamedTensor> tensors_;
};

bool operator==(const NamedTensor& a, const NamedTensor& b);

}  // namespace lranker::num
