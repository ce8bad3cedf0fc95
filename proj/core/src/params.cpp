#include "lranker/params.hpp"

#include <algorithm>

#include "lranker/errors.hpp"

namespace lranker::num {

Tensor2& ParamSet::add(std::string name, Tensor2 value) {
  if (contains(name)) throw ContractViolation("duplicate parameter name '" + name + "'");
  tensors_.push_back({std::move(name), std::move(value)});
  return tensors_.back().value;
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.value.size();
  return n;
}

bool ParamSet::contains(std::string_view name) const noexcept { return index_of(name).has_value(); }

std::optional<std::size_t> ParamSet::index_of(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  return std::nullopt;
}

Tensor2& ParamSet::at(std::string_view name) {
  auto i = index_of(name);
  if (!i) throw ContractViolation("no parameter named '" + std::string(name) + "'");
  return tensors_[*i].value;
}

const Tensor2& ParamSet::at(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw ContractViolation("no parameter named '" + std::string(name) + "'");
  return tensors_[*i].value;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.push_back(t.name);
  return out;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& t : tensors_) out.add(t.name, Tensor2(t.value.rows(), t.value.cols()));
  return out;
}

void ParamSet::set_zero() {
  for (auto& t : tensors_) t.value.fill(0.0);
}

void ParamSet::accumulate(const ParamSet& other) {
  if (other.tensors_.size() != tensors_.size()) {
    throw ContractViolation("accumulate: parameter sets differ in tensor count");
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto dst = tensors_[i].value.flat();
    auto src = other.tensors_[i].value.flat();
    if (dst.size() != src.size()) {
      throw ContractViolation("accumulate: size mismatch for '" + tensors_[i].name + "'");
    }
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

bool ParamSet::all_finite() const noexcept {
  return std::all_of(tensors_.begin(), tensors_.end(),
                     [](const NamedTensor& t) { return t.value.all_finite(); });
}

std::vector<Scalar> ParamSet::flatten() const {
  std::vector<Scalar> out;
  out.reserve(scalar_count());
  for (const auto& t : tensors_) out.insert(out.end(), t.value.flat().begin(), t.value.flat().end());
  return out;
}

void ParamSet::unflatten(std::span<const Scalar> flat) {
  if (flat.size() != scalar_count()) {
    throw ContractViolation("unflatten: expected " + std::to_string(scalar_count()) +
                            " scalars, got " + std::to_string(flat.size()));
  }
  std::size_t off = 0;
  for (auto& t : tensors_) {
    auto dst = t.value.flat();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + dst.size()), dst.begin());
    off += dst.size();
  }
}

bool operator==(const NamedTensor& a, const NamedTensor& b) {
  return a.name == b.name && a.value == b.value;
}

bool operator==(const ParamSet& a, const ParamSet& b) { return a.tensors_ == b.tensors_; }

}  // namespace lranker::num
