#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lranker/tensor.hpp"

namespace lranker::num {

/// A scalar function of a flat parameter vector together with its analytic
/// gradient (usually produced by a Tape).
struct ProbedFunction {
  std::function<Scalar(std::span<const Scalar>)> value;
  std::function<std::vector<Scalar>(std::span<const Scalar>)> gradient;
};

struct GradCheckResult {
  Scalar max_relative_error = 0.0;
  std::size_t worst_index = 0;
  Scalar analytic_at_worst = 0.0;
  Scalar numeric_at_worst = 0.0;
  std::size_t coordinates_checked = 0;
  bool passed = false;
};

inline constexpr Scalar kGradAbsFloor = 1e-6;

/// |a − n| / max(|a|, |n|, floor)
Scalar relative_error(Scalar analytic, Scalar numeric, Scalar floor = kGradAbsFloor);

/// Central differences on every coordinate (or every `stride`-th one) of
/// `point`, compared with fn.gradient(point). Throws ProbeError on a
/// non-finite function value and ContractViolation on step <= 0.
GradCheckResult grad_check(const ProbedFunction& fn, std::span<const Scalar> point, Scalar step,
                           Scalar tolerance, std::size_t stride = 1);

}  // namespace lranker::num
