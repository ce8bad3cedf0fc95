#include "lranker/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lranker/errors.hpp"

namespace lranker::num {

Scalar relative_error(Scalar analytic, Scalar numeric, Scalar floor) {
  const Scalar denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const ProbedFunction& fn, std::span<const Scalar> point, Scalar step,
                           Scalar tolerance, std::size_t stride) {
  if (!(step > 0.0)) throw ContractViolation("grad_check: step must be positive");
  if (stride == 0) throw ContractViolation("grad_check: stride must be positive");

  const std::vector<Scalar> analytic = fn.gradient(point);
  if (analytic.size() != point.size()) {
    throw ContractViolation("grad_check: gradient has " + std::to_string(analytic.size()) +
                            " entries for a point of " + std::to_string(point.size()));
  }

  std::vector<Scalar> probe(point.begin(), point.end());
  GradCheckResult result;
  for (std::size_t i = 0; i < probe.size(); i += stride) {
    const Scalar saved = probe[i];
    probe[i] = saved + step;
    const Scalar plus = fn.value(probe);
    probe[i] = saved - step;
    const Scalar minus = fn.value(probe);
    probe[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw ProbeError("grad_check: non-finite function value at coordinate " + std::to_string(i));
    }
    const Scalar numeric = (plus - minus) / (2.0 * step);
    const Scalar err = relative_error(analytic[i], numeric);
    if (err > result.max_relative_error || result.coordinates_checked == 0) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      if (err >= result.max_relative_error) {
        result.worst_index = i;
        result.analytic_at_worst = analytic[i];
        result.numeric_at_worst = numeric;
      }
    }
    ++result.coordinates_checked;
  }
  result.passed = result.max_relative_error < tolerance;
  return result;
}

}  // namespace lranker::num
