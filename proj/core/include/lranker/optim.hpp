#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lranker/params.hpp"

namespace lranker {

enum class OptimizerKind : std::uint8_t { sgd, adamw };
enum class Schedule : std::uint8_t { constant, cosine };

std::string to_string(OptimizerKind k);
std::string to_string(Schedule s);
OptimizerKind parse_optimizer(std::string_view s);
Schedule parse_schedule(std::string_view s);

inline constexpr double kAdamEps = 1e-8;

/// Per-tensor buffers mirroring the parameter shapes. SGD uses `first` as the
/// momentum buffer; AdamW uses `first`/`second` as m/v and counts applied steps.
struct OptimState {
  std::vector<num::Tensor2> first;
  std::vector<num::Tensor2> second;
  std::uint64_t step = 0;
};

/// v ← momentum·v + g + wd·p;  p ← p − lr·v. Weight decay is classic L2.
/// Returns false (and leaves params and state untouched) on a non-finite gradient.
bool sgd_step(num::ParamSet& params, const num::ParamSet& grads, double lr, double momentum,
              double weight_decay, OptimState& state);

/// Bias-corrected Adam moments with decoupled weight decay:
/// p ← p − lr·(m̂/(√v̂ + eps) + wd·p). Returns false on a non-finite gradient.
bool adamw_step(num::ParamSet& params, const num::ParamSet& grads, double lr, double beta1, double beta2,
                double weight_decay, OptimState& state, double eps = kAdamEps);

/// constant → base; cosine → base·½(1 + cos(π·step/total)). total = 0 falls back to constant.
double lr_at(Schedule schedule, double base_lr, std::size_t step, std::size_t total_steps);

}  // namespace lranker
