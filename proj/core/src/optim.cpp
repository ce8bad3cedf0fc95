#include "lranker/optim.hpp"

#include <cmath>
#include <numbers>

#include "lranker/errors.hpp"

namespace lranker {
namespace {

void check_shapes(const num::ParamSet& params, const num::ParamSet& grads) {
  if (params.tensor_count() != grads.tensor_count()) {
    throw ContractViolation("optimizer: gradient set has " + std::to_string(grads.tensor_count()) +
                            " tensors, parameters have " + std::to_string(params.tensor_count()));
  }
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    if (!params[i].value.same_shape(grads[i].value)) {
      throw ContractViolation("optimizer: gradient shape mismatch for '" + params[i].name + "'");
    }
  }
}

void ensure_buffers(std::vector<num::Tensor2>& buffers, const num::ParamSet& params) {
  if (buffers.size() == params.tensor_count()) return;
  buffers.clear();
  for (const auto& p : params) buffers.emplace_back(p.value.rows(), p.value.cols());
}

}  // namespace

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adamw"; }
std::string to_string(Schedule s) { return s == Schedule::constant ? "constant" : "cosine"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd" || s == "SGD") return OptimizerKind::sgd;
  if (s == "adamw" || s == "AdamW") return OptimizerKind::adamw;
  throw ContractViolation("unknown optimizer '" + std::string(s) + "'");
}

Schedule parse_schedule(std::string_view s) {
  if (s == "constant") return Schedule::constant;
  if (s == "cosine" || s == "cosine-decay" || s == "cosine_decay") return Schedule::cosine;
  throw ContractViolation("unknown learning-rate schedule '" + std::string(s) + "'");
}

bool sgd_step(num::ParamSet& params, const num::ParamSet& grads, double lr, double momentum, double weight_decay,
              OptimState& state) {
  check_shapes(params, grads);
  if (!grads.all_finite()) return false;
  ensure_buffers(state.first, params);
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    auto p = params[i].value.flat();
    auto g = grads[i].value.flat();
    auto v = state.first[i].flat();
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = momentum * v[j] + g[j] + weight_decay * p[j];
      p[j] -= lr * v[j];
    }
  }
  ++state.step;
  return true;
}

bool adamw_step(num::ParamSet& params, const num::ParamSet& grads, double lr, double beta1, double beta2,
                double weight_decay, OptimState& state, double eps) {
  check_shapes(params, grads);
  if (!grads.all_finite()) return false;
  ensure_buffers(state.first, params);
  ensure_buffers(state.second, params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    auto p = params[i].value.flat();
    auto g = grads[i].value.flat();
    auto m = state.first[i].flat();
    auto v = state.second[i].flat();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * p[j]);
    }
  }
  return true;
}

double lr_at(Schedule schedule, double base_lr, std::size_t step, std::size_t total_steps) {
  if (schedule == Schedule::constant || total_steps == 0) return base_lr;
  if (step > total_steps) {
    throw ContractViolation("lr_at: step " + std::to_string(step) + " beyond total " + std::to_string(total_steps));
  }
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace lranker
