#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <span>
#include <string>
#include <vector>

namespace lranker {

enum class LossKind : std::uint8_t { classification, regression };
std::string to_string(LossKind k);
LossKind parse_loss_kind(std::string_view s);

/// Loss value with its gradient with respect to every score, already scaled
/// by the 1/N batch average.
struct LossReport {
  double loss = 0.0;
  std::size_t batch_size = 0;
  /// dLoss/ds, one vector per group (listwise) or one entry per pair (pointwise, as 1-vectors).
  std::vector<std::vector<double>> score_grads;
  /// Listwise classification only.
  std::vector<std::vector<double>> pi_y;
  std::vector<std::vector<double>> pi_s;
  /// Pointwise classification only: logistic(s).
  std::vector<double> probabilities;
};

/// (1/N)·Σ KL(π_y ‖ softmax(s)), π_y = y/Σy, with 0·log 0 = 0.
LossReport list_cls_loss(std::span<const std::vector<double>> scores, std::span<const std::vector<double>> labels);
/// (1/N)·Σ_n (1/K)·Σ_k (s − y)²
LossReport list_reg_loss(std::span<const std::vector<double>> scores, std::span<const std::vector<double>> labels);
/// −(1/N)·Σ [y log p + (1−y) log(1−p)], p = logistic(s), evaluated without overflow.
LossReport point_cls_loss(std::span<const double> scores, std::span<const double> labels);
/// (1/N)·Σ (s − y)²
LossReport point_reg_loss(std::span<const double> scores, std::span<const double> labels);

/// Overflow-free logistic function and log(1 + e^x).
double logistic(double x);
double softplus(double x);

}  // namespace lranker
