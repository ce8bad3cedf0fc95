#include "lranker/objectives.hpp"

#include <cmath>

#include "lranker/errors.hpp"
#include "lranker/ops.hpp"

namespace lranker {
namespace {

void check_batch(std::size_t scores, std::size_t labels, const char* op) {
  if (scores != labels) {
    throw ContractViolation(std::string(op) + ": " + std::to_string(scores) + " score sets for " +
                            std::to_string(labels) + " label sets");
  }
  if (scores == 0) throw ContractViolation(std::string(op) + ": empty batch");
}

void check_group(std::size_t s, std::size_t y, std::size_t n, const char* op) {
  if (s != y || s == 0) {
    throw ContractViolation(std::string(op) + ": group " + std::to_string(n) + " has " + std::to_string(s) +
                            " scores and " + std::to_string(y) + " labels");
  }
}

void check_binary(double y, const char* op) {
  if (y != 0.0 && y != 1.0) throw ContractViolation(std::string(op) + ": label " + std::to_string(y) + " is not binary");
}

}  // namespace

std::string to_string(LossKind k) { return k == LossKind::classification ? "cls" : "reg"; }

LossKind parse_loss_kind(std::string_view s) {
  if (s == "cls" || s == "classification") return LossKind::classification;
  if (s == "reg" || s == "regression") return LossKind::regression;
  throw ContractViolation("unknown loss kind '" + std::string(s) + "'");
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

LossReport list_cls_loss(std::span<const std::vector<double>> scores, std::span<const std::vector<double>> labels) {
  check_batch(scores.size(), labels.size(), "list_cls_loss");
  LossReport r;
  r.batch_size = scores.size();
  const double inv_n = 1.0 / static_cast<double>(r.batch_size);
  for (std::size_t n = 0; n < scores.size(); ++n) {
    const auto& s = scores[n];
    const auto& y = labels[n];
    check_group(s.size(), y.size(), n, "list_cls_loss");
    double total = 0.0;
    for (double v : y) {
      check_binary(v, "list_cls_loss");
      total += v;
    }
    if (total == 0.0) {
      throw ContractViolation("list_cls_loss: group " + std::to_string(n) + " has no positive label");
    }
    std::vector<double> pi_y(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) pi_y[k] = y[k] / total;
    const double lse = num::log_sum_exp(s);
    std::vector<double> pi_s(s.size());
    double kl = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double log_ps = s[k] - lse;
      pi_s[k] = std::exp(log_ps);
      if (pi_y[k] > 0.0) kl += pi_y[k] * (std::log(pi_y[k]) - log_ps);
    }
    std::vector<double> g(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) g[k] = (pi_s[k] - pi_y[k]) * inv_n;
    r.loss += kl * inv_n;
    r.score_grads.push_back(std::move(g));
    r.pi_y.push_back(std::move(pi_y));
    r.pi_s.push_back(std::move(pi_s));
  }
  return r;
}

LossReport list_reg_loss(std::span<const std::vector<double>> scores, std::span<const std::vector<double>> labels) {
  check_batch(scores.size(), labels.size(), "list_reg_loss");
  LossReport r;
  r.batch_size = scores.size();
  const double inv_n = 1.0 / static_cast<double>(r.batch_size);
  for (std::size_t n = 0; n < scores.size(); ++n) {
    const auto& s = scores[n];
    const auto& y = labels[n];
    check_group(s.size(), y.size(), n, "list_reg_loss");
    const double inv_k = 1.0 / static_cast<double>(s.size());
    double sq = 0.0;
    std::vector<double> g(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double diff = s[k] - y[k];
      sq += diff * diff;
      g[k] = 2.0 * diff * inv_k * inv_n;
    }
    r.loss += sq * inv_k * inv_n;
    r.score_grads.push_back(std::move(g));
  }
  return r;
}

LossReport point_cls_loss(std::span<const double> scores, std::span<const double> labels) {
  check_batch(scores.size(), labels.size(), "point_cls_loss");
  LossReport r;
  r.batch_size = scores.size();
  const double inv_n = 1.0 / static_cast<double>(r.batch_size);
  for (std::size_t n = 0; n < scores.size(); ++n) {
    const double s = scores[n];
    const double y = labels[n];
    check_binary(y, "point_cls_loss");
    // −[y log p + (1−y) log(1−p)] = softplus(s) − y·s
    r.loss += (softplus(s) - y * s) * inv_n;
    const double p = logistic(s);
    r.probabilities.push_back(p);
    r.score_grads.push_back({(p - y) * inv_n});
  }
  return r;
}

LossReport point_reg_loss(std::span<const double> scores, std::span<const double> labels) {
  check_batch(scores.size(), labels.size(), "point_reg_loss");
  LossReport r;
  r.batch_size = scores.size();
  const double inv_n = 1.0 / static_cast<double>(r.batch_size);
  for (std::size_t n = 0; n < scores.size(); ++n) {
    const double diff = scores[n] - labels[n];
    r.loss += diff * diff * inv_n;
    r.score_grads.push_back({2.0 * diff * inv_n});
  }
  return r;
}

}  // namespace lranker
