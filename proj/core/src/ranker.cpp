#include "lranker/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lranker/errors.hpp"

namespace lranker {

using num::ParamShape;
using num::Scalar;
using num::Tape;
using num::Tensor2;
using num::Var;

std::string to_string(RankerKind k) { return k == RankerKind::listwise ? "listwise" : "pointwise"; }
std::string to_string(RelevanceKind k) { return k == RelevanceKind::cosine ? "cosine" : "learnable"; }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_projection: return "no_projection";
    case Variant::no_instruction: return "no_instruction";
    case Variant::no_mlp_block: return "no_mlp_block";
  }
  return "full";
}

RankerKind parse_ranker_kind(std::string_view s) {
  if (s == "listwise" || s == "list") return RankerKind::listwise;
  if (s == "pointwise" || s == "point") return RankerKind::pointwise;
  throw ContractViolation("unknown ranker kind '" + std::string(s) + "'");
}

RelevanceKind parse_relevance_kind(std::string_view s) {
  if (s == "cosine") return RelevanceKind::cosine;
  if (s == "learnable") return RelevanceKind::learnable;
  throw ContractViolation("unknown relevance kind '" + std::string(s) + "'");
}

Variant parse_variant(std::string_view s) {
  if (s == "full") return Variant::full;
  if (s == "no_projection") return Variant::no_projection;
  if (s == "no_instruction") return Variant::no_instruction;
  if (s == "no_mlp_block") return Variant::no_mlp_block;
  throw ContractViolation("unknown ablation variant '" + std::string(s) + "'");
}

void validate_shape(const RankerShape& s) {
  if (s.d_model == 0) throw ContractViolation("ranker: d_model must be positive");
  if (s.d_proj < 2) throw ContractViolation("ranker: d_proj must be >= 2, got " + std::to_string(s.d_proj));
  if (s.variant != Variant::no_projection && s.d_model < s.d_proj) {
    throw ContractViolation("ranker: d_model (" + std::to_string(s.d_model) + ") must be >= d_proj (" +
                            std::to_string(s.d_proj) + ")");
  }
  if (s.variant == Variant::no_projection && s.d_model < 2) {
    throw ContractViolation("ranker: no_projection needs d_model >= 2");
  }
  if (s.variant == Variant::no_mlp_block) {
    if (s.kind != RankerKind::pointwise) {
      throw ContractViolation("ranker: the no_mlp_block variant applies to the pointwise ranker only");
    }
    if (s.blocks != 0) throw ContractViolation("ranker: no_mlp_block requires blocks = 0");
  } else {
    if (s.blocks < 1 || s.blocks > 16) {
      throw ContractViolation("ranker: block count must lie in [1, 16], got " + std::to_string(s.blocks));
    }
    if (s.kind == RankerKind::pointwise && s.d_hidden < 1) {
      throw ContractViolation("ranker: d_hidden must be positive");
    }
  }
  if (s.logit_scale && s.relevance != RelevanceKind::cosine) {
    throw ContractViolation("ranker: logit_scale applies to cosine relevance only");
  }
}

RankerShape normalized(RankerShape s) {
  if (s.variant == Variant::no_mlp_block) s.blocks = 0;
  if (s.variant == Variant::no_projection) s.d_proj = s.d_model;
  validate_shape(s);
  return s;
}

std::vector<ParamShape> parameter_shapes(const RankerShape& s) {
  validate_shape(s);
  const std::size_t w = s.width();
  std::vector<ParamShape> out;
  if (s.variant != Variant::no_projection) {
    out.push_back({"proj.weight", s.d_model, s.d_proj});
    out.push_back({"proj.bias", 1, s.d_proj});
  }
  if (s.variant == Variant::no_instruction) out.push_back({"instruction_embedding", 1, w});
  for (std::size_t b = 0; b < s.blocks; ++b) {
    const std::string prefix = (s.kind == RankerKind::listwise ? "block" : "mlp") + std::to_string(b) + ".";
    if (s.kind == RankerKind::listwise) {
      for (auto p : num::attention_block_shapes(w)) out.push_back({prefix + p.name, p.rows, p.cols});
    } else {
      out.push_back({prefix + "fc1.weight", w, s.d_hidden});
      out.push_back({prefix + "fc1.bias", 1, s.d_hidden});
      out.push_back({prefix + "fc2.weight", s.d_hidden, w});
      out.push_back({prefix + "fc2.bias", 1, w});
    }
  }
  if (s.relevance == RelevanceKind::learnable) {
    out.push_back({"relevance.weight", 1, 2 * w});
    out.push_back({"relevance.bias", 1, 1});
  }
  if (s.logit_scale) out.push_back({"relevance.logit_scale", 1, 1});
  return out;
}

std::size_t parameter_count(const RankerShape& s) {
  validate_shape(s);
  const std::size_t w = s.width();
  std::size_t n = 0;
  if (s.variant != Variant::no_projection) n += s.d_model * s.d_proj + s.d_proj;
  if (s.variant == Variant::no_instruction) n += w;
  if (s.kind == RankerKind::listwise) {
    n += s.blocks * num::attention_block_param_count(w);
  } else {
    n += s.blocks * (w * s.d_hidden + s.d_hidden + s.d_hidden * w + w);
  }
  if (s.relevance == RelevanceKind::learnable) n += 2 * w + 1;
  if (s.logit_scale) n += 1;
  return n;
}

// ---- init -------------------------------------------------------------------

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_weight_matrix(const std::string& name) {
  return ends_with(name, ".weight") || name == "instruction_embedding";
}

}  // namespace

Ranker Ranker::initialize(const RankerShape& shape, std::uint64_t seed) {
  const RankerShape s = normalized(shape);
  std::mt19937_64 rng(seed);
  num::ParamSet params;
  for (const auto& p : parameter_shapes(s)) {
    Tensor2 t(p.rows, p.cols);
    if (ends_with(p.name, ".gain") || ends_with(p.name, "logit_scale")) {
      t.fill(1.0);
    } else if (is_weight_matrix(p.name)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(p.rows + p.cols));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (double& v : t.flat()) v = u(rng);
    }
    params.add(p.name, std::move(t));
  }
  return Ranker(s, std::move(params));
}

Ranker::Ranker(RankerShape shape, num::ParamSet params) : shape_(normalized(shape)), params_(std::move(params)) {
  const auto expected = parameter_shapes(shape_);
  std::vector<std::string> problems;
  for (const auto& p : expected) {
    if (!params_.contains(p.name)) {
      problems.push_back("missing " + p.name);
    } else if (const auto& t = params_.at(p.name); t.rows() != p.rows || t.cols() != p.cols) {
      problems.push_back(p.name + " is " + t.shape_string() + ", expected " + num::shape_string(p.rows, p.cols));
    }
  }
  for (const auto& name : params_.names()) {
    if (std::none_of(expected.begin(), expected.end(), [&](const ParamShape& p) { return p.name == name; })) {
      problems.push_back("unexpected " + name);
    }
  }
  if (!problems.empty()) {
    std::string msg = "ranker parameters do not match the " + to_string(shape_.kind) + " shape:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ContractViolation(msg);
  }
  // Reorder into canonical order so flatten() layouts agree across sources.
  num::ParamSet ordered;
  for (const auto& p : expected) ordered.add(p.name, std::move(params_.at(p.name)));
  params_ = std::move(ordered);
}

// ---- forward ----------------------------------------------------------------

namespace ops {

Var cosine_scores(Tape& t, Var anchor, Var rows) {
  const Tensor2& a = t.value(anchor);
  const Tensor2& r = t.value(rows);
  if (a.rows() != 1 || a.cols() != r.cols()) {
    throw ContractViolation("cosine_scores: anchor " + a.shape_string() + " vs rows " + r.shape_string());
  }
  const std::size_t k = r.rows(), d = r.cols();
  double norm_a = 0.0;
  for (double v : a.flat()) norm_a += v * v;
  norm_a = std::sqrt(norm_a);
  std::vector<double> norm_r(k, 0.0), dots(k, 0.0);
  Tensor2 out(1, k);
  for (std::size_t i = 0; i < k; ++i) {
    double nr = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      nr += r(i, j) * r(i, j);
      dot += r(i, j) * a(0, j);
    }
    norm_r[i] = std::sqrt(nr);
    dots[i] = dot;
    const double denom = std::max(norm_a, kCosineEps) * std::max(norm_r[i], kCosineEps);
    out(0, i) = std::clamp(dot / denom, -1.0, 1.0);
  }
  return t.push(std::move(out), {anchor, rows},
                [anchor, rows, norm_a, norm_r = std::move(norm_r), dots = std::move(dots)](Tape& tp, std::size_t self) {
                  const Tensor2& g = tp.grad(self);
                  const Tensor2& av = tp.value(anchor);
                  const Tensor2& rv = tp.value(rows);
                  const std::size_t kk = rv.rows(), dd = rv.cols();
                  const double na = std::max(norm_a, kCosineEps);
                  for (std::size_t i = 0; i < kk; ++i) {
                    const double gi = g(0, i);
                    if (gi == 0.0) continue;
                    const double nr = std::max(norm_r[i], kCosineEps);
                    const double inv = 1.0 / (na * nr);
                    const double s = dots[i] * inv;
                    // Norms below eps are constants, so their terms vanish.
                    const double ca = norm_a > kCosineEps ? s / (norm_a * norm_a) : 0.0;
                    const double cr = norm_r[i] > kCosineEps ? s / (norm_r[i] * norm_r[i]) : 0.0;
                    if (tp.requires_grad(anchor)) {
                      Tensor2& ga = tp.grad(anchor);
                      for (std::size_t j = 0; j < dd; ++j) ga(0, j) += gi * (rv(i, j) * inv - ca * av(0, j));
                    }
                    if (tp.requires_grad(rows)) {
                      Tensor2& gr = tp.grad(rows);
                      for (std::size_t j = 0; j < dd; ++j) gr(i, j) += gi * (av(0, j) * inv - cr * rv(i, j));
                    }
                  }
                });
}

Var learnable_scores(Tape& t, Var anchor, Var rows, Var weight, Var bias) {
  const Tensor2& a = t.value(anchor);
  const Tensor2& r = t.value(rows);
  const Tensor2& w = t.value(weight);
  const Tensor2& b = t.value(bias);
  const std::size_t d = r.cols(), k = r.rows();
  if (a.rows() != 1 || a.cols() != d) {
    throw ContractViolation("learnable_scores: anchor " + a.shape_string() + " vs rows " + r.shape_string());
  }
  if (w.rows() != 1 || w.cols() != 2 * d) {
    throw ContractViolation("learnable_scores: weight " + w.shape_string() + " needs 1x" + std::to_string(2 * d));
  }
  if (b.rows() != 1 || b.cols() != 1) throw ContractViolation("learnable_scores: bias must be 1x1");
  double anchor_part = 0.0;
  for (std::size_t j = 0; j < d; ++j) anchor_part += w(0, j) * a(0, j);
  Tensor2 out(1, k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = anchor_part;
    for (std::size_t j = 0; j < d; ++j) s += w(0, d + j) * r(i, j);
    out(0, i) = s + b(0, 0);
  }
  return t.push(std::move(out), {anchor, rows, weight, bias}, [anchor, rows, weight, bias](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    const Tensor2& av = tp.value(anchor);
    const Tensor2& rv = tp.value(rows);
    const Tensor2& wv = tp.value(weight);
    const std::size_t dd = rv.cols(), kk = rv.rows();
    double gsum = 0.0;
    for (std::size_t i = 0; i < kk; ++i) gsum += g(0, i);
    if (tp.requires_grad(bias)) tp.grad(bias)(0, 0) += gsum;
    if (tp.requires_grad(anchor)) {
      Tensor2& ga = tp.grad(anchor);
      for (std::size_t j = 0; j < dd; ++j) ga(0, j) += gsum * wv(0, j);
    }
    if (tp.requires_grad(rows)) {
      Tensor2& gr = tp.grad(rows);
      for (std::size_t i = 0; i < kk; ++i)
        for (std::size_t j = 0; j < dd; ++j) gr(i, j) += g(0, i) * wv(0, dd + j);
    }
    if (tp.requires_grad(weight)) {
      Tensor2& gw = tp.grad(weight);
      for (std::size_t j = 0; j < dd; ++j) gw(0, j) += gsum * av(0, j);
      for (std::size_t i = 0; i < kk; ++i)
        for (std::size_t j = 0; j < dd; ++j) gw(0, dd + j) += g(0, i) * rv(i, j);
    }
  });
}

Var scale_by(Tape& t, Var x, Var s) {
  const Tensor2& sv = t.value(s);
  if (sv.rows() != 1 || sv.cols() != 1) throw ContractViolation("scale_by: scale must be 1x1");
  const double factor = sv(0, 0);
  Tensor2 out = t.value(x);
  for (double& v : out.flat()) v *= factor;
  return t.push(std::move(out), {x, s}, [x, s](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    const Tensor2& xv = tp.value(x);
    const double f = tp.value(s)(0, 0);
    if (tp.requires_grad(x)) {
      Tensor2& gx = tp.grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx.flat()[i] += f * g.flat()[i];
    }
    if (tp.requires_grad(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g.flat()[i] * xv.flat()[i];
      tp.grad(s)(0, 0) += acc;
    }
  });
}

}  // namespace ops

Var Ranker::relevance(Tape& t, Var anchor, Var rows, const std::vector<Var>& bound) const {
  auto var_of = [&](std::string_view name) { return bound[*params_.index_of(name)]; };
  Var scores;
  if (shape_.relevance == RelevanceKind::cosine) {
    scores = ops::cosine_scores(t, anchor, rows);
    if (shape_.logit_scale) scores = ops::scale_by(t, scores, var_of("relevance.logit_scale"));
  } else {
    scores = ops::learnable_scores(t, anchor, rows, var_of("relevance.weight"), var_of("relevance.bias"));
  }
  return scores;
}

ScoringTrace Ranker::forward(std::span<const float> instruction, std::span<const std::span<const float>> candidates,
                             num::ParamSet* grads) const {
  const std::size_t k = candidates.size();
  const std::size_t d = shape_.d_model;
  if (k < 1) throw ContractViolation("ranker forward: at least one candidate is required");
  if (instruction.size() != d) {
    throw ContractViolation("ranker forward: instruction has " + std::to_string(instruction.size()) +
                            " features, ranker expects d_model=" + std::to_string(d));
  }
  for (const auto& c : candidates) {
    if (c.size() != d) {
      throw ContractViolation("ranker forward: candidate has " + std::to_string(c.size()) +
                              " features, ranker expects d_model=" + std::to_string(d));
    }
  }
  if (grads != nullptr && grads->tensor_count() != params_.tensor_count()) {
    throw ContractViolation("ranker forward: gradient sink does not mirror the parameters");
  }

  ScoringTrace trace;
  trace.tape_ = std::make_unique<Tape>();
  Tape& t = *trace.tape_;

  std::vector<Var> bound;
  bound.reserve(params_.tensor_count());
  for (std::size_t i = 0; i < params_.tensor_count(); ++i) {
    bound.push_back(t.parameter(params_[i].value, grads != nullptr ? &(*grads)[i].value : nullptr));
  }
  auto var_of = [&](std::string_view name) { return bound[*params_.index_of(name)]; };

  const bool learned_instruction = shape_.variant == Variant::no_instruction;
  const std::size_t first = learned_instruction ? 0 : 1;
  Tensor2 x(k + first, d);
  if (!learned_instruction) std::copy(instruction.begin(), instruction.end(), x.row(0).begin());
  for (std::size_t i = 0; i < k; ++i) std::copy(candidates[i].begin(), candidates[i].end(), x.row(first + i).begin());
  Var h = t.constant(std::move(x));

  if (shape_.variant != Variant::no_projection) h = num::linear(t, h, var_of("proj.weight"), var_of("proj.bias"));
  if (learned_instruction) h = num::concat_rows(t, var_of("instruction_embedding"), h);

  for (std::size_t b = 0; b < shape_.blocks; ++b) {
    if (shape_.kind == RankerKind::listwise) {
      const std::string prefix = "block" + std::to_string(b) + ".";
      std::vector<Var> ordered;
      for (const auto& p : num::attention_block_shapes(shape_.width())) ordered.push_back(var_of(prefix + p.name));
      h = num::attention_block(t, h, num::attention_block_vars(ordered));
    } else {
      // Rows are independent here, so a candidate's score never depends on its batch.
      const std::string prefix = "mlp" + std::to_string(b) + ".";
      h = num::gelu(t, num::linear(t, h, var_of(prefix + "fc1.weight"), var_of(prefix + "fc1.bias")));
      h = num::linear(t, h, var_of(prefix + "fc2.weight"), var_of(prefix + "fc2.bias"));
    }
  }

  const Var anchor = num::slice_rows(t, h, 0, 1);
  const Var rows = num::slice_rows(t, h, 1, k);
  trace.scores_var_ = relevance(t, anchor, rows, bound);

  const Tensor2& hv = t.value(h);
  trace.projected_instruction.assign(hv.row(0).begin(), hv.row(0).end());
  trace.projected_responses.reserve(k);
  for (std::size_t i = 0; i < k; ++i) trace.projected_responses.emplace_back(hv.row(1 + i).begin(), hv.row(1 + i).end());
  const Tensor2& sv = t.value(trace.scores_var_);
  trace.scores.assign(sv.flat().begin(), sv.flat().end());
  return trace;
}

ScoringTrace Ranker::forward(const CandidateGroup& group, num::ParamSet* grads) const {
  std::vector<std::span<const float>> cands;
  cands.reserve(group.candidates.size());
  for (const auto& c : group.candidates) cands.push_back(c.feature);
  return forward(group.instruction, cands, grads);
}

std::vector<double> Ranker::score(const CandidateGroup& group) const { return forward(group).scores; }

double Ranker::score_pair(std::span<const float> instruction, std::span<const float> response) const {
  if (shape_.kind != RankerKind::pointwise) {
    throw ContractViolation("score_pair: only the pointwise ranker scores pairs independently");
  }
  const std::span<const float> one[] = {response};
  return forward(instruction, one).scores.front();
}

void ScoringTrace::backward(std::span<const double> score_grads) {
  if (tape_ == nullptr) throw ContractViolation("ScoringTrace::backward: trace has no tape");
  if (score_grads.size() != scores.size()) {
    throw ContractViolation("ScoringTrace::backward: " + std::to_string(score_grads.size()) +
                            " score gradients for " + std::to_string(scores.size()) + " scores");
  }
  tape_->backward(scores_var_, Tensor2::row_vector(score_grads));
}

// ---- plain helpers ------------------------------------------------------------

double cosine_relevance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ContractViolation("cosine_relevance: dimensions " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()) + " differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), kCosineEps) * std::max(std::sqrt(nb), kCosineEps);
  return std::clamp(dot / denom, -1.0, 1.0);
}

double learnable_relevance(std::span<const double> a, std::span<const double> b, std::span<const double> weight,
                           double bias) {
  if (a.size() != b.size() || weight.size() != a.size() + b.size()) {
    throw ContractViolation("learnable_relevance: weight has " + std::to_string(weight.size()) +
                            " entries, expected " + std::to_string(a.size() + b.size()));
  }
  double s = bias;
  for (std::size_t i = 0; i < a.size(); ++i) s += weight[i] * a[i];
  for (std::size_t i = 0; i < b.size(); ++i) s += weight[a.size() + i] * b[i];
  return s;
}

std::size_t select_best(std::span<const double> scores) {
  if (scores.empty()) throw ContractViolation("select_best: no scores");
  std::size_t best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw ContractViolation("select_best: NaN score at index " + std::to_string(i));
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

}  // namespace lranker
