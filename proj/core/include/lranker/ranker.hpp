#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lranker/feature_store.hpp"
#include "lranker/ops.hpp"
#include "lranker/params.hpp"
#include "lranker/tape.hpp"

namespace lranker {

enum class RankerKind : std::uint32_t { listwise = 0, pointwise = 1 };
enum class RelevanceKind : std::uint32_t { cosine = 0, learnable = 1 };

/// Architecture ablations. `full` is the default ranker.
enum class Variant : std::uint8_t {
  full,
  /// Blocks run directly at d_model; no projection tensors.
  no_projection,
  /// The projected instruction is replaced by a learned vector.
  no_instruction,
  /// Pointwise only: relevance is computed on projected features directly.
  no_mlp_block,
};

std::string to_string(RankerKind k);
std::string to_string(RelevanceKind k);
std::string to_string(Variant v);
RankerKind parse_ranker_kind(std::string_view s);
RelevanceKind parse_relevance_kind(std::string_view s);
Variant parse_variant(std::string_view s);

inline constexpr std::size_t kDefaultProjDim = 64;
inline constexpr std::size_t kDefaultHiddenDim = 128;
inline constexpr double kCosineEps = 1e-8;

struct RankerShape {
  RankerKind kind = RankerKind::listwise;
  RelevanceKind relevance = RelevanceKind::cosine;
  std::size_t d_model = 0;
  std::size_t d_proj = kDefaultProjDim;
  std::size_t d_hidden = kDefaultHiddenDim;
  /// Transformer blocks (listwise) or MLP blocks (pointwise).
  std::size_t blocks = 1;
  Variant variant = Variant::full;
  /// Optional learnable multiplier on cosine scores. Off by default, which
  /// keeps pointwise probabilities within sigmoid([-1, 1]).
  bool logit_scale = false;

  /// Width the blocks operate at.
  std::size_t width() const noexcept { return variant == Variant::no_projection ? d_model : d_proj; }

  friend bool operator==(const RankerShape&, const RankerShape&) = default;
};

/// Throws ContractViolation for unsupported combinations.
void validate_shape(const RankerShape& shape);
/// Normalizes implied fields (no_mlp_block => blocks 0) and validates.
RankerShape normalized(RankerShape shape);

/// Names and shapes of every learnable tensor, in storage order.
std::vector<num::ParamShape> parameter_shapes(const RankerShape& shape);
/// Closed-form count of learnable scalars; never allocates the tensors.
std::size_t parameter_count(const RankerShape& shape);

/// Intermediate activations and scores of one forward pass.
class ScoringTrace {
 public:
  /// ĩ: the instruction row after projection and blocks.
  std::vector<double> projected_instruction;
  /// r̃_k for every candidate.
  std::vector<std::vector<double>> projected_responses;
  std::vector<double> scores;
  /// Pointwise classification only: logistic(s_k). Filled by the loss.
  std::vector<double> probabilities;

  /// Propagates dLoss/dscores into the gradient sink given to forward().
  void backward(std::span<const double> score_grads);
  bool differentiable() const noexcept { return tape_ != nullptr && tape_->requires_grad(scores_var_); }

 private:
  friend class Ranker;
  std::unique_ptr<num::Tape> tape_;
  num::Var scores_var_;
};

class Ranker {
 public:
  /// Xavier-uniform weights, zero biases and shifts, unit gains. Deterministic per seed.
  static Ranker initialize(const RankerShape& shape, std::uint64_t seed);

  /// Adopts existing parameters; names and shapes must match parameter_shapes(shape).
  Ranker(RankerShape shape, num::ParamSet params);

  const RankerShape& shape() const noexcept { return shape_; }
  const num::ParamSet& params() const noexcept { return params_; }
  num::ParamSet& params() noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.scalar_count(); }

  /// Scores `candidates` against `instruction`. When `grads` is non-null
  /// (same layout as params()), the returned trace can run backward() and
  /// accumulates into it; both this ranker and `grads` must outlive the trace.
  ScoringTrace forward(std::span<const float> instruction,
                       std::span<const std::span<const float>> candidates,
                       num::ParamSet* grads = nullptr) const;
  ScoringTrace forward(const CandidateGroup& group, num::ParamSet* grads = nullptr) const;

  std::vector<double> score(const CandidateGroup& group) const;
  /// Pointwise only: relevance of one (instruction, response) pair.
  double score_pair(std::span<const float> instruction, std::span<const float> response) const;

 private:
  num::Var relevance(num::Tape& t, num::Var anchor, num::Var rows,
                     const std::vector<num::Var>& bound) const;

  RankerShape shape_;
  num::ParamSet params_;
};

/// a·b / (max(|a|, eps)·max(|b|, eps)), clamped to [-1, 1].
double cosine_relevance(std::span<const double> a, std::span<const double> b);
/// W·concat(a, b) + bias
double learnable_relevance(std::span<const double> a, std::span<const double> b,
                           std::span<const double> weight, double bias);

/// Argmax with ties broken by the smallest index. Throws on empty or NaN input.
std::size_t select_best(std::span<const double> scores);

namespace ops {
/// 1×K cosine scores of every row of `rows` (K×d) against `anchor` (1×d).
num::Var cosine_scores(num::Tape& t, num::Var anchor, num::Var rows);
/// 1×K scores W·concat(anchor, row_k) + bias; W is 1×2d, bias 1×1.
num::Var learnable_scores(num::Tape& t, num::Var anchor, num::Var rows, num::Var weight, num::Var bias);
/// x·s for a 1×1 scalar s.
num::Var scale_by(num::Tape& t, num::Var x, num::Var s);
}  // namespace ops

}  // namespace lranker
