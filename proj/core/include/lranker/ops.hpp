#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lranker/tape.hpp"
#include "lranker/tensor.hpp"

namespace lranker::num {

inline constexpr Scalar kLayerNormEps = 1e-5;

// Plain (tape-free) scalar/vector helpers.

/// Max-subtracted softmax; outputs sum to 1 and are shift-invariant.
std::vector<Scalar> softmax(std::span<const Scalar> v);
Scalar log_sum_exp(std::span<const Scalar> v);
/// tanh-approximation GELU and its exact derivative.
Scalar gelu(Scalar x);
Scalar gelu_derivative(Scalar x);

// Tape ops. Every op checks shapes and throws ContractViolation naming both.

/// x[n×a]·W[a×b] + bias[1×b]
Var linear(Tape& t, Var x, Var w, Var bias);
/// x[n×a]·W[a×b], no bias
Var matmul(Tape& t, Var a, Var b);
/// a[n×d]·b[m×d]ᵀ
Var matmul_nt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var x, Scalar factor);
Var gelu(Tape& t, Var x);
Var softmax_rows(Tape& t, Var x);
/// Per-row (x − mean)/sqrt(var + eps)·gain + shift with population variance.
Var layer_norm(Tape& t, Var x, Var gain, Var shift, Scalar eps = kLayerNormEps);
Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t count);
Var concat_rows(Tape& t, Var top, Var bottom);

/// Named tensor shape, used to enumerate parameters of composite blocks.
struct ParamShape {
  std::string name;
  std::size_t rows;
  std::size_t cols;
};

/// Parameters of one pre-norm encoder block: single-head attention followed
/// by a GELU feed-forward of width expansion·d. No positional information.
struct AttentionBlockVars {
  Var ln1_gain, ln1_shift;
  Var q_weight, q_bias, k_weight, k_bias, v_weight, v_bias, o_weight, o_bias;
  Var ln2_gain, ln2_shift;
  Var ffn_in_weight, ffn_in_bias, ffn_out_weight, ffn_out_bias;
};

inline constexpr std::size_t kFfnExpansion = 4;

/// Shapes in the same order as AttentionBlockVars' members.
std::vector<ParamShape> attention_block_shapes(std::size_t d, std::size_t expansion = kFfnExpansion);
std::size_t attention_block_param_count(std::size_t d, std::size_t expansion = kFfnExpansion);

/// Binds `vars` from tape Vars listed in attention_block_shapes() order.
AttentionBlockVars attention_block_vars(std::span<const Var> ordered);

/// Y = X + Attn(LN1(X)); out = Y + FFN(LN2(Y)). X is (K+1)×d.
Var attention_block(Tape& t, Var x, const AttentionBlockVars& p);

}  // namespace lranker::num
