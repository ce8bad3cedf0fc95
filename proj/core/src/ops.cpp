#include "lranker/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lranker/errors.hpp"

namespace lranker::num {
namespace {

constexpr Scalar kGeluCoeff = 0.044715;
const Scalar kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

[[noreturn]] void shape_error(const char* op, const Tensor2& a, const Tensor2& b) {
  throw ContractViolation(std::string(op) + ": incompatible shapes " + a.shape_string() +
                          " and " + b.shape_string());
}

void accumulate(Tensor2& into, const Tensor2& from) {
  auto dst = into.flat();
  auto src = from.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// out[n×b] += a[n×k]·b[k×b]
void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    Scalar* out_row = out.row(i).data();
    const Scalar* a_row = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = a_row[p];
      if (av == 0.0) continue;
      const Scalar* b_row = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
    }
  }
}

// out[n×m] += a[n×k]·b[m×k]ᵀ
void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar* a_row = a.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const Scalar* b_row = b.row(j).data();
      Scalar acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
      out(i, j) += acc;
    }
  }
}

// out[k×m] += a[n×k]ᵀ·b[n×m]
void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar* a_row = a.row(i).data();
    const Scalar* b_row = b.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = a_row[p];
      if (av == 0.0) continue;
      Scalar* out_row = out.row(p).data();
      for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
    }
  }
}

}  // namespace

std::vector<Scalar> softmax(std::span<const Scalar> v) {
  if (v.empty()) throw ContractViolation("softmax: empty input");
  const Scalar mx = *std::max_element(v.begin(), v.end());
  std::vector<Scalar> out(v.size());
  Scalar sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (Scalar& x : out) x /= sum;
  return out;
}

Scalar log_sum_exp(std::span<const Scalar> v) {
  if (v.empty()) throw ContractViolation("log_sum_exp: empty input");
  const Scalar mx = *std::max_element(v.begin(), v.end());
  Scalar sum = 0.0;
  for (Scalar x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

Scalar gelu(Scalar x) {
  const Scalar inner = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(inner));
}

Scalar gelu_derivative(Scalar x) {
  const Scalar inner = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  const Scalar th = std::tanh(inner);
  const Scalar d_inner = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * d_inner;
}

Var linear(Tape& t, Var x, Var w, Var bias) {
  const Tensor2& xv = t.value(x);
  const Tensor2& wv = t.value(w);
  const Tensor2& bv = t.value(bias);
  if (xv.cols() != wv.rows()) shape_error("linear", xv, wv);
  if (bv.rows() != 1 || bv.cols() != wv.cols()) shape_error("linear(bias)", wv, bv);

  Tensor2 out(xv.rows(), wv.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    std::copy(bv.flat().begin(), bv.flat().end(), out.row(i).begin());
  }
  gemm_nn(xv, wv, out);

  return t.push(std::move(out), {x, w, bias}, [x, w, bias](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    if (tp.requires_grad(w)) gemm_tn(tp.value(x), g, tp.grad(w));
    if (tp.requires_grad(bias)) {
      Tensor2& gb = tp.grad(bias);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
    }
    if (tp.requires_grad(x)) gemm_nt(g, tp.value(w), tp.grad(x));
  });
}

Var matmul(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Tensor2 out(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  return t.push(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    if (tp.requires_grad(a)) gemm_nt(g, tp.value(b), tp.grad(a));
    if (tp.requires_grad(b)) gemm_tn(tp.value(a), g, tp.grad(b));
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  if (av.cols() != bv.cols()) shape_error("matmul_nt", av, bv);
  Tensor2 out(av.rows(), bv.rows());
  gemm_nt(av, bv, out);
  return t.push(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    // C = A·Bᵀ: dA = G·B, dB = Gᵀ·A
    if (tp.requires_grad(a)) gemm_nn(g, tp.value(b), tp.grad(a));
    if (tp.requires_grad(b)) gemm_tn(g, tp.value(a), tp.grad(b));
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  if (!av.same_shape(bv)) shape_error("add", av, bv);
  Tensor2 out = av;
  accumulate(out, bv);
  return t.push(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    if (tp.requires_grad(a)) accumulate(tp.grad(a), g);
    if (tp.requires_grad(b)) accumulate(tp.grad(b), g);
  });
}

Var scale(Tape& t, Var x, Scalar factor) {
  Tensor2 out = t.value(x);
  for (Scalar& v : out.flat()) v *= factor;
  return t.push(std::move(out), {x}, [x, factor](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    Tensor2& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.flat()[i] += factor * g.flat()[i];
  });
}

Var gelu(Tape& t, Var x) {
  Tensor2 out = t.value(x);
  for (Scalar& v : out.flat()) v = gelu(v);
  return t.push(std::move(out), {x}, [x](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    const Tensor2& xv = tp.value(x);
    Tensor2& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx.flat()[i] += g.flat()[i] * gelu_derivative(xv.flat()[i]);
    }
  });
}

Var softmax_rows(Tape& t, Var x) {
  const Tensor2& xv = t.value(x);
  Tensor2 out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    auto row = softmax(xv.row(i));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return t.push(std::move(out), {x}, [x](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    const Tensor2& yv = tp.value(Var{self});
    Tensor2& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      Scalar dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * yv(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += yv(i, j) * (g(i, j) - dot);
    }
  });
}

Var layer_norm(Tape& t, Var x, Var gain, Var shift, Scalar eps) {
  const Tensor2& xv = t.value(x);
  const Tensor2& gv = t.value(gain);
  const Tensor2& sv = t.value(shift);
  const std::size_t n = xv.rows(), d = xv.cols();
  if (d < 2) throw ContractViolation("layer_norm: needs at least 2 features, got " + xv.shape_string());
  if (gv.rows() != 1 || gv.cols() != d) shape_error("layer_norm(gain)", xv, gv);
  if (!gv.same_shape(sv)) shape_error("layer_norm(shift)", gv, sv);

  Tensor2 normalized(n, d);
  std::vector<Scalar> inv_std(n);
  Tensor2 out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = xv.row(i);
    Scalar mean = 0.0;
    for (Scalar v : row) mean += v;
    mean /= static_cast<Scalar>(d);
    Scalar var = 0.0;
    for (Scalar v : row) var += (v - mean) * (v - mean);
    var /= static_cast<Scalar>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      normalized(i, j) = (row[j] - mean) * inv_std[i];
      out(i, j) = normalized(i, j) * gv(0, j) + sv(0, j);
    }
  }

  return t.push(std::move(out), {x, gain, shift},
                [x, gain, shift, normalized = std::move(normalized),
                 inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
                  const Tensor2& g = tp.grad(self);
                  const Tensor2& gv2 = tp.value(gain);
                  const std::size_t rows = g.rows(), cols = g.cols();
                  if (tp.requires_grad(gain)) {
                    Tensor2& gg = tp.grad(gain);
                    for (std::size_t i = 0; i < rows; ++i)
                      for (std::size_t j = 0; j < cols; ++j) gg(0, j) += g(i, j) * normalized(i, j);
                  }
                  if (tp.requires_grad(shift)) {
                    Tensor2& gs = tp.grad(shift);
                    for (std::size_t i = 0; i < rows; ++i)
                      for (std::size_t j = 0; j < cols; ++j) gs(0, j) += g(i, j);
                  }
                  if (tp.requires_grad(x)) {
                    Tensor2& gx = tp.grad(x);
                    const Scalar inv_d = 1.0 / static_cast<Scalar>(cols);
                    for (std::size_t i = 0; i < rows; ++i) {
                      Scalar mean_dn = 0.0, mean_dn_n = 0.0;
                      for (std::size_t j = 0; j < cols; ++j) {
                        const Scalar dn = g(i, j) * gv2(0, j);
                        mean_dn += dn;
                        mean_dn_n += dn * normalized(i, j);
                      }
                      mean_dn *= inv_d;
                      mean_dn_n *= inv_d;
                      for (std::size_t j = 0; j < cols; ++j) {
                        const Scalar dn = g(i, j) * gv2(0, j);
                        gx(i, j) += inv_std[i] * (dn - mean_dn - normalized(i, j) * mean_dn_n);
                      }
                    }
                  }
                });
}

Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t count) {
  const Tensor2& xv = t.value(x);
  if (begin + count > xv.rows()) {
    throw ContractViolation("slice_rows: rows [" + std::to_string(begin) + ", " +
                            std::to_string(begin + count) + ") out of " + xv.shape_string());
  }
  Tensor2 out(count, xv.cols());
  std::copy(xv.flat().begin() + static_cast<std::ptrdiff_t>(begin * xv.cols()),
            xv.flat().begin() + static_cast<std::ptrdiff_t>((begin + count) * xv.cols()),
            out.flat().begin());
  return t.push(std::move(out), {x}, [x, begin](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    Tensor2& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gx(begin + i, j) += g(i, j);
  });
}

Var concat_rows(Tape& t, Var top, Var bottom) {
  const Tensor2& a = t.value(top);
  const Tensor2& b = t.value(bottom);
  if (a.cols() != b.cols()) shape_error("concat_rows", a, b);
  Tensor2 out(a.rows() + b.rows(), a.cols());
  std::copy(a.flat().begin(), a.flat().end(), out.flat().begin());
  std::copy(b.flat().begin(), b.flat().end(),
            out.flat().begin() + static_cast<std::ptrdiff_t>(a.size()));
  const std::size_t split = a.rows();
  return t.push(std::move(out), {top, bottom}, [top, bottom, split](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(self);
    if (tp.requires_grad(top)) {
      Tensor2& ga = tp.grad(top);
      for (std::size_t i = 0; i < split; ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j);
    }
    if (tp.requires_grad(bottom)) {
      Tensor2& gb = tp.grad(bottom);
      for (std::size_t i = split; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb(i - split, j) += g(i, j);
    }
  });
}

std::vector<ParamShape> attention_block_shapes(std::size_t d, std::size_t expansion) {
  const std::size_t h = expansion * d;
  return {
      {"ln1.gain", 1, d},        {"ln1.shift", 1, d},       {"attn.q.weight", d, d},
      {"attn.q.bias", 1, d},     {"attn.k.weight", d, d},   {"attn.k.bias", 1, d},
      {"attn.v.weight", d, d},   {"attn.v.bias", 1, d},     {"attn.o.weight", d, d},
      {"attn.o.bias", 1, d},     {"ln2.gain", 1, d},        {"ln2.shift", 1, d},
      {"ffn.in.weight", d, h},   {"ffn.in.bias", 1, h},     {"ffn.out.weight", h, d},
      {"ffn.out.bias", 1, d},
  };
}

std::size_t attention_block_param_count(std::size_t d, std::size_t expansion) {
  const std::size_t h = expansion * d;
  return 4 * d                // two layer norms
         + 4 * (d * d + d)    // q, k, v, o
         + (d * h + h)        // ffn in
         + (h * d + d);       // ffn out
}

AttentionBlockVars attention_block_vars(std::span<const Var> v) {
  if (v.size() != 16) throw ContractViolation("attention_block_vars: expected 16 tensors");
  return AttentionBlockVars{v[0], v[1], v[2],  v[3],  v[4],  v[5],  v[6],  v[7],
                            v[8], v[9], v[10], v[11], v[12], v[13], v[14], v[15]};
}

Var attention_block(Tape& t, Var x, const AttentionBlockVars& p) {
  const std::size_t d = t.value(x).cols();
  if (t.value(p.q_weight).rows() != d) {
    throw ContractViolation("attention_block: input " + t.value(x).shape_string() +
                            " does not match block width " + t.value(p.q_weight).shape_string());
  }
  const Var n1 = layer_norm(t, x, p.ln1_gain, p.ln1_shift);
  const Var q = linear(t, n1, p.q_weight, p.q_bias);
  const Var k = linear(t, n1, p.k_weight, p.k_bias);
  const Var v = linear(t, n1, p.v_weight, p.v_bias);
  const Var logits = scale(t, matmul_nt(t, q, k), 1.0 / std::sqrt(static_cast<Scalar>(d)));
  const Var attn = softmax_rows(t, logits);
  const Var mixed = linear(t, matmul(t, attn, v), p.o_weight, p.o_bias);
  const Var y = add(t, x, mixed);

  const Var n2 = layer_norm(t, y, p.ln2_gain, p.ln2_shift);
  const Var hidden = gelu(t, linear(t, n2, p.ffn_in_weight, p.ffn_in_bias));
  const Var ffn = linear(t, hidden, p.ffn_out_weight, p.ffn_out_bias);
  return add(t, y, ffn);
}

}  // namespace lranker::num
