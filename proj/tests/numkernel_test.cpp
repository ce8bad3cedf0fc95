#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "lranker/errors.hpp"
#include "lranker/grad_check.hpp"
#include "lranker/ops.hpp"
#include "gradient_cases.hpp"
#include "test_support.hpp"

namespace lranker {
namespace {

using num::Tape;
using num::Tensor2;
using num::Var;
using testing::probe_program;
using testing::random_tensor;

constexpr double kStep = 1e-4;
constexpr double kTol = 1e-4;
constexpr int kSeeds = 20;

std::vector<Tensor2> block_params(std::size_t d, std::mt19937_64& rng) {
  std::vector<Tensor2> out;
  for (const auto& s : num::attention_block_shapes(d)) out.push_back(random_tensor(s.rows, s.cols, rng, 0.4));
  return out;
}

Var run_block(Tape& t, Var x, const std::vector<Tensor2>& params) {
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(t.constant(p));
  return num::attention_block(t, x, num::attention_block_vars(vars));
}

TEST(Tensor2, RejectsDataOfWrongLength) {
  EXPECT_THROW(Tensor2(2, 3, std::vector<double>(5)), ContractViolation);
}

TEST(Linear, IdentityWeights) {
  Tape t;
  Var y = num::linear(t, t.constant({{1, 2}}), t.constant({{1, 0}, {0, 1}}), t.constant({{0, 0}}));
  EXPECT_EQ(t.value(y), (Tensor2{{1, 2}}));
}

TEST(Linear, HandArithmetic) {
  Tape t;
  Var y = num::linear(t, t.constant({{1, 1}}), t.constant({{2}, {3}}), t.constant({{1}}));
  EXPECT_EQ(t.value(y), (Tensor2{{6}}));
}

TEST(Linear, ShapeMismatchNamesBothShapes) {
  Tape t;
  try {
    num::linear(t, t.constant(Tensor2(1, 3)), t.constant(Tensor2(2, 2)), t.constant(Tensor2(1, 2)));
    FAIL() << "expected a contract violation";
  } catch (const ContractViolation& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x2"), std::string::npos) << msg;
  }
}

TEST(Linear, GradientMatchesFiniteDifferencesAtCoarseStep) {
  std::mt19937_64 rng(1);
  auto probe = probe_program({random_tensor(3, 5, rng), random_tensor(5, 4, rng), random_tensor(1, 4, rng)},
                             [](Tape& t, const std::vector<Var>& v) { return num::linear(t, v[0], v[1], v[2]); }, 2);
  const auto r = num::grad_check(probe.fn, probe.point, 1e-3, kTol);
  EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(Softmax, UniformOnEqualInputs) {
  for (double p : num::softmax(std::vector<double>{0, 0, 0})) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeInputsDoNotOverflow) {
  const auto p = num::softmax(std::vector<double>{1000, 0});
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_NEAR(p[1], 0.0, 1e-300);
  EXPECT_TRUE(std::isfinite(p[1]));
}

TEST(Softmax, HandEvaluatedValues) {
  // exp(k) / (e + e^2 + e^3), computed independently of the library.
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const auto p = num::softmax(std::vector<double>{1, 2, 3});
  EXPECT_NEAR(p[0], 0.0900, 1e-4);
  EXPECT_NEAR(p[1], 0.2447, 1e-4);
  EXPECT_NEAR(p[2], 0.6652, 1e-4);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(p[k], std::exp(k + 1.0) / z, 1e-15);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::vector<double> v(7);
    for (auto& x : v) x = n(rng);
    const auto p = num::softmax(v);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
    for (auto& x : v) x += 123.25;
    const auto q = num::softmax(v);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  Tape t;
  Var y = num::layer_norm(t, t.constant({{4, 4, 4, 4}}), t.constant({{1, 1, 1, 1}}), t.constant({{0, 0, 0, 0}}));
  for (double v : t.value(y).flat()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, TwoElementRowUsesPopulationVariance) {
  Tape t;
  Var y = num::layer_norm(t, t.constant({{-1, 1}}), t.constant({{1, 1}}), t.constant({{0, 0}}));
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(t.value(y)(0, 0), -expected, 1e-15);
  EXPECT_NEAR(t.value(y)(0, 1), expected, 1e-15);
  EXPECT_NEAR(t.value(y)(0, 1), 1.0, 1e-5);
}

TEST(Gelu, ZeroAndAsymptote) {
  EXPECT_EQ(num::gelu(0.0), 0.0);
  EXPECT_GE(num::gelu(10.0), 9.99);
  EXPECT_LE(num::gelu(10.0), 10.0);
}

TEST(Gelu, MonotoneOnTestedRange) {
  double prev = num::gelu(-0.5);
  for (double x = -0.49; x <= 10.0; x += 0.01) {
    const double y = num::gelu(x);
    EXPECT_GT(y, prev) << x;
    prev = y;
  }
}

TEST(Gelu, DerivativeMatchesFiniteDifferencesAt50Points) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int i = 0; i < 50; ++i) {
    const double x = u(rng);
    const double numeric = (num::gelu(x + kStep) - num::gelu(x - kStep)) / (2 * kStep);
    EXPECT_LT(num::relative_error(num::gelu_derivative(x), numeric), kTol) << x;
  }
}

TEST(AttentionBlock, CandidatePermutationPermutesOutputRows) {
  std::mt19937_64 rng(7);
  const std::size_t d = 8, k = 5;
  const auto params = block_params(d, rng);
  const Tensor2 x = random_tensor(k + 1, d, rng);
  std::vector<std::size_t> perm{0, 3, 1, 5, 2, 4};  // row 0 (instruction) stays first
  Tensor2 xp(k + 1, d);
  for (std::size_t r = 0; r <= k; ++r) std::copy(x.row(perm[r]).begin(), x.row(perm[r]).end(), xp.row(r).begin());

  Tape t1, t2;
  const Tensor2 y = t1.value(run_block(t1, t1.constant(x), params));
  const Tensor2 yp = t2.value(run_block(t2, t2.constant(xp), params));
  for (std::size_t r = 0; r <= k; ++r)
    for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(yp(r, c), y(perm[r], c), 1e-12);
}

TEST(AttentionBlock, ZeroOutputProjectionsGiveResidualIdentity) {
  std::mt19937_64 rng(8);
  const std::size_t d = 6;
  auto params = block_params(d, rng);
  const auto shapes = num::attention_block_shapes(d);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].name.rfind("attn.o.", 0) == 0 || shapes[i].name.rfind("ffn.out.", 0) == 0) params[i].fill(0.0);
  }
  const Tensor2 x = random_tensor(4, d, rng);
  Tape t;
  EXPECT_EQ(t.value(run_block(t, t.constant(x), params)), x);
}

TEST(AttentionBlock, ParameterCountAtWidth64) {
  // 4 projections (64·64 + 64), two norms (2·64 each), FFN 64→256→64.
  const std::size_t expected = 4 * (64 * 64 + 64) + 2 * 128 + (64 * 256 + 256) + (256 * 64 + 64);
  EXPECT_EQ(num::attention_block_param_count(64), expected);
  EXPECT_EQ(expected, 49'984u);
}

TEST(Tape, FanOutAccumulatesGradients) {
  Tape t;
  Var x = t.input({{1.5, -2.0}});
  Var y = num::add(t, num::scale(t, x, 3.0), x);
  t.backward(y);
  EXPECT_EQ(t.grad(x), (Tensor2{{4.0, 4.0}}));
}

TEST(Tape, ForwardIsDeterministic) {
  std::mt19937_64 rng(9);
  const auto params = block_params(8, rng);
  const Tensor2 x = random_tensor(4, 8, rng);
  Tape a, b;
  EXPECT_EQ(a.value(run_block(a, a.constant(x), params)), b.value(run_block(b, b.constant(x), params)));
}

TEST(GradCheck, QuadraticAgreesExactly) {
  num::ProbedFunction fn;
  fn.value = [](std::span<const double> p) {
    double s = 0.0;
    for (double x : p) s += 0.5 * x * x;
    return s;
  };
  fn.gradient = [](std::span<const double> p) { return std::vector<double>(p.begin(), p.end()); };
  const std::vector<double> point{0.3, -1.2, 4.0, 0.0};
  const auto r = num::grad_check(fn, point, 1e-3, 1e-8);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.coordinates_checked, 4u);
}

TEST(GradCheck, RejectsNonPositiveStep) {
  num::ProbedFunction fn{[](std::span<const double>) { return 0.0; },
                         [](std::span<const double> p) { return std::vector<double>(p.size()); }};
  const std::vector<double> point{1.0};
  EXPECT_THROW(num::grad_check(fn, point, 0.0, kTol), ContractViolation);
}

TEST(GradCheck, NonFiniteValueIsAProbeError) {
  num::ProbedFunction fn{[](std::span<const double> p) { return std::log(p[0]); },
                         [](std::span<const double> p) { return std::vector<double>{1.0 / p[0]}; }};
  const std::vector<double> point{0.0};
  EXPECT_THROW(num::grad_check(fn, point, 1e-3, kTol), ProbeError);
}

class PrimitiveGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferencesOver20Seeds) {
  const auto c = testing::primitive_cases()[GetParam()];
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    auto probe = probe_program(c.inputs(rng), c.program, 77 + seed);
    const auto r = num::grad_check(probe.fn, probe.point, kStep, kTol);
    EXPECT_TRUE(r.passed) << c.name << " seed " << seed << " err " << r.max_relative_error << " at " << r.worst_index
                          << " analytic " << r.analytic_at_worst << " numeric " << r.numeric_at_worst;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient, ::testing::Range<std::size_t>(0, 14),
                         [](const auto& info) { return std::string(testing::primitive_cases()[info.param].name); });

}  // namespace
}  // namespace lranker
