#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lranker/errors.hpp"
#include "lranker/optim.hpp"

namespace lranker {
namespace {

num::ParamSet scalar_set(double p) {
  num::ParamSet s;
  s.add("w", num::Tensor2(1, 1, p));
  return s;
}

double value(const num::ParamSet& s) { return s[0].value(0, 0); }

TEST(Sgd, ConstantGradientWithoutMomentumMovesLinearly) {
  auto p = scalar_set(1.0);
  const auto g = scalar_set(0.5);
  OptimState st;
  for (int i = 0; i < 4; ++i) ASSERT_TRUE(sgd_step(p, g, 0.1, 0.0, 0.0, st));
  EXPECT_NEAR(value(p), 1.0 - 4 * 0.05, 1e-15);
  EXPECT_EQ(st.step, 4u);
}

TEST(Sgd, HalfSquareDecaysGeometrically) {
  // f = p^2/2, g = p: p <- 0.9 p per step.
  auto p = scalar_set(1.0);
  OptimState st;
  for (int i = 0; i < 3; ++i) ASSERT_TRUE(sgd_step(p, scalar_set(value(p)), 0.1, 0.0, 0.0, st));
  EXPECT_NEAR(value(p), 0.729, 1e-12);
}

TEST(Sgd, MomentumBufferFollowsRecursion) {
  // With g=0 after a unit impulse the buffer decays as momentum^t.
  auto p = scalar_set(0.0);
  OptimState st;
  ASSERT_TRUE(sgd_step(p, scalar_set(1.0), 0.0, 0.9, 0.0, st));
  for (int i = 0; i < 3; ++i) ASSERT_TRUE(sgd_step(p, scalar_set(0.0), 0.0, 0.9, 0.0, st));
  EXPECT_NEAR(st.first[0](0, 0), 0.729, 1e-15);
}

TEST(Sgd, TwoStepHandTrace) {
  // v1 = 1, p1 = 1 - 0.1 = 0.9;  v2 = 0.9*1 + 2 = 2.9, p2 = 0.9 - 0.29 = 0.61.
  auto p = scalar_set(1.0);
  OptimState st;
  ASSERT_TRUE(sgd_step(p, scalar_set(1.0), 0.1, 0.9, 0.0, st));
  EXPECT_NEAR(value(p), 0.9, 1e-12);
  ASSERT_TRUE(sgd_step(p, scalar_set(2.0), 0.1, 0.9, 0.0, st));
  EXPECT_NEAR(value(p), 0.61, 1e-12);
}

TEST(Sgd, WeightDecayIsAddedToGradient) {
  auto p = scalar_set(2.0);
  OptimState st;
  ASSERT_TRUE(sgd_step(p, scalar_set(0.0), 0.1, 0.0, 0.5, st));
  EXPECT_NEAR(value(p), 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
}

TEST(AdamW, FirstStepIsLrTimesSignOfGradient) {
  for (double g : {1.0, -3.0, 1e-3}) {
    auto p = scalar_set(0.0);
    OptimState st;
    ASSERT_TRUE(adamw_step(p, scalar_set(g), 1e-3, 0.9, 0.999, 0.0, st));
    const double expect = -1e-3 * std::abs(g) / (std::abs(g) + 1e-8) * (g > 0 ? 1 : -1);
    EXPECT_NEAR(value(p), expect, 1e-15);
  }
  auto p = scalar_set(0.0);
  OptimState st;
  ASSERT_TRUE(adamw_step(p, scalar_set(1.0), 1e-3, 0.9, 0.999, 0.0, st));
  EXPECT_NEAR(value(p), -1e-3 / (1.0 + 1e-8), 1e-18);
}

TEST(AdamW, ZeroGradientWithoutDecayNeverMoves) {
  auto p = scalar_set(1.25);
  OptimState st;
  for (int i = 0; i < 10; ++i) ASSERT_TRUE(adamw_step(p, scalar_set(0.0), 1e-2, 0.9, 0.999, 0.0, st));
  EXPECT_EQ(value(p), 1.25);
}

TEST(AdamW, DecoupledDecayShrinksByLrTimesDecay) {
  auto p = scalar_set(3.0);
  OptimState st;
  ASSERT_TRUE(adamw_step(p, scalar_set(0.0), 0.01, 0.9, 0.999, 0.1, st));
  EXPECT_NEAR(value(p), 3.0 * (1.0 - 0.01 * 0.1), 1e-15);
}

TEST(AdamW, MatchesReferenceLoop) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const double lr = 3e-3, b1 = 0.8, b2 = 0.99, wd = 0.05;
  num::ParamSet p;
  p.add("a", num::Tensor2(2, 3, 0.5));
  p.add("b", num::Tensor2(1, 4, -0.25));
  std::vector<double> ref = p.flatten(), m(ref.size(), 0.0), v(ref.size(), 0.0);
  OptimState st;
  for (int t = 1; t <= 50; ++t) {
    auto g = p.zeros_like();
    std::vector<double> gf(ref.size());
    for (auto& x : gf) x = n(rng);
    g.unflatten(gf);
    ASSERT_TRUE(adamw_step(p, g, lr, b1, b2, wd, st));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * gf[i];
      v[i] = b2 * v[i] + (1 - b2) * gf[i] * gf[i];
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      ref[i] -= lr * (mh / (std::sqrt(vh) + 1e-8) + wd * ref[i]);
    }
  }
  const auto got = p.flatten();
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-14);
}

TEST(Optimizers, NonFiniteGradientLeavesEverythingUntouched) {
  for (double bad : {std::nan(""), HUGE_VAL}) {
    auto p = scalar_set(1.0);
    OptimState st;
    ASSERT_TRUE(adamw_step(p, scalar_set(0.5), 0.1, 0.9, 0.999, 0.0, st));
    const auto before = p;
    const auto m = st.first[0], v = st.second[0];
    EXPECT_FALSE(adamw_step(p, scalar_set(bad), 0.1, 0.9, 0.999, 0.0, st));
    EXPECT_EQ(p, before);
    EXPECT_EQ(st.step, 1u);
    EXPECT_EQ(st.first[0], m);
    EXPECT_EQ(st.second[0], v);
    EXPECT_FALSE(sgd_step(p, scalar_set(bad), 0.1, 0.9, 0.0, st));
    EXPECT_EQ(p, before);
  }
}

TEST(Optimizers, ShapeMismatchIsRejected) {
  auto p = scalar_set(1.0);
  num::ParamSet g;
  g.add("w", num::Tensor2(1, 2));
  OptimState st;
  EXPECT_THROW(sgd_step(p, g, 0.1, 0.0, 0.0, st), ContractViolation);
  EXPECT_THROW(adamw_step(p, g, 0.1, 0.9, 0.999, 0.0, st), ContractViolation);
}

TEST(Schedule, CosineEndpointsAndMidpoint) {
  EXPECT_DOUBLE_EQ(lr_at(Schedule::cosine, 0.2, 0, 100), 0.2);
  EXPECT_NEAR(lr_at(Schedule::cosine, 0.2, 50, 100), 0.1, 1e-15);
  EXPECT_NEAR(lr_at(Schedule::cosine, 0.2, 100, 100), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(lr_at(Schedule::constant, 0.2, 77, 100), 0.2);
}

TEST(Schedule, CosineIsNonIncreasing) {
  double prev = 1.0;
  for (std::size_t s = 0; s <= 37; ++s) {
    const double lr = lr_at(Schedule::cosine, 1.0, s, 37);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Schedule, ZeroTotalFallsBackToConstant) {
  EXPECT_DOUBLE_EQ(lr_at(Schedule::cosine, 0.3, 5, 0), 0.3);
}

TEST(Schedule, StepBeyondTotalIsRejected) {
  EXPECT_THROW(lr_at(Schedule::cosine, 0.3, 11, 10), ContractViolation);
}

TEST(Names, RoundTrip) {
  for (auto k : {OptimizerKind::sgd, OptimizerKind::adamw}) EXPECT_EQ(parse_optimizer(to_string(k)), k);
  for (auto s : {Schedule::constant, Schedule::cosine}) EXPECT_EQ(parse_schedule(to_string(s)), s);
  EXPECT_THROW(parse_optimizer("rmsprop"), ContractViolation);
  EXPECT_THROW(parse_schedule("linear"), ContractViolation);
}

}  // namespace
}  // namespace lranker
