// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "easq/adam.hpp"
#include "easq/error.hpp"
#include "easq/tensor.hpp"

namespace easq {
namespace {

Tensor random_param(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(Tensor::from({2, 3}, {1, 2, 3}), DimensionError);
  auto w = Tensor::zeros({2, 3});
  auto x = Tensor::zeros({2});
  EXPECT_THROW(affine(w, x), DimensionError);
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
}

TEST(Tensor, AffineValues) {
  auto w = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto x = Tensor::vector({1, 0, -1});
  auto y = affine(w, x);
  ASSERT_EQ(y.size(), 2u);
  EXPECT_DOUBLE_EQ(y[0], -2.0);
  EXPECT_DOUBLE_EQ(y[1], -2.0);
}

TEST(Tensor, SoftplusAndSigmoidClosedForms) {
  EXPECT_DOUBLE_EQ(softplus_value(0.0), 0.6931471805599453);
  EXPECT_NEAR(softplus_value(1.0), 1.3132616875182228, 1e-15);
  EXPECT_DOUBLE_EQ(sigmoid_value(0.0), 0.5);
  // Large arguments stay finite.
  EXPECT_NEAR(softplus_value(800.0), 800.0, 1e-12);
  EXPECT_NEAR(softplus_value(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid_value(-800.0), 0.0);
}

TEST(Tensor, ReluDerivativeAtZeroIsZero) {
  auto x = Tensor::vector({0.0, 1.0, -1.0}, true);
  backward(sum(relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
  EXPECT_EQ(x.grad()[2], 0.0);
}

TEST(Tensor, L2NormalizeUnitNormAndGuard) {
  auto x = Tensor::vector({3.0, 4.0});
  auto y = l2_normalize(x);
  EXPECT_DOUBLE_EQ(y[0], 0.6);
  EXPECT_DOUBLE_EQ(y[1], 0.8);
  auto z = Tensor::vector({0.0, 0.0}, true);
  auto yz = l2_normalize(z);
  EXPECT_EQ(yz[0], 0.0);
  backward(sum(yz));
  EXPECT_TRUE(std::isfinite(z.grad()[0]));
}

TEST(Tensor, StopGradBlocksGradientAndKeepsValue) {
  auto x = Tensor::vector({1.5, -2.0}, true);
  auto s = stop_grad(x);
  EXPECT_EQ(s[0], 1.5);
  EXPECT_EQ(s[1], -2.0);
  backward(add(sum(mul(s, s)), sum(x)));
  // Only the direct sum path reaches x.
  EXPECT_EQ(x.grad()[0], 1.0);
  EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(Tensor, BackwardRequiresScalar) {
  auto x = Tensor::vector({1.0, 2.0}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Tensor, SharedSubexpressionAccumulates) {
  auto x = Tensor::vector({2.0}, true);
  auto y = mul(x, x);        // x^2
  auto z = add(y, mul(y, x));  // x^2 + x^3
  backward(sum(z));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 * 2.0 + 3 * 4.0);
}

TEST(Tensor, RowScattersIntoTable) {
  auto table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  auto r = row(table, 1);
  EXPECT_EQ(r[0], 3.0);
  backward(sum(scale(r, 2.0)));
  const std::vector<double> want = {0, 0, 2, 2, 0, 0};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(table.grad()[i], want[i]);
  EXPECT_THROW(row(table, 3), DimensionError);
}

// Every differentiable op against central differences.
TEST(GradCheck, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  auto w = random_param({3, 4}, rng);
  auto x = random_param({4}, rng);
  auto b = random_param({3}, rng);
  auto t = random_param({5, 3}, rng);
  std::vector<Tensor> params = {w, x, b, t};
  auto f = [&] {
    auto h = add(affine(w, x), b);
    auto a = concat({softplus(h), sigmoid(h), relu(scale(h, 0.7))});
    auto s = softmax(slice(a, 2, 5));
    auto n = l2_normalize(mul(a, a));
    auto r = row(t, 2);
    auto g = mul_scalar(r, sum(s));
    auto l = log(add(softplus(g), Tensor::vector({1e-3, 1e-3, 1e-3})));
    return add(add(mean(l), dot(slice(n, 0, 3), r)), sub(sum(mask(h, std::vector<double>{1, 0, 1})),
                                                           mean(s)));
  };
  auto res = grad_check(f, params, 1e-6);
  EXPECT_LT(res.max_rel_error, 1e-6);
  EXPECT_GT(res.coordinates_checked, 20u);
}

TEST(GradCheck, StoppedBranchIsConstantUnderReplay) {
  std::mt19937_64 rng(3);
  auto x = random_param({3}, rng);
  auto y = random_param({3}, rng);
  std::vector<Tensor> params = {x, y};
  // d/dx sees only the first factor; the stopped copy is held constant.
  auto f = [&] { return dot(x, add(stop_grad(x), y)); };
  auto res = grad_check(f, params, 1e-6);
  EXPECT_LT(res.max_rel_error, 1e-7);
}

TEST(GradCheck, ParametersWithoutGradientAreReported) {
  auto x = Tensor::vector({1.0, 2.0}, true);
  auto unused = Tensor::vector({3.0}, true);
  std::vector<Tensor> params = {x, unused};
  auto res = grad_check([&] { return sum(mul(x, x)); }, params);
  EXPECT_EQ(res.stopped_parameters, 1u);
  EXPECT_EQ(res.coordinates_checked, 2u);
}

TEST(GradCheck, EpsOutOfRange) {
  auto x = Tensor::vector({1.0}, true);
  std::vector<Tensor> params = {x};
  EXPECT_THROW(grad_check([&] { return sum(x); }, params, 1e-2), ContractError);
  EXPECT_THROW(grad_check([&] { return sum(x); }, params, 1e-9), ContractError);
}

// Reference trajectory for p0 = 1, gradients 0.5, -0.25, 1.0.
TEST(Adam, MatchesReferenceTrajectory) {
  auto p = Tensor::vector({1.0}, true);
  std::vector<Tensor> params = {p};
  auto state = AdamState::for_params(params);
  const double grads[] = {0.5, -0.25, 1.0};
  const double want[] = {0.99900000002, 0.9987336629870784, 0.9980755513967708};
  for (int t = 0; t < 3; ++t) {
    p.mutable_grad()[0] = grads[t];
    adam_step(params, state);
    EXPECT_NEAR(p[0], want[t], 1e-15);
  }
  EXPECT_EQ(state.step_count, 3u);
  EXPECT_NEAR(state.first_moment[0][0], 0.118, 1e-15);
  EXPECT_NEAR(state.second_moment[0][0], 0.0013119377500000011, 1e-17);
}

TEST(Adam, ZeroGradientParameterIsUntouched) {
  auto a = Tensor::vector({1.0}, true);
  auto b = Tensor::vector({2.0}, true);
  std::vector<Tensor> params = {a, b};
  auto state = AdamState::for_params(params);
  a.mutable_grad()[0] = 1.0;
  b.mutable_grad()[0] = 1.0;
  adam_step(params, state);
  const double b_after = b[0];
  const double m_after = state.first_moment[1][0];
  // b receives no gradient in the next two steps.
  for (int t = 0; t < 2; ++t) {
    zero_grads(params);
    a.mutable_grad()[0] = 1.0;
    adam_step(params, state);
  }
  EXPECT_EQ(b[0], b_after);
  EXPECT_EQ(state.first_moment[1][0], m_after);
  EXPECT_EQ(state.param_steps[1], 1u);
  EXPECT_EQ(state.param_steps[0], 3u);
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
  auto a = Tensor::vector({1.0}, true);
  auto b = Tensor::vector({2.0}, true);
  std::vector<Tensor> params = {a, b};
  auto state = AdamState::for_params(params);
  a.mutable_grad()[0] = 1.0;
  b.mutable_grad()[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(params, state), NumericError);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(state.step_count, 0u);
}

TEST(Adam, ShapeMismatchIsRejected) {
  auto a = Tensor::vector({1.0}, true);
  std::vector<Tensor> params = {a};
  auto state = AdamState::for_params(params);
  std::vector<Tensor> other = {Tensor::vector({1.0, 2.0}, true)};
  EXPECT_THROW(adam_step(other, state), Error);
}

}  // namespace
}  // namespace easq
