#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gradcheck.hpp"
#include "signseg/numerics/adam.hpp"
#include "signseg/numerics/autodiff.hpp"
#include "signseg/numerics/kernels.hpp"

namespace signseg {
namespace {

using T2 = Tensor2<double>;
using testing::random_tensor;

T2 column(std::vector<double> v) {
  const std::size_t n = v.size();
  return T2(n, 1, std::move(v));
}

TEST(Conv1dDilated, HandComputedDilationOne) {
  const T2 in = column({1, 2, 3, 4, 5});
  const T2 w(1, 3, {1, 1, 1});
  const T2 b(1, 1, {0});
  const T2 out = kernels::conv1d_dilated(in, w, b, {1, 1, 3}, 1);
  EXPECT_EQ(out.storage(), (std::vector<double>{3, 6, 9, 12, 9}));
}

TEST(Conv1dDilated, HandComputedDilationTwo) {
  const T2 in = column({1, 2, 3, 4, 5});
  const T2 w(1, 3, {1, 1, 1});
  const T2 b(1, 1, {0});
  const T2 out = kernels::conv1d_dilated(in, w, b, {1, 1, 3}, 2);
  EXPECT_EQ(out.storage(), (std::vector<double>{4, 6, 9, 6, 8}));
}

TEST(Conv1dDilated, CenterTapIsExactIdentityForAnyDilation) {
  Rng rng(3);
  for (std::size_t d : {1, 2, 4, 8, 64}) {
    const T2 in = random_tensor(rng, 7, 3);
    // Cout = Cin = 3, identity on the center tap only.
    T2 w(3, 9);
    for (std::size_t c = 0; c < 3; ++c) w(c, c * 3 + 1) = 1.0;
    const T2 out = kernels::conv1d_dilated(in, w, T2(1, 3), {3, 3, 3}, d);
    EXPECT_EQ(out, in) << "dilation " << d;
  }
}

TEST(Conv1dDilated, ShapeMismatchIsDimensionError) {
  const T2 in(5, 2);
  EXPECT_THROW(kernels::conv1d_dilated(in, T2(1, 3), T2(1, 1), {1, 1, 3}, 1), DimensionError);
  EXPECT_THROW(kernels::conv1d_dilated(T2(5, 1), T2(1, 2), T2(1, 1), {1, 1, 2}, 1),
               DimensionError);
}

TEST(PointwiseConv, IdentityWeights) {
  Rng rng(1);
  const T2 in = random_tensor(rng, 4, 3);
  T2 w(3, 3);
  for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
  EXPECT_EQ(kernels::pointwise_conv(in, w, T2(1, 3)), in);
}

TEST(PointwiseConv, HandComputed) {
  const T2 in(1, 2, {1, 2});
  const T2 w(2, 2, {1, 1, 1, -1});
  const T2 out = kernels::pointwise_conv(in, w, T2(1, 2));
  EXPECT_EQ(out.storage(), (std::vector<double>{3, -1}));
}

TEST(PointwiseConv, ZeroWeightsGiveBias) {
  const T2 out = kernels::pointwise_conv(T2(4, 3, 2.5), T2(1, 3), T2(1, 1, {7}));
  for (double v : out.values()) EXPECT_EQ(v, 7.0);
  EXPECT_THROW(kernels::pointwise_conv(T2(4, 2), T2(1, 3), T2(1, 1)), DimensionError);
}

TEST(Relu, Examples) {
  EXPECT_EQ(kernels::relu(T2(1, 3, {-1, 0, 2})).storage(), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(kernels::relu(T2(2, 2, {-1, -2, -3, -4})), T2(2, 2));
  const T2 pos(2, 2, {0, 1, 2, 3});
  EXPECT_EQ(kernels::relu(pos), pos);
}

TEST(LogSoftmax, Examples) {
  const double ln2 = std::log(2.0);
  T2 out = kernels::log_softmax_rows(T2(1, 2, {0, 0}));
  EXPECT_DOUBLE_EQ(out(0, 0), -ln2);
  EXPECT_DOUBLE_EQ(out(0, 1), -ln2);
  out = kernels::log_softmax_rows(T2(1, 2, {1000, 1000}));
  EXPECT_DOUBLE_EQ(out(0, 0), -ln2);
  EXPECT_DOUBLE_EQ(out(0, 1), -ln2);
  out = kernels::log_softmax_rows(T2(1, 2, {std::log(3.0), 0}));
  EXPECT_NEAR(out(0, 0), std::log(0.75), 1e-15);
  EXPECT_NEAR(out(0, 1), std::log(0.25), 1e-15);
}

TEST(LogSoftmax, RowsExponentiateToOne) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const T2 x = random_tensor(rng, 6, 2 + trial % 3, 10.0);
    const T2 lp = kernels::log_softmax_rows(x);
    for (std::size_t t = 0; t < lp.rows(); ++t) {
      double s = 0.0;
      for (double v : lp.row(t)) s += std::exp(v);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Backward, SumOfReluOnPositiveInputs) {
  Tape<double> tape;
  Var x = tape.variable(T2(3, 2, 1.5));
  tape.backward(ad::sum(tape, ad::relu(tape, x)));
  for (double g : tape.grad(x).values()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, UnreachableParameterHasZeroGradient) {
  Parameter<double> used("used", {1, 2}, 1, 2), unused("unused", {1, 2}, 1, 2);
  used.value = T2(1, 2, {1, 2});
  unused.value = T2(1, 2, {3, 4});
  Tape<double> tape;
  Var x = tape.constant(T2(4, 2, 1.0));
  Var u = tape.parameter(unused);
  (void)u;
  Var y = ad::pointwise_conv(tape, x, tape.parameter(used), tape.constant(T2(1, 1)));
  tape.backward(ad::sum(tape, y));
  EXPECT_EQ(unused.grad, T2(1, 2));
  EXPECT_EQ(used.grad, T2(1, 2, {4, 4}));
}

TEST(Backward, BeforeForwardIsStateError) {
  Tape<double> tape;
  EXPECT_THROW(tape.backward(Var{}), StateError);
  EXPECT_THROW(tape.backward(Var{0}), StateError);
  Var x = tape.variable(T2(2, 2, 1.0));
  EXPECT_THROW(tape.backward(x), StateError);  // not a scalar
}

TEST(GradientCheck, EveryDifferentiableOpOnTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (const auto& [op, err] : testing::op_gradient_errors(seed)) EXPECT_LT(err, 1e-4) << op << " seed " << seed;
}

TEST(Adam, FirstStepWithUnitGradientMovesByLearningRate) {
  AdamConfig cfg;
  Parameter<double> p("p", {2, 2}, 2, 2);
  p.value.fill(1.0);
  p.grad.fill(1.0);
  std::vector<Parameter<double>*> ps{&p};
  adam_step(ps, cfg);
  for (double v : p.value.values()) EXPECT_NEAR(v, 1.0 - cfg.learning_rate / (1.0 + cfg.epsilon), 1e-15);
  for (double g : p.grad.values()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(p.step, 1u);
}

TEST(Adam, ZeroGradientLeavesValue) {
  Parameter<double> p("p", {3}, 1, 3);
  p.value = T2(1, 3, {1, -2, 3});
  const T2 before = p.value;
  std::vector<Parameter<double>*> ps{&p};
  adam_step(ps, AdamConfig{});
  EXPECT_EQ(p.value, before);
}

TEST(Adam, ConstantGradientMovesMonotonicallyAgainstSign) {
  Parameter<double> p("p", {2}, 1, 2);
  std::vector<Parameter<double>*> ps{&p};
  double prev0 = 0.0, prev1 = 0.0;
  for (int i = 0; i < 5; ++i) {
    p.grad = T2(1, 2, {2.0, -0.5});
    adam_step(ps, AdamConfig{});
    EXPECT_LT(p.value(0, 0), prev0);
    EXPECT_GT(p.value(0, 1), prev1);
    prev0 = p.value(0, 0);
    prev1 = p.value(0, 1);
  }
}

TEST(Adam, DeterministicAndValidated) {
  Rng rng(5);
  Parameter<double> a("a", {3, 3}, 3, 3);
  a.value = random_tensor(rng, 3, 3);
  Parameter<double> b = a;
  for (int i = 0; i < 3; ++i) {
    const T2 g = random_tensor(rng, 3, 3);
    a.grad = g;
    b.grad = g;
    std::vector<Parameter<double>*> pa{&a}, pb{&b};
    adam_step(pa, AdamConfig{});
    adam_step(pb, AdamConfig{});
  }
  EXPECT_EQ(a.value, b.value);
  EXPECT_THROW((AdamConfig{0.0}).validate(), ConfigError);
  EXPECT_THROW((AdamConfig{1e-3, 1.0}).validate(), ConfigError);
  EXPECT_THROW((AdamConfig{1e-3, 0.9, 0.999, 0.0}).validate(), ConfigError);
}

}  // namespace
}  // namespace signseg
