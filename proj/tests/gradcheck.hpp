#pragma once

// Test-only finite-difference oracle. It perturbs raw tensor entries and
// re-evaluates a scalar function, independent of the tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "signseg/losses.hpp"
#include "signseg/numerics/kernels.hpp"
#include "signseg/numerics/tensor.hpp"
#include "signseg/rng.hpp"
#include "signseg/segmodel.hpp"

namespace signseg::testing {

inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-6) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is zero from dividing round-off by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Largest relative error between an analytic gradient and central
/// differences of f over every entry of x.
inline double max_gradient_error(const std::function<double()>& f, Tensor2<double>& x,
                                 const Tensor2<double>& analytic, double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = central_difference(f, x.data()[i], h);
    worst = std::max(worst, relative_error(analytic.data()[i], n));
  }
  return worst;
}

inline Tensor2<double> random_tensor(Rng& rng, std::size_t rows, std::size_t cols,
                                     double scale = 1.0) {
  Tensor2<double> t(rows, cols);
  for (double& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

/// Smoothing term with the previous frame read from a frozen copy, so a
/// finite difference sees only the current-frame path.
inline double frozen_tmse(const Tensor2<double>& lp, const Tensor2<double>& frozen, double tau) {
  if (lp.rows() < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 1; t < lp.rows(); ++t)
    for (std::size_t c = 0; c < lp.cols(); ++c) {
      const double d = std::min(std::abs(lp(t, c) - frozen(t - 1, c)), tau);
      acc += d * d;
    }
  return acc / static_cast<double>((lp.rows() - 1) * lp.cols());
}

// Builds an op on the tape from its inputs; the check contracts the output
// with random coefficients and compares against central differences.
using OpBuilder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

inline double op_gradient_error(const OpBuilder& build, std::vector<Tensor2<double>> inputs, Rng& rng) {
  Tensor2<double> coeffs;
  const auto evaluate = [&](bool with_grad, std::vector<Tensor2<double>>* grads) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& in : inputs) vars.push_back(tape.variable(in));
    Var out = build(tape, vars);
    if (coeffs.empty()) {
      const auto& v = tape.value(out);
      coeffs = random_tensor(rng, v.rows(), v.cols());
    }
    Var loss = ad::dot(tape, out, coeffs);
    if (with_grad) {
      tape.backward(loss);
      for (Var v : vars) grads->push_back(tape.grad(v));
    }
    return tape.value(loss)(0, 0);
  };
  std::vector<Tensor2<double>> analytic;
  evaluate(true, &analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    worst = std::max(worst, max_gradient_error([&] { return evaluate(false, nullptr); }, inputs[i], analytic[i]));
  return worst;
}

struct OpError {
  std::string op;
  double error;
};

/// Worst relative gradient error of every differentiable op, including the
/// two loss terms, on random shapes with T <= 8 and channels <= 4.
inline std::vector<OpError> op_gradient_errors(std::uint64_t seed) {
  using V = const std::vector<Var>&;
  Rng rng(seed);
  const std::size_t T = 1 + rng.index(8);
  const std::size_t cin = 1 + rng.index(4), cout = 1 + rng.index(4);
  const std::size_t d = 1 + rng.index(3);
  const kernels::ConvShape shape{cin, cout, 3};
  std::vector<OpError> out;
  const auto check = [&](std::string name, const OpBuilder& b, std::vector<Tensor2<double>> in) {
    out.push_back({std::move(name), op_gradient_error(b, std::move(in), rng)});
  };

  check("conv1d_dilated", [&](Tape<double>& t, V v) { return ad::conv1d_dilated(t, v[0], v[1], v[2], shape, d); },
        {random_tensor(rng, T, cin), random_tensor(rng, cout, cin * 3), random_tensor(rng, 1, cout)});
  check("pointwise_conv", [](Tape<double>& t, V v) { return ad::pointwise_conv(t, v[0], v[1], v[2]); },
        {random_tensor(rng, T, cin), random_tensor(rng, cout, cin), random_tensor(rng, 1, cout)});
  check("relu", [](Tape<double>& t, V v) { return ad::relu(t, v[0]); }, {random_tensor(rng, T, cin)});
  check("log_softmax_rows", [](Tape<double>& t, V v) { return ad::log_softmax_rows(t, v[0]); },
        {random_tensor(rng, T, 2 + rng.index(3), 2.0)});
  check("exp", [](Tape<double>& t, V v) { return ad::exp(t, v[0]); }, {random_tensor(rng, T, cin)});
  check("sigmoid", [](Tape<double>& t, V v) { return ad::sigmoid(t, v[0]); }, {random_tensor(rng, T, cin, 3.0)});
  check("mean_rows", [](Tape<double>& t, V v) { return ad::mean_rows(t, v[0]); }, {random_tensor(rng, T, cin)});
  check("scale_channels", [](Tape<double>& t, V v) { return ad::scale_channels(t, v[0], v[1]); },
        {random_tensor(rng, T, cin), random_tensor(rng, 1, cin)});
  check("add", [](Tape<double>& t, V v) { return ad::add(t, v[0], v[1]); },
        {random_tensor(rng, T, cin), random_tensor(rng, T, cin)});
  // Dropout with a mask fixed by re-seeding on every evaluation.
  const std::uint64_t mask_seed = rng.next();
  check("dropout", [&](Tape<double>& t, V v) {
    Rng mask_rng(mask_seed);
    return ad::dropout(t, v[0], 0.5, mask_rng);
  }, {random_tensor(rng, T, cin)});

  // Loss terms are scalars, compared directly.
  Tensor2<double> lp = random_tensor(rng, T, 2);
  FrameLabels y(T, 0);
  for (std::size_t t = 0; t < T; ++t) y.set(t, rng.bernoulli(0.5));
  {
    Tape<double> tape;
    const Var v = tape.variable(lp);
    tape.backward(ad::cross_entropy_frames(tape, v, y, {0.7, 1.9}));
    out.push_back({"cross_entropy_frames",
                   max_gradient_error([&] { return cross_entropy_frames(lp, y, {0.7, 1.9}); }, lp, tape.grad(v))});
  }
  Tensor2<double> big = random_tensor(rng, T, 2, 3.0);
  const Tensor2<double> frozen = big;
  {
    Tape<double> tape;
    const Var v = tape.variable(big);
    tape.backward(ad::truncated_mse_smoothing(tape, v, 4.0));
    out.push_back({"truncated_mse_smoothing",
                   max_gradient_error([&] { return frozen_tmse(big, frozen, 4.0); }, big, tape.grad(v))});
  }
  return out;
}

struct ModelGradReport {
  double worst = 0.0;
  std::size_t entries = 0;
  std::size_t zero_grad_params = 0;  // parameters whose whole gradient is 0
};

/// Tape gradients of the full training loss versus central differences over
/// every parameter entry of a randomly initialised model.
/// The step is 1e-5 rather than 1e-6: entries with |grad| near 1e-6 would
/// otherwise be dominated by round-off in the loss (~1e-16 * |loss| / h).
inline ModelGradReport model_gradient_check(ModelConfig cfg, std::uint64_t seed, std::size_t T,
                                            const LossConfig& loss = {}, double h = 1e-5) {
  cfg.dropout_rate = 0.0;
  Rng rng(seed);
  // Fan-in init keeps the softmax out of saturation, where gradients shrink
  // below the difference quotient's round-off. Biases are made nonzero, and
  // SE squeeze biases positive so no bottleneck unit is dead everywhere.
  ModelParams<double> params = init_params<double>(cfg, seed);
  for (Parameter<double>* p : params.all()) {
    if (p->shape.size() != 1) continue;
    const bool se_down = p->name.find("se.down") != std::string::npos;
    for (double& v : p->value.values()) v = se_down ? 0.5 + std::abs(rng.normal(0.0, 0.1)) : rng.normal(0.0, 0.1);
  }
  const Tensor2<double> x = random_tensor(rng, T, cfg.input_dim);
  FrameLabels y(T, 0);
  for (std::size_t t = 0; t < T; ++t) y.set(t, rng.bernoulli(0.5));
  y.set(0, true);
  y.set(T - 1, false);

  Tape<double> tape;
  const StageNodes nodes = ad::mstcn_forward(tape, tape.constant(x), params, {});
  tape.backward(ad::total_loss(tape, nodes, y, loss));

  std::vector<Tensor2<double>> frozen;
  for (const auto& logits : mstcn_forward(x, params).logits) frozen.push_back(kernels::log_softmax_rows(logits));
  const auto f = [&] {
    double acc = 0.0;
    const StageOutput<double> out = mstcn_forward(x, params);
    for (std::size_t s = 0; s < out.logits.size(); ++s) {
      const Tensor2<double> lp = kernels::log_softmax_rows(out.logits[s]);
      acc += cross_entropy_frames(lp, y, loss.class_weights) +
             loss.lambda_smooth * frozen_tmse(lp, frozen[s], loss.tau);
    }
    return acc;
  };

  ModelGradReport r;
  for (Parameter<double>* p : params.all()) {
    bool any = false;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double n = central_difference(f, p->value.data()[i], h);
      r.worst = std::max(r.worst, relative_error(p->grad.data()[i], n));
      any = any || p->grad.data()[i] != 0.0;
      ++r.entries;
    }
    if (!any) ++r.zero_grad_params;
  }
  return r;
}

}  // namespace signseg::testing
