#pragma once

// Training objective: frame cross-entropy plus the truncated mean-squared
// smoothing penalty on adjacent-frame log-probabilities, summed over stages.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "signseg/errors.hpp"
#include "signseg/labeling.hpp"
#include "signseg/numerics/autodiff.hpp"
#include "signseg/segmodel.hpp"

namespace signseg {

struct LossConfig {
  double lambda_smooth = 0.15;
  double tau = 4.0;
  std::array<double, 2> class_weights{1.0, 1.0};

  void validate() const {
    if (!(lambda_smooth >= 0.0)) throw ConfigError("loss: lambda must be >= 0");
    if (!(tau > 0.0)) throw ConfigError("loss: tau must be > 0");
    for (double w : class_weights)
      if (!(w > 0.0)) throw ConfigError("loss: class weights must be > 0");
  }
};

namespace detail {
inline void check_lengths(std::size_t rows, std::size_t labels, const char* who) {
  if (rows != labels) {
    throw DimensionError(std::string(who) + ": " + std::to_string(rows) + " frames vs " +
                         std::to_string(labels) + " labels");
  }
}
}  // namespace detail

/// -(1/T) sum_t w[y_t] log p_t(y_t)
template <class S>
double cross_entropy_frames(const Tensor2<S>& log_probs, const FrameLabels& target,
                            const std::array<double, 2>& weights = {1.0, 1.0}) {
  detail::check_lengths(log_probs.rows(), target.size(), "cross_entropy_frames");
  require_shape(log_probs.cols() == 2, "cross_entropy_frames: expected 2 classes");
  double acc = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t)
    acc -= weights[target[t]] * static_cast<double>(log_probs(t, target[t]));
  return acc / static_cast<double>(target.size());
}

/// Mean over t >= 1 and classes of min(|log p_t(c) - log p_{t-1}(c)|, tau)^2.
template <class S>
double truncated_mse_smoothing(const Tensor2<S>& log_probs, double tau) {
  const std::size_t T = log_probs.rows();
  if (T < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t c = 0; c < log_probs.cols(); ++c) {
      const double d = std::min(
          std::abs(static_cast<double>(log_probs(t, c)) - log_probs(t - 1, c)), tau);
      acc += d * d;
    }
  return acc / static_cast<double>((T - 1) * log_probs.cols());
}

/// Sum over stages of CE + lambda * T-MSE, from per-stage logits.
template <class S>
double total_loss(const StageOutput<S>& out, const FrameLabels& target, const LossConfig& cfg) {
  double acc = 0.0;
  for (const Tensor2<S>& logits : out.logits) {
    detail::check_lengths(logits.rows(), target.size(), "total_loss");
    const Tensor2<S> lp = kernels::log_softmax_rows(logits);
    acc += cross_entropy_frames(lp, target, cfg.class_weights) +
           cfg.lambda_smooth * truncated_mse_smoothing(lp, cfg.tau);
  }
  return acc;
}

namespace ad {

template <class S>
Var cross_entropy_frames(Tape<S>& tape, Var log_probs, const FrameLabels& target,
                         const std::array<double, 2>& weights = {1.0, 1.0}) {
  const double v = signseg::cross_entropy_frames(tape.value(log_probs), target, weights);
  return tape.record(Tensor2<S>(1, 1, static_cast<S>(v)), {log_probs},
                     [=](Tape<S>& t, std::size_t self) {
                       const double g = t.grad(self)(0, 0);
                       Tensor2<S>& gl = t.grad(log_probs);
                       const double scale = g / static_cast<double>(target.size());
                       for (std::size_t i = 0; i < target.size(); ++i)
                         gl(i, target[i]) -= static_cast<S>(weights[target[i]] * scale);
                     });
}

/// Previous-frame terms are treated as constants, so gradient flows only
/// through log p_t of the later frame in each adjacent pair.
template <class S>
Var truncated_mse_smoothing(Tape<S>& tape, Var log_probs, double tau) {
  const double v = signseg::truncated_mse_smoothing(tape.value(log_probs), tau);
  return tape.record(Tensor2<S>(1, 1, static_cast<S>(v)), {log_probs},
                     [=](Tape<S>& t, std::size_t self) {
                       const Tensor2<S>& lp = t.value(log_probs);
                       const std::size_t T = lp.rows();
                       if (T < 2) return;
                       const double g = t.grad(self)(0, 0);
                       const double scale = g / static_cast<double>((T - 1) * lp.cols());
                       Tensor2<S>& gl = t.grad(log_probs);
                       for (std::size_t r = 1; r < T; ++r)
                         for (std::size_t c = 0; c < lp.cols(); ++c) {
                           const double d = static_cast<double>(lp(r, c)) - lp(r - 1, c);
                           if (std::abs(d) < tau) gl(r, c) += static_cast<S>(2.0 * d * scale);
                         }
                     });
}

template <class S>
Var total_loss(Tape<S>& tape, const StageNodes& stages, const FrameLabels& target,
               const LossConfig& cfg) {
  std::vector<Var> terms;
  std::vector<double> coeffs;
  for (Var lp : stages.log_probs) {
    detail::check_lengths(tape.value(lp).rows(), target.size(), "total_loss");
    terms.push_back(cross_entropy_frames(tape, lp, target, cfg.class_weights));
    coeffs.push_back(1.0);
    if (cfg.lambda_smooth > 0.0) {
      terms.push_back(truncated_mse_smoothing(tape, lp, cfg.tau));
      coeffs.push_back(cfg.lambda_smooth);
    }
  }
  return weighted_sum(tape, terms, coeffs);
}

}  // namespace ad
}  // namespace signseg
