#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "signseg/errors.hpp"
#include "signseg/numerics/tensor.hpp"

namespace signseg {

/// Trainable tensor with its gradient and Adam moments. `shape` is the
/// logical shape written to checkpoints (e.g. {Cout, Cin, K} for a dilated
/// convolution whose value is stored flattened as Cout x Cin*K).
template <class S>
struct Parameter {
  std::string name;
  std::vector<std::uint32_t> shape;
  Tensor2<S> value;
  Tensor2<S> grad;
  Tensor2<S> first_moment;
  Tensor2<S> second_moment;
  std::uint64_t step = 0;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::uint32_t> logical_shape, std::size_t rows,
            std::size_t cols)
      : name(std::move(n)),
        shape(std::move(logical_shape)),
        value(rows, cols),
        grad(rows, cols),
        first_moment(rows, cols),
        second_moment(rows, cols) {}

  std::size_t numel() const noexcept { return value.size(); }
  void zero_grad() { grad.fill(S(0)); }
};

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("adam: learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  }
};

/// One bias-corrected Adam update per parameter; zeroes the gradients.
template <class S>
void adam_step(std::span<Parameter<S>* const> params, const AdamConfig& cfg) {
  for (Parameter<S>* p : params) {
    ++p->step;
    const double t = static_cast<double>(p->step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    S* value = p->value.data();
    S* grad = p->grad.data();
    S* m = p->first_moment.data();
    S* v = p->second_moment.data();
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const double g = grad[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      const double mhat = mi / c1;
      const double vhat = vi / c2;
      value[i] = static_cast<S>(value[i] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
      grad[i] = S(0);
    }
  }
}

template <class S>
void adam_step(std::vector<Parameter<S>*>& params, const AdamConfig& cfg) {
  adam_step<S>(std::span<Parameter<S>* const>(params.data(), params.size()), cfg);
}

}  // namespace signseg
