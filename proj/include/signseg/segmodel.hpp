#pragma once

// Multi-stage temporal convolutional network. Each stage projects its input
// to `feature_maps` channels, applies `layers_per_stage` dilated residual
// layers (dilation 2^l) and a 1x1 classifier to two classes. Stage s > 0
// consumes the softmax probabilities of stage s - 1.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "signseg/errors.hpp"
#include "signseg/numerics/adam.hpp"
#include "signseg/numerics/autodiff.hpp"
#include "signseg/numerics/tensor.hpp"
#include "signseg/rng.hpp"

namespace signseg {

struct ModelConfig {
  std::uint32_t num_stages = 4;
  std::uint32_t layers_per_stage = 10;
  std::uint32_t feature_maps = 64;
  std::uint32_t kernel_size = 3;
  std::uint32_t num_classes = 2;
  std::uint32_t input_dim = 0;
  bool se_enabled = false;
  std::uint32_t se_reduction = 16;
  double dropout_rate = 0.5;

  void validate() const {
    if (num_stages < 1) throw ConfigError("model: num_stages must be >= 1");
    if (layers_per_stage < 1) throw ConfigError("model: layers_per_stage must be >= 1");
    if (layers_per_stage > 30) throw ConfigError("model: layers_per_stage must be <= 30");
    if (feature_maps < 1) throw ConfigError("model: feature_maps must be >= 1");
    if (kernel_size % 2 != 1) throw ConfigError("model: kernel_size must be odd");
    if (num_classes != 2) throw ConfigError("model: num_classes must be 2");
    if (input_dim < 1) throw ConfigError("model: input_dim must be >= 1");
    if (se_enabled && (se_reduction < 1 || feature_maps < se_reduction)) {
      throw ConfigError("model: SE requires 1 <= se_reduction <= feature_maps");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("model: dropout_rate must be in [0, 1)");
    }
  }

  std::uint32_t se_hidden() const { return feature_maps / se_reduction; }
  std::uint32_t stage_input_dim(std::uint32_t stage) const {
    return stage == 0 ? input_dim : num_classes;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Closed-form parameter count. With F maps, K taps, L layers, C classes,
/// SE hidden width H (0 when SE is off) and stage input width D_s:
///   stage_s = (F D_s + F) + L (F^2 K + F + F^2 + F + se) + (C F + C)
///   se      = H F + H + F H + F
inline std::uint64_t parameter_count(const ModelConfig& cfg) {
  const std::uint64_t F = cfg.feature_maps, K = cfg.kernel_size, L = cfg.layers_per_stage,
                      C = cfg.num_classes;
  const std::uint64_t H = cfg.se_enabled ? cfg.se_hidden() : 0;
  const std::uint64_t se = cfg.se_enabled ? (H * F + H + F * H + F) : 0;
  std::uint64_t total = 0;
  for (std::uint32_t s = 0; s < cfg.num_stages; ++s) {
    const std::uint64_t D = cfg.stage_input_dim(s);
    total += (F * D + F) + L * (F * F * K + F + F * F + F + se) + (C * F + C);
  }
  return total;
}

template <class S>
struct LayerParams {
  Parameter<S> conv_w, conv_b;  // dilated conv, F x F x K
  Parameter<S> res_w, res_b;    // 1x1 branch conv, F x F
  Parameter<S> se_down_w, se_down_b, se_up_w, se_up_b;  // empty unless SE
};

template <class S>
struct StageParams {
  Parameter<S> in_w, in_b;
  std::vector<LayerParams<S>> layers;
  Parameter<S> out_w, out_b;
};

template <class S>
struct ModelParams {
  ModelConfig config;
  std::vector<StageParams<S>> stages;

  /// Every parameter in checkpoint order: per stage in_w, in_b, per layer
  /// conv_w, conv_b, res_w, res_b [, se_down_w, se_down_b, se_up_w, se_up_b],
  /// then out_w, out_b.
  std::vector<Parameter<S>*> all() {
    std::vector<Parameter<S>*> out;
    for (auto& st : stages) {
      out.push_back(&st.in_w);
      out.push_back(&st.in_b);
      for (auto& l : st.layers) {
        for (auto* p : {&l.conv_w, &l.conv_b, &l.res_w, &l.res_b}) out.push_back(p);
        if (config.se_enabled)
          for (auto* p : {&l.se_down_w, &l.se_down_b, &l.se_up_w, &l.se_up_b}) out.push_back(p);
      }
      out.push_back(&st.out_w);
      out.push_back(&st.out_b);
    }
    return out;
  }

  std::vector<const Parameter<S>*> all() const {
    std::vector<const Parameter<S>*> out;
    for (Parameter<S>* p : const_cast<ModelParams*>(this)->all()) out.push_back(p);
    return out;
  }

  std::uint64_t count() const {
    std::uint64_t n = 0;
    for (const auto* p : all()) n += p->numel();
    return n;
  }
};

namespace detail {

template <class S>
Parameter<S> make_pointwise(const std::string& name, std::uint32_t out, std::uint32_t in) {
  return Parameter<S>(name, {out, in}, out, in);
}
template <class S>
Parameter<S> make_bias(const std::string& name, std::uint32_t n) {
  return Parameter<S>(name, {n}, 1, n);
}
template <class S>
Parameter<S> make_conv(const std::string& name, std::uint32_t out, std::uint32_t in,
                       std::uint32_t k) {
  return Parameter<S>(name, {out, in, k}, out, static_cast<std::size_t>(in) * k);
}

}  // namespace detail

/// Allocates zero-valued parameters with the shapes implied by cfg.
template <class S>
ModelParams<S> allocate_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams<S> m;
  m.config = cfg;
  const std::uint32_t F = cfg.feature_maps, K = cfg.kernel_size, C = cfg.num_classes;
  for (std::uint32_t s = 0; s < cfg.num_stages; ++s) {
    const std::string p = "stage" + std::to_string(s) + ".";
    StageParams<S> st;
    st.in_w = detail::make_pointwise<S>(p + "in.weight", F, cfg.stage_input_dim(s));
    st.in_b = detail::make_bias<S>(p + "in.bias", F);
    for (std::uint32_t l = 0; l < cfg.layers_per_stage; ++l) {
      const std::string q = p + "layer" + std::to_string(l) + ".";
      LayerParams<S> lp;
      lp.conv_w = detail::make_conv<S>(q + "conv.weight", F, F, K);
      lp.conv_b = detail::make_bias<S>(q + "conv.bias", F);
      lp.res_w = detail::make_pointwise<S>(q + "res.weight", F, F);
      lp.res_b = detail::make_bias<S>(q + "res.bias", F);
      if (cfg.se_enabled) {
        const std::uint32_t H = cfg.se_hidden();
        lp.se_down_w = detail::make_pointwise<S>(q + "se.down.weight", H, F);
        lp.se_down_b = detail::make_bias<S>(q + "se.down.bias", H);
        lp.se_up_w = detail::make_pointwise<S>(q + "se.up.weight", F, H);
        lp.se_up_b = detail::make_bias<S>(q + "se.up.bias", F);
      }
      st.layers.push_back(std::move(lp));
    }
    st.out_w = detail::make_pointwise<S>(p + "out.weight", C, F);
    st.out_b = detail::make_bias<S>(p + "out.bias", C);
    m.stages.push_back(std::move(st));
  }
  return m;
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. Deterministic
/// for a given seed.
template <class S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<S> m = allocate_params<S>(cfg);
  Rng rng(derive_seed(seed, 0x1417));
  for (Parameter<S>* p : m.all()) {
    if (p->shape.size() == 1) continue;
    std::uint64_t fan_in = p->shape[1];
    if (p->shape.size() == 3) fan_in *= p->shape[2];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (S& v : p->value.values()) v = static_cast<S>(rng.uniform(-bound, bound));
  }
  return m;
}

inline std::uint32_t layer_dilation(std::uint32_t layer) { return 1u << layer; }

/// Receptive field (in frames) of one stage: 1 + (K - 1) * (2^L - 1).
inline std::uint64_t stage_receptive_field(const ModelConfig& cfg) {
  return 1 + static_cast<std::uint64_t>(cfg.kernel_size - 1) *
                 ((std::uint64_t{1} << cfg.layers_per_stage) - 1);
}

/// Per-stage values of an eval-mode forward pass.
template <class S>
struct StageOutput {
  std::vector<Tensor2<S>> logits;
  std::vector<Tensor2<S>> probabilities;

  std::size_t num_stages() const noexcept { return logits.size(); }
  const Tensor2<S>& final_probabilities() const { return probabilities.back(); }
};

/// Tape handles produced by a forward pass.
struct StageNodes {
  std::vector<Var> features;  // last residual layer output per stage
  std::vector<Var> logits;
  std::vector<Var> log_probs;
  std::vector<Var> probs;
};

/// Forward-pass mode. `rng` must be non-null when training with dropout.
struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;
};

namespace ad {

template <class S>
Var dilated_residual_layer(Tape<S>& tape, Var x, LayerParams<S>& lp, const ModelConfig& cfg,
                           std::uint32_t dilation, const ForwardOptions& opt) {
  const kernels::ConvShape shape{cfg.feature_maps, cfg.feature_maps, cfg.kernel_size};
  Var h = conv1d_dilated(tape, x, tape.parameter(lp.conv_w), tape.parameter(lp.conv_b), shape,
                         dilation);
  h = relu(tape, h);
  h = pointwise_conv(tape, h, tape.parameter(lp.res_w), tape.parameter(lp.res_b));
  if (cfg.se_enabled) {
    Var squeeze = mean_rows(tape, h);
    Var z = relu(tape, pointwise_conv(tape, squeeze, tape.parameter(lp.se_down_w),
                                      tape.parameter(lp.se_down_b)));
    Var gate = sigmoid(tape, pointwise_conv(tape, z, tape.parameter(lp.se_up_w),
                                            tape.parameter(lp.se_up_b)));
    h = scale_channels(tape, h, gate);
  }
  if (opt.training && cfg.dropout_rate > 0.0) {
    if (!opt.rng) throw StateError("dilated_residual_layer: training dropout needs an rng");
    h = dropout(tape, h, cfg.dropout_rate, *opt.rng);
  }
  return add(tape, x, h);
}

struct StageResult {
  Var features;
  Var logits;
};

template <class S>
StageResult stage_forward(Tape<S>& tape, Var input, StageParams<S>& sp, const ModelConfig& cfg,
                          const ForwardOptions& opt) {
  const std::size_t cin = tape.value(input).cols();
  if (cin != sp.in_w.value.cols()) {
    throw DimensionError("stage_forward: input has " + std::to_string(cin) +
                         " channels, stage expects " + std::to_string(sp.in_w.value.cols()));
  }
  if (tape.value(input).rows() == 0) throw DimensionError("stage_forward: empty sequence");
  Var h = pointwise_conv(tape, input, tape.parameter(sp.in_w), tape.parameter(sp.in_b));
  for (std::uint32_t l = 0; l < cfg.layers_per_stage; ++l)
    h = dilated_residual_layer(tape, h, sp.layers[l], cfg, layer_dilation(l), opt);
  Var logits = pointwise_conv(tape, h, tape.parameter(sp.out_w), tape.parameter(sp.out_b));
  return {h, logits};
}

template <class S>
StageNodes mstcn_forward(Tape<S>& tape, Var features, ModelParams<S>& params,
                         const ForwardOptions& opt = {}) {
  const ModelConfig& cfg = params.config;
  StageNodes out;
  Var input = features;
  for (std::uint32_t s = 0; s < cfg.num_stages; ++s) {
    StageResult r = stage_forward(tape, input, params.stages[s], cfg, opt);
    Var lp = log_softmax_rows(tape, r.logits);
    Var p = exp(tape, lp);
    out.features.push_back(r.features);
    out.logits.push_back(r.logits);
    out.log_probs.push_back(lp);
    out.probs.push_back(p);
    input = p;
  }
  return out;
}

}  // namespace ad

/// Eval-mode forward pass (dropout off). Reads params only, so concurrent
/// calls on shared params are safe.
template <class S>
StageOutput<S> mstcn_forward(const FeatureSequence<S>& features, const ModelParams<S>& params) {
  Tape<S> tape;
  auto& mut = const_cast<ModelParams<S>&>(params);  // parameter() binds by address only
  StageNodes nodes = ad::mstcn_forward(tape, tape.constant_ref(features), mut, {});
  StageOutput<S> out;
  for (std::size_t s = 0; s < nodes.logits.size(); ++s) {
    out.logits.push_back(tape.value(nodes.logits[s]));
    out.probabilities.push_back(tape.value(nodes.probs[s]));
  }
  return out;
}

/// Early fusion: per-frame concatenation [a | b].
template <class S>
FeatureSequence<S> fuse_inputs(const FeatureSequence<S>& a, const FeatureSequence<S>& b) {
  if (a.rows() != b.rows()) {
    throw AlignmentError("fuse_inputs: sequences have " + std::to_string(a.rows()) + " and " +
                         std::to_string(b.rows()) + " frames");
  }
  FeatureSequence<S> out(a.rows(), a.cols() + b.cols());
  for (std::size_t t = 0; t < a.rows(); ++t) {
    auto o = out.row(t);
    std::copy(a.row(t).begin(), a.row(t).end(), o.begin());
    std::copy(b.row(t).begin(), b.row(t).end(), o.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

/// Late fusion: mean of the class probabilities of two networks.
template <class S>
Tensor2<S> predict_fused_late(const Tensor2<S>& probs_a, const Tensor2<S>& probs_b) {
  if (!probs_a.same_shape(probs_b)) {
    throw DimensionError("predict_fused_late: shapes " + probs_a.shape_string() + " vs " +
                         probs_b.shape_string());
  }
  Tensor2<S> out(probs_a.rows(), probs_a.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<S>(0.5 * (static_cast<double>(probs_a.data()[i]) + probs_b.data()[i]));
  return out;
}

}  // namespace signseg
