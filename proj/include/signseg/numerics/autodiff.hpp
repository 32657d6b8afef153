#pragma once

// Reverse-mode tape restricted to the layer set of the segmentation network.
// Nodes are appended in evaluation order, so replaying them backwards is a
// valid topological order.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "signseg/numerics/adam.hpp"
#include "signseg/numerics/kernels.hpp"
#include "signseg/numerics/tensor.hpp"
#include "signseg/rng.hpp"

namespace signseg {

struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

template <class S>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  /// Leaf that receives no gradient.
  Var constant(Tensor2<S> value) { return push(std::move(value), nullptr, {}, false); }

  /// Non-owning leaf without gradient; `value` must outlive the tape.
  Var constant_ref(const Tensor2<S>& value) { return push(Tensor2<S>(), &value, {}, false); }

  /// Leaf whose gradient is kept on the tape (readable with grad()).
  Var variable(Tensor2<S> value) { return push(std::move(value), nullptr, {}, true); }

  /// Leaf bound to a parameter; backward() accumulates into `p.grad`.
  Var parameter(Parameter<S>& p) {
    Var v = push(Tensor2<S>(), &p.value, {}, true);
    nodes_[v.id].param = &p;
    return v;
  }

  /// Records an op result. `back` reads grad(self) and accumulates into the
  /// gradients of its inputs.
  Var record(Tensor2<S> value, std::initializer_list<Var> inputs, Backward back) {
    bool needs = false;
    for (Var in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
    return push(std::move(value), nullptr, needs ? std::move(back) : Backward{}, needs);
  }

  const Tensor2<S>& value(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient buffer of a node, zero-initialised on first access.
  Tensor2<S>& grad(Var v) { return grad(v.id); }
  Tensor2<S>& grad(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty() && !value_of(n).empty()) {
      n.grad = Tensor2<S>(value_of(n).rows(), value_of(n).cols());
    }
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return !nodes_.at(id).grad.empty(); }

  /// Propagates d(loss)/d(node) to every node reachable from `loss` and adds
  /// parameter gradients into their Parameter::grad.
  void backward(Var loss) {
    if (!loss.valid() || loss.id >= nodes_.size()) {
      throw StateError("backward: no recorded forward pass for this loss");
    }
    const Tensor2<S>& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw StateError("backward: loss must be a 1x1 scalar, got " + lv.shape_string());
    }
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss)(0, 0) = S(1);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.grad.empty()) continue;
      if (n.back) n.back(*this, id);
      if (n.param) {
        S* dst = n.param->grad.data();
        const S* src = n.grad.data();
        for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
      }
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor2<S> value;
    const Tensor2<S>* external = nullptr;
    Parameter<S>* param = nullptr;
    Tensor2<S> grad;
    Backward back;
    bool requires_grad = false;
  };

  static const Tensor2<S>& value_of(const Node& n) { return n.external ? *n.external : n.value; }

  Var push(Tensor2<S> value, const Tensor2<S>* external, Backward back, bool needs) {
    Node n;
    n.value = std::move(value);
    n.external = external;
    n.back = std::move(back);
    n.requires_grad = needs;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

namespace ad {

template <class S>
Tensor2<S>* grad_if(Tape<S>& tape, Var v) {
  return tape.requires_grad(v) ? &tape.grad(v) : nullptr;
}

template <class S>
Var conv1d_dilated(Tape<S>& tape, Var x, Var w, Var b, kernels::ConvShape shape,
                   std::size_t dilation) {
  Tensor2<S> out =
      kernels::conv1d_dilated(tape.value(x), tape.value(w), tape.value(b), shape, dilation);
  return tape.record(std::move(out), {x, w, b}, [=](Tape<S>& t, std::size_t self) {
    kernels::conv1d_dilated_backward(t.value(x), t.value(w), shape, dilation, t.grad(self),
                                     grad_if(t, x), grad_if(t, w), grad_if(t, b));
  });
}

template <class S>
Var pointwise_conv(Tape<S>& tape, Var x, Var w, Var b) {
  Tensor2<S> out = kernels::pointwise_conv(tape.value(x), tape.value(w), tape.value(b));
  return tape.record(std::move(out), {x, w, b}, [=](Tape<S>& t, std::size_t self) {
    kernels::pointwise_conv_backward(t.value(x), t.value(w), t.grad(self), grad_if(t, x),
                                     grad_if(t, w), grad_if(t, b));
  });
}

template <class S>
Var relu(Tape<S>& tape, Var x) {
  Tensor2<S> out = kernels::relu(tape.value(x));
  return tape.record(std::move(out), {x}, [=](Tape<S>& t, std::size_t self) {
    const Tensor2<S>& in = t.value(x);
    const Tensor2<S>& g = t.grad(self);
    Tensor2<S>& gx = t.grad(x);
    for (std::size_t i = 0; i < in.size(); ++i)
      if (in.data()[i] > S(0)) gx.data()[i] += g.data()[i];
  });
}

/// Inverted dropout: kept units are scaled by 1/(1-rate).
template <class S>
Var dropout(Tape<S>& tape, Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  const Tensor2<S>& in = tape.value(x);
  Tensor2<S> mask(in.rows(), in.cols());
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.uniform() < rate ? S(0) : keep_scale;
  Tensor2<S> out(in.rows(), in.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = in.data()[i] * mask.data()[i];
  return tape.record(std::move(out), {x},
                     [=, mask = std::move(mask)](Tape<S>& t, std::size_t self) {
                       const Tensor2<S>& g = t.grad(self);
                       Tensor2<S>& gx = t.grad(x);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gx.data()[i] += g.data()[i] * mask.data()[i];
                     });
}

template <class S>
Var log_softmax_rows(Tape<S>& tape, Var x) {
  Tensor2<S> out = kernels::log_softmax_rows(tape.value(x));
  return tape.record(std::move(out), {x}, [=](Tape<S>& t, std::size_t self) {
    kernels::log_softmax_rows_backward(t.value(Var{self}), t.grad(self), t.grad(x));
  });
}

template <class S>
Var exp(Tape<S>& tape, Var x) {
  const Tensor2<S>& in = tape.value(x);
  Tensor2<S> out(in.rows(), in.cols());
  for (std::size_t i = 0; i < in.size(); ++i) out.data()[i] = std::exp(in.data()[i]);
  return tape.record(std::move(out), {x}, [=](Tape<S>& t, std::size_t self) {
    const Tensor2<S>& y = t.value(Var{self});
    const Tensor2<S>& g = t.grad(self);
    Tensor2<S>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += g.data()[i] * y.data()[i];
  });
}

template <class S>
Var sigmoid(Tape<S>& tape, Var x) {
  const Tensor2<S>& in = tape.value(x);
  Tensor2<S> out(in.rows(), in.cols());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in.data()[i];
    out.data()[i] = static_cast<S>(v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                                          : std::exp(v) / (1.0 + std::exp(v)));
  }
  return tape.record(std::move(out), {x}, [=](Tape<S>& t, std::size_t self) {
    const Tensor2<S>& y = t.value(Var{self});
    const Tensor2<S>& g = t.grad(self);
    Tensor2<S>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      gx.data()[i] += g.data()[i] * y.data()[i] * (S(1) - y.data()[i]);
  });
}

template <class S>
Var add(Tape<S>& tape, Var a, Var b) {
  const Tensor2<S>& va = tape.value(a);
  const Tensor2<S>& vb = tape.value(b);
  require_shape(va.same_shape(vb), "add: shape mismatch " + va.shape_string() + " vs " +
                                       vb.shape_string());
  Tensor2<S> out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = va.data()[i] + vb.data()[i];
  return tape.record(std::move(out), {a, b}, [=](Tape<S>& t, std::size_t self) {
    const Tensor2<S>& g = t.grad(self);
    for (Var in : {a, b}) {
      if (!t.requires_grad(in)) continue;
      Tensor2<S>& gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi.data()[i] += g.data()[i];
    }
  });
}

/// Temporal mean: T x C -> 1 x C.
template <class S>
Var mean_rows(Tape<S>& tape, Var x) {
  const Tensor2<S>& in = tape.value(x);
  Tensor2<S> out(1, in.cols());
  for (std::size_t c = 0; c < in.cols(); ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < in.rows(); ++r) acc += in(r, c);
    out(0, c) = static_cast<S>(acc / static_cast<double>(in.rows()));
  }
  return tape.record(std::move(out), {x}, [=](Tape<S>& t, std::size_t self) {
    const Tensor2<S>& g = t.grad(self);
    Tensor2<S>& gx = t.grad(x);
    const S inv = static_cast<S>(1.0 / static_cast<double>(gx.rows()));
    for (std::size_t r = 0; r < gx.rows(); ++r)
      for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g(0, c) * inv;
  });
}

/// Per-channel gating: out[t][c] = x[t][c] * gate[0][c].
template <class S>
Var scale_channels(Tape<S>& tape, Var x, Var gate) {
  const Tensor2<S>& in = tape.value(x);
  const Tensor2<S>& gv = tape.value(gate);
  require_shape(gv.rows() == 1 && gv.cols() == in.cols(), "scale_channels: gate shape mismatch");
  Tensor2<S> out(in.rows(), in.cols());
  for (std::size_t r = 0; r < in.rows(); ++r)
    for (std::size_t c = 0; c < in.cols(); ++c) out(r, c) = in(r, c) * gv(0, c);
  return tape.record(std::move(out), {x, gate}, [=](Tape<S>& t, std::size_t self) {
    const Tensor2<S>& g = t.grad(self);
    const Tensor2<S>& xin = t.value(x);
    const Tensor2<S>& gate_v = t.value(gate);
    if (t.requires_grad(x)) {
      Tensor2<S>& gx = t.grad(x);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += g(r, c) * gate_v(0, c);
    }
    if (t.requires_grad(gate)) {
      Tensor2<S>& gg = t.grad(gate);
      for (std::size_t c = 0; c < g.cols(); ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < g.rows(); ++r) acc += static_cast<double>(g(r, c)) * xin(r, c);
        gg(0, c) += static_cast<S>(acc);
      }
    }
  });
}

/// Sum of all entries -> 1x1.
template <class S>
Var sum(Tape<S>& tape, Var x) {
  const Tensor2<S>& in = tape.value(x);
  double acc = 0.0;
  for (S v : in.values()) acc += v;
  Tensor2<S> out(1, 1, static_cast<S>(acc));
  return tape.record(std::move(out), {x}, [=](Tape<S>& t, std::size_t self) {
    const S g = t.grad(self)(0, 0);
    Tensor2<S>& gx = t.grad(x);
    for (S& v : gx.values()) v += g;
  });
}

/// <x, coeffs> with a constant coefficient tensor -> 1x1.
template <class S>
Var dot(Tape<S>& tape, Var x, Tensor2<S> coeffs) {
  const Tensor2<S>& in = tape.value(x);
  require_shape(in.same_shape(coeffs), "dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i)
    acc += static_cast<double>(in.data()[i]) * coeffs.data()[i];
  Tensor2<S> out(1, 1, static_cast<S>(acc));
  return tape.record(std::move(out), {x},
                     [=, coeffs = std::move(coeffs)](Tape<S>& t, std::size_t self) {
                       const S g = t.grad(self)(0, 0);
                       Tensor2<S>& gx = t.grad(x);
                       for (std::size_t i = 0; i < gx.size(); ++i)
                         gx.data()[i] += g * coeffs.data()[i];
                     });
}

/// sum_i coeffs[i] * scalars[i] for 1x1 nodes.
template <class S>
Var weighted_sum(Tape<S>& tape, const std::vector<Var>& scalars, const std::vector<double>& coeffs) {
  require_shape(scalars.size() == coeffs.size(), "weighted_sum: arity mismatch");
  double acc = 0.0;
  bool needs = false;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const Tensor2<S>& v = tape.value(scalars[i]);
    require_shape(v.rows() == 1 && v.cols() == 1, "weighted_sum: operands must be 1x1");
    acc += coeffs[i] * static_cast<double>(v(0, 0));
    needs = needs || tape.requires_grad(scalars[i]);
  }
  Tensor2<S> out(1, 1, static_cast<S>(acc));
  // record() takes an initializer list; route dependencies through the first
  // operand that needs a gradient so the node is marked correctly.
  Var dep = scalars.empty() ? Var{} : scalars.front();
  for (Var s : scalars)
    if (tape.requires_grad(s)) dep = s;
  auto back = [=](Tape<S>& t, std::size_t self) {
    const S g = t.grad(self)(0, 0);
    for (std::size_t i = 0; i < scalars.size(); ++i)
      if (t.requires_grad(scalars[i])) t.grad(scalars[i])(0, 0) += static_cast<S>(coeffs[i] * g);
  };
  if (!dep.valid()) return tape.constant(std::move(out));
  return needs ? tape.record(std::move(out), {dep}, back) : tape.constant(std::move(out));
}

}  // namespace ad
}  // namespace signseg
