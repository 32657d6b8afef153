#pragma once

// Forward and backward kernels for the layer set of the segmentation network.
// These are value-level functions; the tape in autodiff.hpp wires them into
// reverse-mode differentiation.

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "signseg/numerics/tensor.hpp"

namespace signseg::kernels {

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapMat = Eigen::Map<RowMat<S>>;
template <class S>
using ConstMapMat = Eigen::Map<const RowMat<S>>;

template <class S>
ConstMapMat<S> as_matrix(const Tensor2<S>& t) {
  return ConstMapMat<S>(t.data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

template <class S>
MapMat<S> as_matrix(Tensor2<S>& t) {
  return MapMat<S>(t.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

/// Shape of a dilated convolution. Weights are stored Cout x (Cin*K), i.e.
/// the row-major flattening of a Cout x Cin x K array.
struct ConvShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
};

inline void check_conv(const ConvShape& s, std::size_t in_cols, std::size_t w_rows,
                       std::size_t w_cols, std::size_t b_cols, std::size_t dilation) {
  require_shape(s.kernel % 2 == 1, "conv1d_dilated: kernel size must be odd");
  require_shape(dilation >= 1, "conv1d_dilated: dilation must be positive");
  require_shape(in_cols == s.in_channels,
                "conv1d_dilated: input has " + std::to_string(in_cols) + " channels, expected " +
                    std::to_string(s.in_channels));
  require_shape(w_rows == s.out_channels && w_cols == s.in_channels * s.kernel,
                "conv1d_dilated: weight shape mismatch");
  require_shape(b_cols == s.out_channels, "conv1d_dilated: bias shape mismatch");
}

// Contiguous Cout x Cin matrix for tap k.
template <class S>
RowMat<S> conv_tap(const Tensor2<S>& w, const ConvShape& s, std::size_t k) {
  RowMat<S> tap(s.out_channels, s.in_channels);
  for (std::size_t o = 0; o < s.out_channels; ++o)
    for (std::size_t i = 0; i < s.in_channels; ++i) tap(o, i) = w(o, i * s.kernel + k);
  return tap;
}

// Frame range [lo, hi) of output rows that read a valid input row at offset.
inline void tap_range(std::ptrdiff_t T, std::ptrdiff_t offset, std::ptrdiff_t& lo,
                      std::ptrdiff_t& hi) {
  lo = std::max<std::ptrdiff_t>(0, -offset);
  hi = std::min<std::ptrdiff_t>(T, T - offset);
}

/// out[t][o] = b[o] + sum_{k,i} w[o][i][k] * in[t + (k - (K-1)/2) * dilation][i],
/// zero padded so the output keeps T frames.
template <class S>
Tensor2<S> conv1d_dilated(const Tensor2<S>& in, const Tensor2<S>& w, const Tensor2<S>& b,
                          const ConvShape& s, std::size_t dilation) {
  check_conv(s, in.cols(), w.rows(), w.cols(), b.size(), dilation);
  const auto T = static_cast<std::ptrdiff_t>(in.rows());
  Tensor2<S> out(in.rows(), s.out_channels);
  auto O = as_matrix(out);
  O.rowwise() = ConstMapMat<S>(b.data(), 1, static_cast<Eigen::Index>(s.out_channels)).row(0);
  const auto X = as_matrix(in);
  const auto half = static_cast<std::ptrdiff_t>(s.kernel / 2);
  for (std::size_t k = 0; k < s.kernel; ++k) {
    const std::ptrdiff_t offset =
        (static_cast<std::ptrdiff_t>(k) - half) * static_cast<std::ptrdiff_t>(dilation);
    std::ptrdiff_t lo, hi;
    tap_range(T, offset, lo, hi);
    if (hi <= lo) continue;
    const RowMat<S> tap = conv_tap(w, s, k);
    O.middleRows(lo, hi - lo).noalias() += X.middleRows(lo + offset, hi - lo) * tap.transpose();
  }
  return out;
}

/// Accumulates into grad_in / grad_w / grad_b (each either empty-and-skipped
/// or correctly shaped).
template <class S>
void conv1d_dilated_backward(const Tensor2<S>& in, const Tensor2<S>& w, const ConvShape& s,
                             std::size_t dilation, const Tensor2<S>& grad_out,
                             Tensor2<S>* grad_in, Tensor2<S>* grad_w, Tensor2<S>* grad_b) {
  const auto T = static_cast<std::ptrdiff_t>(in.rows());
  const auto G = as_matrix(grad_out);
  const auto X = as_matrix(in);
  const auto half = static_cast<std::ptrdiff_t>(s.kernel / 2);
  for (std::size_t k = 0; k < s.kernel; ++k) {
    const std::ptrdiff_t offset =
        (static_cast<std::ptrdiff_t>(k) - half) * static_cast<std::ptrdiff_t>(dilation);
    std::ptrdiff_t lo, hi;
    tap_range(T, offset, lo, hi);
    if (hi <= lo) continue;
    if (grad_in) {
      const RowMat<S> tap = conv_tap(w, s, k);
      as_matrix(*grad_in).middleRows(lo + offset, hi - lo).noalias() +=
          G.middleRows(lo, hi - lo) * tap;
    }
    if (grad_w) {
      const RowMat<S> gtap =
          G.middleRows(lo, hi - lo).transpose() * X.middleRows(lo + offset, hi - lo);
      for (std::size_t o = 0; o < s.out_channels; ++o)
        for (std::size_t i = 0; i < s.in_channels; ++i)
          (*grad_w)(o, i * s.kernel + k) += gtap(o, i);
    }
  }
  if (grad_b) {
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      double acc = 0.0;
      for (std::ptrdiff_t t = 0; t < T; ++t) acc += grad_out(t, o);
      (*grad_b)(0, o) += static_cast<S>(acc);
    }
  }
}

/// Per-frame affine map: out[t] = W in[t] + b, with W of shape Cout x Cin.
template <class S>
Tensor2<S> pointwise_conv(const Tensor2<S>& in, const Tensor2<S>& w, const Tensor2<S>& b) {
  require_shape(w.cols() == in.cols(), "pointwise_conv: input has " + std::to_string(in.cols()) +
                                           " channels, weights expect " +
                                           std::to_string(w.cols()));
  require_shape(b.size() == w.rows(), "pointwise_conv: bias shape mismatch");
  Tensor2<S> out(in.rows(), w.rows());
  auto O = as_matrix(out);
  O.rowwise() = ConstMapMat<S>(b.data(), 1, static_cast<Eigen::Index>(w.rows())).row(0);
  O.noalias() += as_matrix(in) * as_matrix(w).transpose();
  return out;
}

template <class S>
void pointwise_conv_backward(const Tensor2<S>& in, const Tensor2<S>& w,
                             const Tensor2<S>& grad_out, Tensor2<S>* grad_in,
                             Tensor2<S>* grad_w, Tensor2<S>* grad_b) {
  const auto G = as_matrix(grad_out);
  if (grad_in) as_matrix(*grad_in).noalias() += G * as_matrix(w);
  if (grad_w) as_matrix(*grad_w).noalias() += G.transpose() * as_matrix(in);
  if (grad_b) {
    for (std::size_t o = 0; o < grad_out.cols(); ++o) {
      double acc = 0.0;
      for (std::size_t t = 0; t < grad_out.rows(); ++t) acc += grad_out(t, o);
      (*grad_b)(0, o) += static_cast<S>(acc);
    }
  }
}

template <class S>
Tensor2<S> relu(const Tensor2<S>& in) {
  Tensor2<S> out(in.rows(), in.cols());
  const S* x = in.data();
  S* y = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) y[i] = x[i] > S(0) ? x[i] : S(0);
  return out;
}

/// Row-wise log-softmax, stabilised by subtracting the row maximum.
template <class S>
Tensor2<S> log_softmax_rows(const Tensor2<S>& in) {
  require_shape(in.cols() >= 2, "log_softmax_rows: need at least 2 classes");
  Tensor2<S> out(in.rows(), in.cols());
  for (std::size_t t = 0; t < in.rows(); ++t) {
    const auto r = in.row(t);
    double m = -std::numeric_limits<double>::infinity();
    for (S v : r) m = std::max(m, static_cast<double>(v));
    double acc = 0.0;
    for (S v : r) acc += std::exp(static_cast<double>(v) - m);
    const double log_acc = std::log(acc);
    auto o = out.row(t);
    for (std::size_t c = 0; c < r.size(); ++c)
      o[c] = static_cast<S>((static_cast<double>(r[c]) - m) - log_acc);
  }
  return out;
}

template <class S>
void log_softmax_rows_backward(const Tensor2<S>& out, const Tensor2<S>& grad_out,
                               Tensor2<S>& grad_in) {
  for (std::size_t t = 0; t < out.rows(); ++t) {
    double gsum = 0.0;
    for (std::size_t c = 0; c < out.cols(); ++c) gsum += grad_out(t, c);
    for (std::size_t c = 0; c < out.cols(); ++c)
      grad_in(t, c) += static_cast<S>(grad_out(t, c) - std::exp(static_cast<double>(out(t, c))) * gsum);
  }
}

}  // namespace signseg::kernels
