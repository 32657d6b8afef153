#pragma once

// Hand-crafted pose descriptors: joint-pair distances and joint-triple
// angles per frame, and a windowed Laplacian-kernel expansion that
// summarises how similar the frames around each position are.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "signseg/dataio/pose.hpp"
#include "signseg/errors.hpp"
#include "signseg/numerics/tensor.hpp"

namespace signseg {

struct JointTriple {
  std::string first, middle, last;  // angle measured at `middle`
};

struct GeomFeatureConfig {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<JointTriple> triples;
  std::size_t window = 9;
  std::optional<double> sigma;  // median L1 distance heuristic when unset

  void validate() const {
    if (window < 1 || window % 2 == 0) throw ConfigError("geometric: window must be odd and >= 1");
    if (sigma && !(*sigma > 0.0)) throw ConfigError("geometric: sigma must be > 0");
  }
};

/// Pairwise distances among both wrists, both elbows and the nose, plus the
/// two elbow angles.
inline GeomFeatureConfig default_geom_config() {
  GeomFeatureConfig cfg;
  const std::vector<std::string> keys{"right_wrist", "left_wrist", "right_elbow", "left_elbow", "nose"};
  for (std::size_t i = 0; i < keys.size(); ++i)
    for (std::size_t j = i + 1; j < keys.size(); ++j) cfg.pairs.emplace_back(keys[i], keys[j]);
  cfg.triples = {{"right_shoulder", "right_elbow", "right_wrist"},
                 {"left_shoulder", "left_elbow", "left_wrist"}};
  return cfg;
}

template <class S>
struct GeometricFeatures {
  FeatureSequence<S> features;          // T x (|pairs| + |triples|)
  std::vector<std::uint8_t> degenerate;  // T x |triples|, 1 where a limb vector had zero length
  bool any_degenerate() const {
    return std::any_of(degenerate.begin(), degenerate.end(), [](std::uint8_t d) { return d != 0; });
  }
};

template <class S>
GeometricFeatures<S> geometric_features(const PoseSequence<S>& pose, const GeomFeatureConfig& cfg) {
  pose.validate();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [a, b] : cfg.pairs) pairs.emplace_back(pose.schema.index_of(a), pose.schema.index_of(b));
  std::vector<std::array<std::size_t, 3>> triples;
  for (const auto& tr : cfg.triples)
    triples.push_back({pose.schema.index_of(tr.first), pose.schema.index_of(tr.middle),
                       pose.schema.index_of(tr.last)});

  const std::size_t T = pose.frames();
  GeometricFeatures<S> out{FeatureSequence<S>(T, pairs.size() + triples.size()),
                           std::vector<std::uint8_t>(T * triples.size(), 0)};
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t col = 0;
    for (const auto& [a, b] : pairs) {
      const auto pa = pose.joint(t, a), pb = pose.joint(t, b);
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) d2 += (pa[k] - pb[k]) * (pa[k] - pb[k]);
      out.features(t, col++) = static_cast<S>(std::sqrt(d2));
    }
    for (std::size_t q = 0; q < triples.size(); ++q) {
      const auto pa = pose.joint(t, triples[q][0]), pm = pose.joint(t, triples[q][1]),
                 pc = pose.joint(t, triples[q][2]);
      double dot = 0.0, n1 = 0.0, n2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double u = pa[k] - pm[k], v = pc[k] - pm[k];
        dot += u * v;
        n1 += u * u;
        n2 += v * v;
      }
      double angle = 0.0;
      if (n1 == 0.0 || n2 == 0.0) {
        out.degenerate[t * triples.size() + q] = 1;
      } else {
        angle = std::acos(std::clamp(dot / std::sqrt(n1 * n2), -1.0, 1.0));
      }
      out.features(t, col++) = static_cast<S>(angle);
    }
  }
  return out;
}

template <class S>
double l1_distance(const FeatureSequence<S>& f, std::size_t a, std::size_t b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < f.cols(); ++d) acc += std::abs(static_cast<double>(f(a, d)) - f(b, d));
  return acc;
}

/// Median pairwise L1 distance between frames (at most 256 evenly spaced
/// frames are used); 1 if every distance is zero.
template <class S>
double median_l1_sigma(const std::vector<const FeatureSequence<S>*>& seqs) {
  std::vector<std::pair<const FeatureSequence<S>*, std::size_t>> frames;
  for (const auto* f : seqs)
    for (std::size_t t = 0; t < f->rows(); ++t) frames.emplace_back(f, t);
  const std::size_t keep = std::min<std::size_t>(256, frames.size());
  std::vector<std::pair<const FeatureSequence<S>*, std::size_t>> sample;
  for (std::size_t i = 0; i < keep; ++i) sample.push_back(frames[i * frames.size() / keep]);
  std::vector<double> d;
  for (std::size_t i = 0; i < sample.size(); ++i)
    for (std::size_t j = i + 1; j < sample.size(); ++j) {
      if (sample[i].first->cols() != sample[j].first->cols()) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < sample[i].first->cols(); ++c)
        acc += std::abs(static_cast<double>((*sample[i].first)(sample[i].second, c)) -
                        (*sample[j].first)(sample[j].second, c));
      d.push_back(acc);
    }
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  const double med = d[d.size() / 2];
  return med > 0.0 ? med : 1.0;
}

template <class S>
double median_l1_sigma(const FeatureSequence<S>& f) {
  return median_l1_sigma<S>(std::vector<const FeatureSequence<S>*>{&f});
}

inline std::size_t window_frame(std::size_t t, std::size_t i, std::size_t W, std::size_t T) {
  const auto idx = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(W / 2) +
                   static_cast<std::ptrdiff_t>(i);
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(T) - 1));
}

/// W x W kernel K[a][b] = exp(-|f_a - f_b|_1 / sigma) over the window
/// centered at t (edge frames repeated).
template <class S>
Tensor2<double> laplacian_kernel_window(const FeatureSequence<S>& f, std::size_t t, std::size_t W,
                                        double sigma) {
  Tensor2<double> K(W, W);
  for (std::size_t a = 0; a < W; ++a) {
    K(a, a) = 1.0;
    for (std::size_t b = a + 1; b < W; ++b) {
      const double k = std::exp(-l1_distance(f, window_frame(t, a, W, f.rows()),
                                             window_frame(t, b, W, f.rows())) / sigma);
      K(a, b) = k;
      K(b, a) = k;
    }
  }
  return K;
}

inline std::size_t laplacian_window_width(std::size_t W, std::size_t D) {
  return W * (W - 1) / 2 + W * D;
}

/// Row t = [strict upper triangle of the window kernel | raw features of the
/// W window frames].
template <class S>
FeatureSequence<S> laplacian_window_features(const FeatureSequence<S>& f, const GeomFeatureConfig& cfg) {
  cfg.validate();
  if (f.rows() == 0) throw DimensionError("laplacian_window_features: empty sequence");
  const std::size_t W = cfg.window, D = f.cols(), T = f.rows();
  const double sigma = cfg.sigma ? *cfg.sigma : median_l1_sigma(f);
  FeatureSequence<S> out(T, laplacian_window_width(W, D));
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor2<double> K = laplacian_kernel_window(f, t, W, sigma);
    auto row = out.row(t);
    std::size_t col = 0;
    for (std::size_t a = 0; a < W; ++a)
      for (std::size_t b = a + 1; b < W; ++b) row[col++] = static_cast<S>(K(a, b));
    for (std::size_t i = 0; i < W; ++i) {
      const auto src = f.row(window_frame(t, i, W, T));
      for (std::size_t d = 0; d < D; ++d) row[col++] = src[d];
    }
  }
  return out;
}

}  // namespace signseg
