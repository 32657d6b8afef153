#pragma once

// Random forest of CART trees (Gini impurity) over per-frame feature rows.
//
// Forest file, little-endian:
//   char[4] magic "SGRF", u32 version (1), u32 feature width, u32 tree count
//   per tree: u32 node count, then per node
//     i32 feature (-1 for a leaf), f32 threshold, i32 left, i32 right, u8 label
// A sample goes left when x[feature] <= threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "signseg/binary_io.hpp"
#include "signseg/errors.hpp"
#include "signseg/labeling.hpp"
#include "signseg/numerics/tensor.hpp"
#include "signseg/rng.hpp"

namespace signseg {

struct ForestConfig {
  std::size_t trees = 100;
  int max_depth = -1;  // -1 unlimited, 0 = single leaf
  std::size_t min_samples_leaf = 2;
  std::size_t features_per_split = 0;  // 0 -> round(sqrt(width))
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (trees < 1) throw ConfigError("forest: trees must be >= 1");
    if (min_samples_leaf < 1) throw ConfigError("forest: min_samples_leaf must be >= 1");
    if (max_depth < -1) throw ConfigError("forest: max_depth must be >= -1");
  }
};

struct TreeNode {
  std::int32_t feature = -1;
  float threshold = 0.0f;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint8_t label = 0;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at 0

  std::uint8_t predict(const float* x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold
                                                                    ? nodes[i].left
                                                                    : nodes[i].right);
    return nodes[i].label;
  }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (nodes[i].feature >= 0) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
    }
    return best;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct Forest {
  std::size_t width = 0;
  std::vector<Tree> trees;

  friend bool operator==(const Forest&, const Forest&) = default;
};

/// Row-major design matrix built from stacked per-video frames.
struct FrameDataset {
  std::size_t width = 0;
  std::vector<float> x;
  std::vector<std::uint8_t> y;

  std::size_t size() const noexcept { return y.size(); }
  const float* row(std::size_t i) const { return x.data() + i * width; }
};

inline FrameDataset stack_frames(const std::vector<FeatureSequence<float>>& feats,
                                 const std::vector<FrameLabels>& labels) {
  if (feats.size() != labels.size()) {
    throw ArgumentError("forest: " + std::to_string(feats.size()) + " feature sequences but " +
                        std::to_string(labels.size()) + " label vectors");
  }
  if (feats.empty()) throw TrainingError("forest: no training videos");
  FrameDataset d;
  d.width = feats.front().cols();
  for (std::size_t v = 0; v < feats.size(); ++v) {
    if (feats[v].cols() != d.width) throw DimensionError("forest: feature width differs across videos");
    if (feats[v].rows() != labels[v].size()) {
      throw AlignmentError("forest: video " + std::to_string(v) + " has " + std::to_string(feats[v].rows()) +
                           " frames but " + std::to_string(labels[v].size()) + " labels");
    }
    d.x.insert(d.x.end(), feats[v].values().begin(), feats[v].values().end());
    d.y.insert(d.y.end(), labels[v].values().begin(), labels[v].values().end());
  }
  return d;
}

/// Sample indices of tree `tree`'s training set (with replacement when
/// bootstrapping, else 0..n-1).
inline std::vector<std::size_t> bootstrap_sample(std::size_t n, const ForestConfig& cfg, std::size_t tree) {
  std::vector<std::size_t> idx(n);
  if (!cfg.bootstrap) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  Rng rng(derive_seed(cfg.seed, 0xb007 + tree));
  for (auto& i : idx) i = rng.index(n);
  return idx;
}

namespace detail {

inline std::uint8_t majority(std::size_t n0, std::size_t n1) { return n1 > n0 ? 1 : 0; }

struct SplitSearch {
  const FrameDataset& data;
  const ForestConfig& cfg;
  std::size_t mtry;
  Rng rng;
  Tree tree;
  std::vector<std::pair<float, std::uint8_t>> scratch;
  std::vector<std::size_t> features;

  static double gini(double n0, double n1) {
    const double n = n0 + n1;
    if (n == 0.0) return 0.0;
    const double p0 = n0 / n, p1 = n1 / n;
    return 1.0 - p0 * p0 - p1 * p1;
  }

  // Grows the subtree for idx[lo, hi) and returns its node index.
  std::int32_t grow(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth) {
    std::size_t n1 = 0;
    for (std::size_t i = lo; i < hi; ++i) n1 += data.y[idx[i]];
    const std::size_t n = hi - lo, n0 = n - n1;
    const auto self = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back({-1, 0.0f, -1, -1, majority(n0, n1)});
    if (n0 == 0 || n1 == 0) return self;
    if (cfg.max_depth >= 0 && depth >= cfg.max_depth) return self;
    if (n < 2 * cfg.min_samples_leaf) return self;

    // Sample mtry distinct features (partial Fisher-Yates).
    for (std::size_t k = 0; k < mtry; ++k) std::swap(features[k], features[k + rng.index(features.size() - k)]);

    const double parent = gini(static_cast<double>(n0), static_cast<double>(n1));
    double best_score = parent - 1e-12;
    std::int32_t best_feature = -1;
    float best_threshold = 0.0f;
    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t f = features[k];
      scratch.clear();
      for (std::size_t i = lo; i < hi; ++i) scratch.emplace_back(data.row(idx[i])[f], data.y[idx[i]]);
      std::sort(scratch.begin(), scratch.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        (scratch[i].second ? l1 : l0) += 1.0;
        if (!(scratch[i].first < scratch[i + 1].first)) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf) continue;
        const double r0 = static_cast<double>(n0) - l0, r1 = static_cast<double>(n1) - l1;
        const double score = (static_cast<double>(nl) * gini(l0, l1) + static_cast<double>(nr) * gini(r0, r1)) /
                             static_cast<double>(n);
        if (score < best_score) {
          best_score = score;
          best_feature = static_cast<std::int32_t>(f);
          best_threshold = scratch[i].first;
        }
      }
    }
    if (best_feature < 0) return self;

    const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                    idx.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t s) {
                                      return data.row(s)[best_feature] <= best_threshold;
                                    });
    const auto split = static_cast<std::size_t>(mid - idx.begin());
    tree.nodes[self].feature = best_feature;
    tree.nodes[self].threshold = best_threshold;
    const std::int32_t left = grow(idx, lo, split, depth + 1);
    const std::int32_t right = grow(idx, split, hi, depth + 1);
    tree.nodes[self].left = left;
    tree.nodes[self].right = right;
    return self;
  }
};

}  // namespace detail

inline std::size_t resolved_features_per_split(const ForestConfig& cfg, std::size_t width) {
  std::size_t m = cfg.features_per_split;
  if (m == 0) m = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(width))));
  return std::clamp<std::size_t>(m, 1, width);
}

inline Tree train_tree(const FrameDataset& data, const ForestConfig& cfg, std::size_t tree_index) {
  std::vector<std::size_t> idx = bootstrap_sample(data.size(), cfg, tree_index);
  detail::SplitSearch s{data, cfg, resolved_features_per_split(cfg, data.width),
                        Rng(derive_seed(cfg.seed, 0x7ee0 + tree_index)), {}, {}, {}};
  s.features.resize(data.width);
  std::iota(s.features.begin(), s.features.end(), std::size_t{0});
  s.grow(idx, 0, idx.size(), 0);
  return std::move(s.tree);
}

inline Forest forest_train(const FrameDataset& data, const ForestConfig& cfg) {
  cfg.validate();
  if (data.size() == 0 || data.width == 0) throw TrainingError("forest: empty training data");
  const auto n1 = static_cast<std::size_t>(std::count(data.y.begin(), data.y.end(), std::uint8_t{1}));
  if (n1 == 0 || n1 == data.size()) {
    throw TrainingError("forest: training labels contain a single class (" + std::to_string(n1) + " of " +
                        std::to_string(data.size()) + " frames are boundary)");
  }
  Forest f;
  f.width = data.width;
  for (std::size_t t = 0; t < cfg.trees; ++t) f.trees.push_back(train_tree(data, cfg, t));
  return f;
}

inline Forest forest_train(const std::vector<FeatureSequence<float>>& feats,
                           const std::vector<FrameLabels>& labels, const ForestConfig& cfg) {
  return forest_train(stack_frames(feats, labels), cfg);
}

/// Fraction of trees voting boundary for one row.
inline double forest_vote(const Forest& f, const float* x) {
  std::size_t votes = 0;
  for (const Tree& t : f.trees) votes += t.predict(x);
  return static_cast<double>(votes) / static_cast<double>(f.trees.size());
}

inline FrameLabels forest_predict(const Forest& f, const FeatureSequence<float>& feats) {
  if (feats.cols() != f.width) {
    throw DimensionError("forest_predict: feature width " + std::to_string(feats.cols()) +
                         ", forest was trained on " + std::to_string(f.width));
  }
  FrameLabels y(feats.rows(), 0);
  for (std::size_t t = 0; t < feats.rows(); ++t) {
    std::size_t votes = 0;
    for (const Tree& tr : f.trees) votes += tr.predict(feats.row(t).data());
    if (2 * votes > f.trees.size()) y.set(t, true);
  }
  return y;
}

inline constexpr std::uint32_t kForestVersion = 1;

inline io::ByteWriter encode_forest(const Forest& f) {
  io::ByteWriter w;
  w.put_bytes("SGRF", 4);
  w.put(kForestVersion);
  w.put(static_cast<std::uint32_t>(f.width));
  w.put(static_cast<std::uint32_t>(f.trees.size()));
  for (const Tree& t : f.trees) {
    w.put(static_cast<std::uint32_t>(t.nodes.size()));
    for (const TreeNode& n : t.nodes) {
      w.put(n.feature);
      w.put(n.threshold);
      w.put(n.left);
      w.put(n.right);
      w.put(n.label);
    }
  }
  return w;
}

inline void write_forest(const std::string& path, const Forest& f) { encode_forest(f).write_file(path); }

inline Forest decode_forest(io::ByteReader& r) {
  r.expect_magic("SGRF");
  const auto at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kForestVersion) r.fail(at, "unsupported forest version " + std::to_string(version));
  Forest f;
  f.width = r.get<std::uint32_t>("feature width");
  const auto trees = r.get<std::uint32_t>("tree count");
  for (std::uint32_t t = 0; t < trees; ++t) {
    Tree tree;
    const auto count = r.get<std::uint32_t>("node count");
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto node_at = r.offset();
      TreeNode n;
      n.feature = r.get<std::int32_t>("node feature");
      n.threshold = r.get<float>("node threshold");
      n.left = r.get<std::int32_t>("node left");
      n.right = r.get<std::int32_t>("node right");
      n.label = r.get<std::uint8_t>("node label");
      const bool leaf = n.feature < 0;
      const auto in_range = [&](std::int32_t c) { return c > static_cast<std::int32_t>(i) && c < static_cast<std::int32_t>(count); };
      if (n.label > 1 || (!leaf && (static_cast<std::size_t>(n.feature) >= f.width || !in_range(n.left) ||
                                    !in_range(n.right)))) {
        r.fail(node_at, "tree " + std::to_string(t) + " node " + std::to_string(i) + " is malformed");
      }
      tree.nodes.push_back(n);
    }
    if (tree.nodes.empty()) r.fail(r.offset(), "tree " + std::to_string(t) + " has no nodes");
    f.trees.push_back(std::move(tree));
  }
  r.expect_end();
  if (f.trees.empty()) throw FormatError(r.source() + ": forest has no trees");
  return f;
}

inline Forest read_forest(const std::string& path) {
  auto r = io::ByteReader::from_file(path);
  return decode_forest(r);
}

}  // namespace signseg
