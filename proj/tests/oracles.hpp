#pragma once

// Independent test oracles: exhaustive matching, naive per-frame labeling
// and random instance generators.

#include <algorithm>
#include <functional>
#include <vector>

#include "signseg/labeling.hpp"
#include "signseg/rng.hpp"

namespace signseg::testing {

/// Largest one-to-one matching by trying every assignment of left items.
inline std::size_t brute_force_matching(std::size_t nl, std::size_t nr,
                                        const std::function<bool(std::size_t, std::size_t)>& edge) {
  std::vector<bool> used(nr, false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t i) -> std::size_t {
    if (i == nl) return 0;
    std::size_t best = go(i + 1);
    for (std::size_t j = 0; j < nr; ++j) {
      if (used[j] || !edge(i, j)) continue;
      used[j] = true;
      best = std::max(best, 1 + go(i + 1));
      used[j] = false;
    }
    return best;
  };
  return go(0);
}

/// Frame t is interior iff some segment has start < t < end.
inline FrameLabels naive_labels(const SegmentAnnotation& ann) {
  FrameLabels y(ann.num_frames, 1);
  for (std::size_t t = 0; t < ann.num_frames; ++t)
    for (const Segment& s : ann.segments)
      if (s.start < t && t < s.end) y.set(t, false);
  return y;
}

/// Random valid annotation: up to `max_signs` signs of length 1..12 with
/// gaps of 0..3 frames and 0..3 frames of padding at each clip edge.
inline SegmentAnnotation random_annotation(Rng& rng, std::size_t max_signs = 8) {
  SegmentAnnotation ann;
  ann.video_id = "r";
  std::size_t t = static_cast<std::size_t>(rng.uniform_int(0, 3));
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_signs)));
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) t += static_cast<std::size_t>(rng.uniform_int(0, 3));
    const auto len = static_cast<std::size_t>(rng.uniform_int(1, 12));
    ann.segments.push_back({t, t + len - 1, {}});
    t += len;
  }
  ann.num_frames = t + static_cast<std::size_t>(rng.uniform_int(0, 3));
  return ann;
}

}  // namespace signseg::testing
