#pragma once

#include <cstddef>
#include <string>

#include "signseg/errors.hpp"
#include "signseg/labeling.hpp"

namespace signseg {

/// Splits T frames into n equal segments, segment k spanning
/// [round(kT/n), round((k+1)T/n) - 1] (halves round up), and labels it with
/// the ground-truth construction rule.
inline SegmentAnnotation uniform_segments(std::size_t T, std::size_t n_signs) {
  if (n_signs < 1 || 2 * n_signs > T) {
    throw ArgumentError("uniform_segmentation: need 1 <= n_signs <= T/2, got n=" +
                        std::to_string(n_signs) + ", T=" + std::to_string(T));
  }
  const auto cut = [&](std::size_t k) { return (2 * k * T + n_signs) / (2 * n_signs); };
  SegmentAnnotation ann;
  ann.num_frames = T;
  for (std::size_t k = 0; k < n_signs; ++k) ann.segments.push_back({cut(k), cut(k + 1) - 1, {}});
  return ann;
}

inline FrameLabels uniform_segmentation(std::size_t T, std::size_t n_signs) {
  return build_frame_labels(uniform_segments(T, n_signs));
}

}  // namespace signseg
