#pragma once

// Ground-truth construction: sign segments -> per-frame boundary/interior
// labels, and the inverse event extraction used by the evaluation metrics.
// Frames are 0-based and intervals inclusive throughout.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "signseg/errors.hpp"
#include "signseg/numerics/tensor.hpp"

namespace signseg {

enum class FrameClass : std::uint8_t { kInterior = 0, kBoundary = 1 };

/// Length-T vector over {0 = interior, 1 = boundary}.
class FrameLabels {
 public:
  FrameLabels() = default;
  explicit FrameLabels(std::size_t n, std::uint8_t fill = 0) : v_(n, fill) {}
  FrameLabels(std::initializer_list<int> init) {
    v_.reserve(init.size());
    for (int x : init) v_.push_back(static_cast<std::uint8_t>(x != 0));
  }
  explicit FrameLabels(std::vector<std::uint8_t> v) : v_(std::move(v)) {
    for (auto& x : v_) x = x != 0;
  }

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }
  std::uint8_t operator[](std::size_t i) const { return v_[i]; }
  void set(std::size_t i, bool boundary) { v_[i] = boundary ? 1 : 0; }
  bool is_boundary(std::size_t i) const { return v_[i] != 0; }

  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }
  const std::vector<std::uint8_t>& values() const noexcept { return v_; }

  friend bool operator==(const FrameLabels&, const FrameLabels&) = default;

 private:
  std::vector<std::uint8_t> v_;
};

struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<std::string> gloss;

  std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Annotated sign segments of one clip.
struct SegmentAnnotation {
  std::string video_id;
  std::size_t num_frames = 0;
  std::vector<Segment> segments;
  std::optional<std::string> signer;

  friend bool operator==(const SegmentAnnotation&, const SegmentAnnotation&) = default;
};

/// Throws AnnotationError unless 0 <= start <= end < T, sorted, disjoint.
inline void validate_annotation(const SegmentAnnotation& ann) {
  const auto where = [&](std::size_t i) {
    return "annotation '" + ann.video_id + "' segment " + std::to_string(i) + ": ";
  };
  if (ann.num_frames == 0) throw AnnotationError("annotation '" + ann.video_id + "': zero frames");
  for (std::size_t i = 0; i < ann.segments.size(); ++i) {
    const Segment& s = ann.segments[i];
    if (s.start > s.end) throw AnnotationError(where(i) + "start > end");
    if (s.end >= ann.num_frames) {
      throw AnnotationError(where(i) + "end " + std::to_string(s.end) +
                            " >= num_frames " + std::to_string(ann.num_frames));
    }
    if (i > 0 && s.start <= ann.segments[i - 1].end) {
      throw AnnotationError(where(i) + "overlaps or precedes the previous segment");
    }
  }
}

/// Start and end frame of every sign are boundaries, as are frames between
/// signs and frames before the first / after the last sign.
inline FrameLabels build_frame_labels(const SegmentAnnotation& ann) {
  validate_annotation(ann);
  FrameLabels y(ann.num_frames, 1);
  for (const Segment& s : ann.segments) {
    for (std::size_t t = s.start + 1; t < s.end; ++t) y.set(t, false);
  }
  return y;
}

struct BoundarySet {
  std::vector<double> positions;
  std::vector<std::size_t> widths;

  std::size_t size() const noexcept { return positions.size(); }
};

struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct SegmentSet {
  std::vector<Interval> intervals;

  std::size_t size() const noexcept { return intervals.size(); }
};

namespace detail {
template <class F>
void for_each_run(const FrameLabels& y, std::uint8_t value, F&& f) {
  std::size_t t = 0;
  while (t < y.size()) {
    if (y[t] != value) {
      ++t;
      continue;
    }
    const std::size_t start = t;
    while (t < y.size() && y[t] == value) ++t;
    f(start, t - 1);
  }
}
}  // namespace detail

/// One boundary per maximal run of 1s, located at the run's mean frame index.
inline BoundarySet extract_boundaries(const FrameLabels& y) {
  BoundarySet out;
  detail::for_each_run(y, 1, [&](std::size_t a, std::size_t b) {
    out.positions.push_back(0.5 * static_cast<double>(a + b));
    out.widths.push_back(b - a + 1);
  });
  return out;
}

/// Maximal runs of 0s as closed intervals.
inline SegmentSet extract_segments(const FrameLabels& y) {
  SegmentSet out;
  detail::for_each_run(y, 0, [&](std::size_t a, std::size_t b) { out.intervals.push_back({a, b}); });
  return out;
}

/// Per-frame argmax over {interior, boundary}; ties decode as interior.
template <class S>
FrameLabels probs_to_labels(const Tensor2<S>& probs) {
  require_shape(probs.cols() == 2, "probs_to_labels: expected 2 columns, got " +
                                       std::to_string(probs.cols()));
  FrameLabels y(probs.rows());
  for (std::size_t t = 0; t < probs.rows(); ++t) y.set(t, probs(t, 1) > probs(t, 0));
  return y;
}

/// Interior runs of a label vector as segment annotations (used for
/// prediction files).
inline SegmentAnnotation labels_to_annotation(const FrameLabels& y, std::string video_id) {
  SegmentAnnotation ann;
  ann.video_id = std::move(video_id);
  ann.num_frames = y.size();
  for (const Interval& iv : extract_segments(y).intervals) ann.segments.push_back({iv.start, iv.end, {}});
  return ann;
}

}  // namespace signseg
