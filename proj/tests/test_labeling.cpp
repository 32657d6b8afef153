#include <gtest/gtest.h>

#include "oracles.hpp"
#include "signseg/labeling.hpp"

namespace signseg {
namespace {

SegmentAnnotation ann(std::size_t T, std::vector<std::pair<std::size_t, std::size_t>> segs) {
  SegmentAnnotation a;
  a.video_id = "v";
  a.num_frames = T;
  for (auto [s, e] : segs) a.segments.push_back({s, e, {}});
  return a;
}

TEST(BuildFrameLabels, WorkedExamples) {
  EXPECT_EQ(build_frame_labels(ann(10, {{0, 3}, {4, 7}})), (FrameLabels{1, 0, 0, 1, 1, 0, 0, 1, 1, 1}));
  EXPECT_EQ(build_frame_labels(ann(4, {{0, 3}})), (FrameLabels{1, 0, 0, 1}));
  EXPECT_EQ(build_frame_labels(ann(8, {{0, 2}, {5, 7}})), (FrameLabels{1, 0, 1, 1, 1, 1, 0, 1}));
}

TEST(BuildFrameLabels, ClipEdgesAreBoundary) {
  EXPECT_EQ(build_frame_labels(ann(8, {{2, 5}})), (FrameLabels{1, 1, 1, 0, 0, 1, 1, 1}));
}

TEST(BuildFrameLabels, InvalidAnnotationsRejected) {
  EXPECT_THROW(build_frame_labels(ann(8, {{0, 4}, {4, 7}})), AnnotationError);  // overlap
  EXPECT_THROW(build_frame_labels(ann(8, {{0, 8}})), AnnotationError);          // end >= T
  EXPECT_THROW(build_frame_labels(ann(8, {{3, 2}})), AnnotationError);          // start > end
  EXPECT_THROW(build_frame_labels(ann(8, {{4, 5}, {0, 2}})), AnnotationError);  // unsorted
  EXPECT_THROW(build_frame_labels(ann(0, {})), AnnotationError);
}

TEST(ExtractBoundaries, RunMeansAndWidths) {
  const auto b = extract_boundaries(FrameLabels{0, 1, 1, 0, 0, 1});
  EXPECT_EQ(b.positions, (std::vector<double>{1.5, 5.0}));
  EXPECT_EQ(b.widths, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(extract_boundaries(FrameLabels(6, 0)).size(), 0u);
  const auto all = extract_boundaries(FrameLabels(6, 1));
  EXPECT_EQ(all.positions, (std::vector<double>{2.5}));
}

TEST(ExtractSegments, InteriorRuns) {
  const auto s = extract_segments(FrameLabels{1, 0, 0, 1, 1, 0, 0, 1});
  EXPECT_EQ(s.intervals, (std::vector<Interval>{{1, 2}, {5, 6}}));
  EXPECT_EQ(extract_segments(FrameLabels(5, 1)).size(), 0u);
  EXPECT_EQ(extract_segments(FrameLabels(5, 0)).intervals, (std::vector<Interval>{{0, 4}}));
}

TEST(ProbsToLabels, ArgmaxWithInteriorTieBreak) {
  const Tensor2<double> p(3, 2, {0.9, 0.1, 0.1, 0.9, 0.5, 0.5});
  EXPECT_EQ(probs_to_labels(p), (FrameLabels{0, 1, 0}));
  EXPECT_THROW(probs_to_labels(Tensor2<double>(2, 3)), DimensionError);
}

TEST(LabelsToAnnotation, InteriorRunsBecomeSegments) {
  const auto a = labels_to_annotation(FrameLabels{1, 0, 0, 1, 0, 1}, "x");
  EXPECT_EQ(a.video_id, "x");
  EXPECT_EQ(a.num_frames, 6u);
  ASSERT_EQ(a.segments.size(), 2u);
  EXPECT_EQ(a.segments[1].start, 4u);
  EXPECT_EQ(a.segments[1].end, 4u);
}

TEST(LabelRoundTrip, RandomAnnotationsSatisfyRunInvariants) {
  Rng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    const SegmentAnnotation a = testing::random_annotation(rng);
    const FrameLabels y = build_frame_labels(a);
    ASSERT_EQ(y, testing::naive_labels(a));

    std::vector<Interval> expect;
    std::size_t short_signs = 0;
    for (const Segment& s : a.segments) {
      if (s.length() >= 3) {
        expect.push_back({s.start + 1, s.end - 1});
      } else {
        ++short_signs;
      }
    }
    EXPECT_EQ(extract_segments(y).intervals, expect);
    // Each sign closes one run of 1s; a sign too short to have an interior
    // merges the runs on either side.
    EXPECT_EQ(extract_boundaries(y).size(), a.segments.size() + 1 - short_signs);
  }
}

TEST(LabelRoundTrip, ZeroGapSignsMergeIntoOneRun) {
  const auto b = extract_boundaries(build_frame_labels(ann(12, {{0, 5}, {6, 11}})));
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b.widths[1], 2u);
  EXPECT_EQ(b.positions[1], 5.5);
}

TEST(LabelRoundTrip, BoundaryPositionsShiftWithPrependedInterior) {
  const FrameLabels y{1, 0, 0, 1, 1, 0, 0, 1};
  std::vector<std::uint8_t> padded(3, 0);
  padded.insert(padded.end(), y.begin(), y.end());
  padded.insert(padded.end(), 2, 0);
  const auto a = extract_boundaries(y), b = extract_boundaries(FrameLabels(padded));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b.positions[i], a.positions[i] + 3.0);
}

}  // namespace
}  // namespace signseg
