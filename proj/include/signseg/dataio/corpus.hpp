#pragma once

// On-disk corpus layout:
//   <dir>/annotations.jsonl
//   <dir>/features/<video_id>.sgf
//   <dir>/poses/<video_id>.sgf + <dir>/poses/schema.json   (optional)

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "signseg/dataio/annotations.hpp"
#include "signseg/dataio/features.hpp"
#include "signseg/dataio/pose.hpp"
#include "signseg/dataio/synth.hpp"

namespace signseg {

struct Corpus {
  std::vector<SegmentAnnotation> annotations;
  std::vector<FeatureSequence<float>> features;  // empty when not loaded
  std::vector<PoseSequence<float>> poses;        // empty when not loaded

  std::size_t size() const noexcept { return annotations.size(); }

  std::vector<FrameLabels> labels() const {
    std::vector<FrameLabels> out;
    out.reserve(annotations.size());
    for (const auto& a : annotations) out.push_back(build_frame_labels(a));
    return out;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& a : annotations) out.push_back(a.video_id);
    return out;
  }

  /// Videos [first, first + count).
  Corpus slice(std::size_t first, std::size_t count) const {
    Corpus c;
    const std::size_t last = std::min(annotations.size(), first + count);
    for (std::size_t i = first; i < last; ++i) {
      c.annotations.push_back(annotations[i]);
      if (!features.empty()) c.features.push_back(features[i]);
      if (!poses.empty()) c.poses.push_back(poses[i]);
    }
    return c;
  }
};

inline Corpus corpus_from_synth(std::vector<SynthVideo> videos) {
  Corpus c;
  for (auto& v : videos) {
    c.annotations.push_back(std::move(v.annotation));
    c.features.push_back(std::move(v.features));
    if (v.pose) c.poses.push_back(std::move(*v.pose));
  }
  return c;
}

namespace fs = std::filesystem;

inline void check_frames(const SegmentAnnotation& a, std::size_t rows, const std::string& path) {
  if (rows != a.num_frames) {
    throw AlignmentError(path + ": " + std::to_string(rows) + " frames, annotation '" +
                         a.video_id + "' declares " + std::to_string(a.num_frames));
  }
}

/// Loads features for `anns` from a features directory.
inline std::vector<FeatureSequence<float>> load_feature_dir(const std::string& dir,
                                                            const std::vector<SegmentAnnotation>& anns) {
  std::vector<FeatureSequence<float>> out;
  for (const auto& a : anns) {
    const std::string path = (fs::path(dir) / (a.video_id + ".sgf")).string();
    if (!fs::exists(path)) throw FormatError(path + ": missing feature file for '" + a.video_id + "'");
    out.push_back(read_features(path));
    check_frames(a, out.back().rows(), path);
    if (!out.empty() && out.back().cols() != out.front().cols()) {
      throw DimensionError(path + ": feature dimension " + std::to_string(out.back().cols()) +
                           " differs from " + std::to_string(out.front().cols()));
    }
  }
  return out;
}

inline Corpus load_corpus(const std::string& dir, bool with_features = true, bool with_poses = false) {
  Corpus c;
  c.annotations = read_annotations((fs::path(dir) / "annotations.jsonl").string());
  if (with_features) c.features = load_feature_dir((fs::path(dir) / "features").string(), c.annotations);
  if (with_poses) {
    const fs::path pdir = fs::path(dir) / "poses";
    const PoseSchema schema = read_pose_schema((pdir / "schema.json").string());
    for (const auto& a : c.annotations) {
      const std::string path = (pdir / (a.video_id + ".sgf")).string();
      if (!fs::exists(path)) throw FormatError(path + ": missing pose file for '" + a.video_id + "'");
      c.poses.push_back(read_pose(path, schema));
      check_frames(a, c.poses.back().frames(), path);
    }
  }
  return c;
}

inline void save_corpus(const std::string& dir, const Corpus& c) {
  fs::create_directories(fs::path(dir) / "features");
  write_annotations((fs::path(dir) / "annotations.jsonl").string(), c.annotations);
  for (std::size_t i = 0; i < c.features.size(); ++i)
    write_features((fs::path(dir) / "features" / (c.annotations[i].video_id + ".sgf")).string(),
                   c.features[i]);
  if (!c.poses.empty()) {
    fs::create_directories(fs::path(dir) / "poses");
    write_pose_schema((fs::path(dir) / "poses" / "schema.json").string(), c.poses.front().schema);
    for (std::size_t i = 0; i < c.poses.size(); ++i)
      write_features((fs::path(dir) / "poses" / (c.annotations[i].video_id + ".sgf")).string(),
                     c.poses[i].coords);
  }
}

}  // namespace signseg
