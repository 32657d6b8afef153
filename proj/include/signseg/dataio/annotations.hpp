#pragma once

// Annotation file: JSON lines, one object per video,
//   {"video_id": str, "num_frames": int, "signer": str (optional),
//    "segments": [{"start": int, "end": int, "gloss": str (optional)}]}
// with 0-based inclusive frame indices. Prediction files use the same
// object plus "labels": [0|1, ...] (one entry per frame); their segments are
// the predicted interior runs.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "signseg/errors.hpp"
#include "signseg/labeling.hpp"

namespace signseg {

inline nlohmann::ordered_json annotation_to_json(const SegmentAnnotation& a) {
  nlohmann::ordered_json j;
  j["video_id"] = a.video_id;
  j["num_frames"] = a.num_frames;
  if (a.signer) j["signer"] = *a.signer;
  j["segments"] = nlohmann::ordered_json::array();
  for (const Segment& s : a.segments) {
    nlohmann::ordered_json js;
    js["start"] = s.start;
    js["end"] = s.end;
    if (s.gloss) js["gloss"] = *s.gloss;
    j["segments"].push_back(std::move(js));
  }
  return j;
}

namespace detail {
inline std::size_t get_index(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw AnnotationError(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}
}  // namespace detail

inline SegmentAnnotation annotation_from_json(const nlohmann::json& j) {
  SegmentAnnotation a;
  a.video_id = j.at("video_id").get<std::string>();
  a.num_frames = detail::get_index(j, "num_frames");
  if (j.contains("signer") && !j["signer"].is_null()) a.signer = j["signer"].get<std::string>();
  for (const auto& js : j.at("segments")) {
    Segment s;
    s.start = detail::get_index(js, "start");
    s.end = detail::get_index(js, "end");
    if (js.contains("gloss") && !js["gloss"].is_null()) s.gloss = js["gloss"].get<std::string>();
    a.segments.push_back(std::move(s));
  }
  validate_annotation(a);
  return a;
}

/// Parses and validates every line; errors name the file and line number.
inline std::vector<SegmentAnnotation> parse_annotations(std::istream& in,
                                                        const std::string& source) {
  std::vector<SegmentAnnotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + "invalid JSON (" + e.what() + ")");
    }
    try {
      out.push_back(annotation_from_json(j));
    } catch (const AnnotationError& e) {
      throw AnnotationError(where + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + e.what());
    }
  }
  return out;
}

inline std::vector<SegmentAnnotation> read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open for reading");
  return parse_annotations(in, path);
}

inline void write_annotations(const std::string& path, const std::vector<SegmentAnnotation>& anns) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  for (const auto& a : anns) out << annotation_to_json(a).dump() << '\n';
  if (!out) throw FormatError(path + ": write failed");
}

inline nlohmann::ordered_json prediction_to_json(const std::string& video_id,
                                                 const FrameLabels& labels) {
  nlohmann::ordered_json j = annotation_to_json(labels_to_annotation(labels, video_id));
  j["labels"] = labels.values();
  return j;
}

inline void write_predictions(const std::string& path, const std::vector<std::string>& ids,
                              const std::vector<FrameLabels>& labels) {
  if (ids.size() != labels.size()) throw ArgumentError("write_predictions: arity mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  for (std::size_t i = 0; i < ids.size(); ++i) out << prediction_to_json(ids[i], labels[i]).dump() << '\n';
}

/// Reads the "labels" array of each line of a prediction file.
inline std::vector<FrameLabels> read_prediction_labels(const std::string& path,
                                                       std::vector<std::string>* ids = nullptr) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open for reading");
  std::vector<FrameLabels> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto v = j.at("labels").get<std::vector<int>>();
      if (v.size() != j.at("num_frames").get<std::size_t>()) {
        throw FormatError("labels length does not match num_frames");
      }
      std::vector<std::uint8_t> raw;
      for (int x : v) {
        if (x != 0 && x != 1) throw FormatError("labels must be 0 or 1");
        raw.push_back(static_cast<std::uint8_t>(x));
      }
      out.emplace_back(std::move(raw));
      if (ids) ids->push_back(j.at("video_id").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace signseg
