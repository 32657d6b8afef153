#pragma once

// 3D pose sequences. On disk a pose sequence is a feature file with
// D = 3J (x, y, z per joint, joints in schema order) and a sidecar JSON
// schema {"joints": [names], "parents": [index or -1]}.

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "signseg/dataio/features.hpp"
#include "signseg/errors.hpp"

namespace signseg {

struct PoseSchema {
  std::vector<std::string> joints;
  std::vector<int> parents;  // limb graph; -1 for a root

  std::size_t size() const noexcept { return joints.size(); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < joints.size(); ++i)
      if (joints[i] == name) return i;
    throw ArgumentError("pose schema has no joint '" + name + "'");
  }

  void validate() const {
    if (joints.size() < 3) throw ArgumentError("pose schema: need at least 3 joints");
    if (parents.size() != joints.size()) throw ArgumentError("pose schema: parents/joints mismatch");
    for (int p : parents)
      if (p < -1 || p >= static_cast<int>(joints.size()))
        throw ArgumentError("pose schema: parent index out of range");
  }

  friend bool operator==(const PoseSchema&, const PoseSchema&) = default;
};

/// Upper-body joint set used by the synthetic generator and the default
/// geometric feature selection.
inline PoseSchema upper_body_schema() {
  return {{"nose", "neck", "right_shoulder", "right_elbow", "right_wrist", "left_shoulder",
           "left_elbow", "left_wrist"},
          {1, -1, 1, 2, 3, 1, 5, 6}};
}

template <class S>
struct PoseSequence {
  Tensor2<S> coords;  // T x 3J
  PoseSchema schema;

  std::size_t frames() const noexcept { return coords.rows(); }
  std::array<double, 3> joint(std::size_t t, std::size_t j) const {
    return {static_cast<double>(coords(t, 3 * j)), static_cast<double>(coords(t, 3 * j + 1)),
            static_cast<double>(coords(t, 3 * j + 2))};
  }

  void validate() const {
    schema.validate();
    require_shape(coords.cols() == 3 * schema.size(),
                  "pose: " + std::to_string(coords.cols()) + " columns for " +
                      std::to_string(schema.size()) + " joints");
    if (!coords.all_finite()) throw ArgumentError("pose: non-finite coordinates");
  }
};

inline nlohmann::ordered_json to_json(const PoseSchema& s) {
  return {{"joints", s.joints}, {"parents", s.parents}};
}

inline void write_pose_schema(const std::string& path, const PoseSchema& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << to_json(s).dump(2) << '\n';
}

inline PoseSchema read_pose_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open for reading");
  try {
    const auto j = nlohmann::json::parse(in);
    PoseSchema s{j.at("joints").get<std::vector<std::string>>(),
                 j.at("parents").get<std::vector<int>>()};
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline PoseSequence<float> read_pose(const std::string& path, const PoseSchema& schema) {
  PoseSequence<float> p{read_features(path), schema};
  if (p.coords.cols() != 3 * schema.size()) {
    throw FormatError(path + ": pose file has " + std::to_string(p.coords.cols()) +
                      " columns, schema needs " + std::to_string(3 * schema.size()));
  }
  return p;
}

}  // namespace signseg
