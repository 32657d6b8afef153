#pragma once

// Feature file: char[4] "SGF1", u32 T, u32 D, then T*D float32 values
// row-major, all little-endian. Total length is 12 + 4*T*D bytes.

#include <cstdint>
#include <string>

#include "signseg/binary_io.hpp"
#include "signseg/numerics/tensor.hpp"

namespace signseg {

inline constexpr std::size_t kFeatureHeaderBytes = 12;

inline std::size_t feature_file_size(std::size_t T, std::size_t D) {
  return kFeatureHeaderBytes + 4 * T * D;
}

template <class S>
io::ByteWriter encode_features(const FeatureSequence<S>& f) {
  if (f.rows() == 0 || f.cols() == 0) {
    throw DimensionError("write_features: empty matrix " + f.shape_string());
  }
  io::ByteWriter w;
  w.put_bytes("SGF1", 4);
  w.put(static_cast<std::uint32_t>(f.rows()));
  w.put(static_cast<std::uint32_t>(f.cols()));
  if constexpr (std::is_same_v<S, float>) {
    w.put_bytes(f.data(), f.size() * sizeof(float));
  } else {
    for (S v : f.values()) w.put(static_cast<float>(v));
  }
  return w;
}

template <class S>
void write_features(const std::string& path, const FeatureSequence<S>& f) {
  encode_features(f).write_file(path);
}

inline FeatureSequence<float> decode_features(io::ByteReader& r) {
  r.expect_magic("SGF1");
  const auto T = r.get<std::uint32_t>("frame count");
  const auto D = r.get<std::uint32_t>("feature dimension");
  if (T == 0 || D == 0) r.fail(4, "frame count and dimension must be positive");
  const std::size_t expected = feature_file_size(T, D);
  if (r.size() != expected) {
    r.fail(r.size() < expected ? r.size() : expected,
           "expected " + std::to_string(expected) + " bytes for " + std::to_string(T) + "x" +
               std::to_string(D) + ", file has " + std::to_string(r.size()));
  }
  FeatureSequence<float> f(T, D);
  r.get_bytes(f.data(), f.size() * sizeof(float), "feature values");
  return f;
}

inline FeatureSequence<float> read_features(const std::string& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  return decode_features(r);
}

}  // namespace signseg
