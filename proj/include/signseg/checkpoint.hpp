#pragma once

// Model checkpoint, little-endian:
//
//   char[4]  magic "SGSG"
//   u32      format version (1)
//   u64      config hash (provenance of the run that produced it)
//   u32      scalar width in bytes (4 = float32, 8 = float64)
//   u32 x6   num_stages, layers_per_stage, feature_maps, kernel_size,
//            num_classes, input_dim
//   u8       se_enabled
//   u32      se_reduction
//   f64      dropout_rate
//   u32      parameter count P
//   P times: u32 name length, name bytes, u32 ndim, u32 dims[ndim],
//            prod(dims) scalars row-major
//
// Parameters appear in ModelParams::all() order.

#include <cstdint>
#include <string>

#include "signseg/binary_io.hpp"
#include "signseg/segmodel.hpp"

namespace signseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::uint32_t scalar_bytes = 4;
  ModelConfig config;
};

template <class S>
io::ByteWriter encode_checkpoint(const ModelParams<S>& params, std::uint64_t config_hash) {
  io::ByteWriter w;
  w.put_bytes("SGSG", 4);
  w.put(kCheckpointVersion);
  w.put(config_hash);
  w.put(static_cast<std::uint32_t>(sizeof(S)));
  const ModelConfig& c = params.config;
  for (std::uint32_t v : {c.num_stages, c.layers_per_stage, c.feature_maps, c.kernel_size,
                          c.num_classes, c.input_dim})
    w.put(v);
  w.put(static_cast<std::uint8_t>(c.se_enabled ? 1 : 0));
  w.put(c.se_reduction);
  w.put(c.dropout_rate);
  const auto ps = params.all();
  w.put(static_cast<std::uint32_t>(ps.size()));
  for (const Parameter<S>* p : ps) {
    w.put_string(p->name);
    w.put(static_cast<std::uint32_t>(p->shape.size()));
    for (std::uint32_t d : p->shape) w.put(d);
    w.put_bytes(p->value.data(), p->value.size() * sizeof(S));
  }
  return w;
}

template <class S>
void write_checkpoint(const std::string& path, const ModelParams<S>& params,
                      std::uint64_t config_hash) {
  encode_checkpoint(params, config_hash).write_file(path);
}

inline CheckpointHeader read_checkpoint_header(io::ByteReader& r) {
  r.expect_magic("SGSG");
  CheckpointHeader h;
  const std::size_t at = r.offset();
  h.version = r.get<std::uint32_t>("version");
  if (h.version != kCheckpointVersion) {
    r.fail(at, "unsupported checkpoint version " + std::to_string(h.version));
  }
  h.config_hash = r.get<std::uint64_t>("config hash");
  const std::size_t width_at = r.offset();
  h.scalar_bytes = r.get<std::uint32_t>("scalar width");
  if (h.scalar_bytes != 4 && h.scalar_bytes != 8) {
    r.fail(width_at, "scalar width must be 4 or 8, got " + std::to_string(h.scalar_bytes));
  }
  ModelConfig& c = h.config;
  c.num_stages = r.get<std::uint32_t>("num_stages");
  c.layers_per_stage = r.get<std::uint32_t>("layers_per_stage");
  c.feature_maps = r.get<std::uint32_t>("feature_maps");
  c.kernel_size = r.get<std::uint32_t>("kernel_size");
  c.num_classes = r.get<std::uint32_t>("num_classes");
  c.input_dim = r.get<std::uint32_t>("input_dim");
  c.se_enabled = r.get<std::uint8_t>("se_enabled") != 0;
  c.se_reduction = r.get<std::uint32_t>("se_reduction");
  const std::size_t cfg_end = r.offset();
  c.dropout_rate = r.get<double>("dropout_rate");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    r.fail(cfg_end, std::string("invalid model config: ") + e.what());
  }
  return h;
}

inline CheckpointHeader read_checkpoint_header(const std::string& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  return read_checkpoint_header(r);
}

namespace detail {
template <class Stored, class S>
void read_values(io::ByteReader& r, Tensor2<S>& dst) {
  if constexpr (std::is_same_v<Stored, S>) {
    r.get_bytes(dst.data(), dst.size() * sizeof(S), "parameter values");
  } else {
    for (S& v : dst.values()) v = static_cast<S>(r.get<Stored>("parameter values"));
  }
}
}  // namespace detail

/// Loads a checkpoint into precision S (values are converted if the file was
/// written at the other width). Names and shapes must match the config.
template <class S>
ModelParams<S> decode_checkpoint(io::ByteReader& r, CheckpointHeader* header_out = nullptr) {
  const CheckpointHeader h = read_checkpoint_header(r);
  ModelParams<S> m = allocate_params<S>(h.config);
  auto ps = m.all();
  const std::size_t count_at = r.offset();
  const auto count = r.get<std::uint32_t>("parameter count");
  if (count != ps.size()) {
    r.fail(count_at, "parameter count " + std::to_string(count) + " does not match config (" +
                         std::to_string(ps.size()) + ")");
  }
  for (Parameter<S>* p : ps) {
    const std::size_t at = r.offset();
    const std::string name = r.get_string("parameter name");
    if (name != p->name) r.fail(at, "expected parameter '" + p->name + "', found '" + name + "'");
    const auto ndim = r.get<std::uint32_t>("ndim");
    std::vector<std::uint32_t> dims(ndim);
    for (auto& d : dims) d = r.get<std::uint32_t>("dims");
    if (dims != p->shape) r.fail(at, "shape mismatch for parameter '" + name + "'");
    if (h.scalar_bytes == 4) {
      detail::read_values<float>(r, p->value);
    } else {
      detail::read_values<double>(r, p->value);
    }
  }
  r.expect_end();
  if (header_out) *header_out = h;
  return m;
}

template <class S>
ModelParams<S> read_checkpoint(const std::string& path, CheckpointHeader* header_out = nullptr) {
  io::ByteReader r = io::ByteReader::from_file(path);
  return decode_checkpoint<S>(r, header_out);
}

}  // namespace signseg
