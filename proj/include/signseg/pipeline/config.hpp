#pragma once

// Key-value config files:
//
//   # comment (a '#' anywhere starts a comment)
//   key = value
//
// Blank lines are ignored, keys are unique, every key must be known to the
// reader that consumes the file. Lists are comma separated ("0, 1, 2").
// Booleans are true/false/1/0.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "signseg/baselines/forest.hpp"
#include "signseg/dataio/synth.hpp"
#include "signseg/errors.hpp"
#include "signseg/losses.hpp"
#include "signseg/numerics/adam.hpp"
#include "signseg/segmodel.hpp"

namespace signseg {

class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source) {
    KeyValues kv;
    kv.source_ = source;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
      if (kv.entries_.count(key)) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                          "' (first set on line " + std::to_string(kv.entries_[key].line) + ")");
      }
      kv.entries_[key] = {trim(line.substr(eq + 1)), lineno, false};
    }
    return kv;
  }

  static KeyValues parse(const std::string& text, const std::string& source = "<string>") {
    std::istringstream in(text);
    return parse(in, source);
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    return parse(in, path);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  void get(const std::string& key, std::string& out) {
    if (Entry* e = take(key)) out = e->value;
  }
  void get(const std::string& key, bool& out) {
    Entry* e = take(key);
    if (!e) return;
    if (e->value == "true" || e->value == "1") {
      out = true;
    } else if (e->value == "false" || e->value == "0") {
      out = false;
    } else {
      bad(key, *e, "a boolean");
    }
  }
  void get(const std::string& key, double& out) {
    if (Entry* e = take(key)) out = parse_double(key, *e, e->value);
  }
  template <class I>
    requires std::is_integral_v<I>
  void get(const std::string& key, I& out) {
    if (Entry* e = take(key)) out = parse_int<I>(key, *e, e->value);
  }
  void get(const std::string& key, std::vector<std::uint64_t>& out) {
    Entry* e = take(key);
    if (!e) return;
    out.clear();
    for (const std::string& item : split_list(e->value)) out.push_back(parse_int<std::uint64_t>(key, *e, item));
    if (out.empty()) bad(key, *e, "a non-empty list");
  }

  /// Throws on the first key nothing consumed.
  void finish() const {
    for (const auto& [key, e] : entries_) {
      if (!e.used) {
        throw ConfigError(source_ + ":" + std::to_string(e.line) + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    bool used = false;
  };

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  Entry* take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  [[noreturn]] void bad(const std::string& key, const Entry& e, const char* want) const {
    throw ConfigError(source_ + ":" + std::to_string(e.line) + ": '" + key + "' must be " + want +
                      ", got '" + e.value + "'");
  }

  double parse_double(const std::string& key, const Entry& e, const std::string& s) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    bad(key, e, "a number");
  }

  template <class I>
  I parse_int(const std::string& key, const Entry& e, const std::string& s) const {
    I v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) bad(key, e, "an integer");
    return v;
  }

  std::map<std::string, Entry> entries_;
  std::string source_;
};

// ---------------------------------------------------------------------------

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

enum class InputKind { kFeatures, kGeometric };

/// Per-epoch learning-rate multiplier: constant, or cosine decay from 1 at
/// the first epoch towards 0 after the last.
enum class LrSchedule { kConstant, kCosine };

inline const char* lr_schedule_name(LrSchedule s) { return s == LrSchedule::kConstant ? "constant" : "cosine"; }

inline double lr_factor(LrSchedule s, std::size_t epoch, std::size_t epochs) {
  if (s == LrSchedule::kConstant) return 1.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch - 1) / static_cast<double>(epochs)));
}

inline const char* input_kind_name(InputKind k) {
  return k == InputKind::kFeatures ? "features" : "geometric";
}

struct TrainConfig {
  ModelConfig model;  // input_dim 0 = taken from the data
  LossConfig loss;
  AdamConfig adam;
  std::size_t epochs = 50;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  double train_fraction = 1.0;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  InputKind input = InputKind::kFeatures;

  // Random-forest baseline.
  ForestConfig forest;
  std::size_t window = 9;

  // Paths; not part of the config hash.
  std::string train_dir, val_dir, test_dir;
  std::string output_dir;
  std::string checkpoint_dir;  // defaults to the run's output directory

  void validate() const {
    ModelConfig m = model;
    if (m.input_dim == 0) m.input_dim = 1;
    m.validate();
    loss.validate();
    adam.validate();
    forest.validate();
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
      throw ConfigError("train: train_fraction must be in (0, 1]");
    }
    if (seeds.empty()) throw ConfigError("train: at least one seed is required");
    if (window < 1 || window % 2 == 0) throw ConfigError("train: window must be odd and >= 1");
  }
};

/// Every setting that changes results, one "key=value" per line in a fixed
/// order. Paths are excluded so a run can be relocated without changing its
/// hash.
inline std::string canonical_config(const TrainConfig& c) {
  std::ostringstream s;
  s.precision(17);
  const ModelConfig& m = c.model;
  s << "num_stages=" << m.num_stages << "\nlayers_per_stage=" << m.layers_per_stage
    << "\nfeature_maps=" << m.feature_maps << "\nkernel_size=" << m.kernel_size
    << "\ninput_dim=" << m.input_dim << "\nse_enabled=" << m.se_enabled
    << "\nse_reduction=" << m.se_reduction << "\ndropout=" << m.dropout_rate
    << "\nlambda=" << c.loss.lambda_smooth << "\ntau=" << c.loss.tau
    << "\nlearning_rate=" << c.adam.learning_rate << "\nbeta1=" << c.adam.beta1
    << "\nbeta2=" << c.adam.beta2 << "\nepsilon=" << c.adam.epsilon << "\nepochs=" << c.epochs << "\nlr_schedule=" << lr_schedule_name(c.lr_schedule)
    << "\ntrain_fraction=" << c.train_fraction << "\ninput=" << input_kind_name(c.input)
    << "\nforest_trees=" << c.forest.trees << "\nforest_max_depth=" << c.forest.max_depth
    << "\nforest_min_leaf=" << c.forest.min_samples_leaf
    << "\nforest_features_per_split=" << c.forest.features_per_split
    << "\nwindow=" << c.window << "\nseeds=";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) s << (i ? "," : "") << c.seeds[i];
  s << '\n';
  return s.str();
}

/// Hash of one (config, seed) run.
inline std::uint64_t run_hash(const TrainConfig& c, std::uint64_t seed) {
  return fnv1a64(canonical_config(c) + "run_seed=" + std::to_string(seed) + "\n");
}

inline TrainConfig train_config_from(KeyValues& kv, bool finish = true) {
  TrainConfig c;
  ModelConfig& m = c.model;
  kv.get("num_stages", m.num_stages);
  kv.get("layers_per_stage", m.layers_per_stage);
  kv.get("feature_maps", m.feature_maps);
  kv.get("kernel_size", m.kernel_size);
  kv.get("input_dim", m.input_dim);
  kv.get("se_enabled", m.se_enabled);
  kv.get("se_reduction", m.se_reduction);
  kv.get("dropout", m.dropout_rate);
  kv.get("lambda", c.loss.lambda_smooth);
  kv.get("tau", c.loss.tau);
  kv.get("learning_rate", c.adam.learning_rate);
  kv.get("beta1", c.adam.beta1);
  kv.get("beta2", c.adam.beta2);
  kv.get("epsilon", c.adam.epsilon);
  kv.get("epochs", c.epochs);
  std::string schedule = lr_schedule_name(c.lr_schedule);
  kv.get("lr_schedule", schedule);
  if (schedule == "constant") {
    c.lr_schedule = LrSchedule::kConstant;
  } else if (schedule == "cosine") {
    c.lr_schedule = LrSchedule::kCosine;
  } else {
    throw ConfigError("lr_schedule must be 'constant' or 'cosine', got '" + schedule + "'");
  }
  kv.get("train_fraction", c.train_fraction);
  kv.get("seeds", c.seeds);
  std::string input = input_kind_name(c.input);
  kv.get("input", input);
  if (input == "features") {
    c.input = InputKind::kFeatures;
  } else if (input == "geometric") {
    c.input = InputKind::kGeometric;
  } else {
    throw ConfigError("input must be 'features' or 'geometric', got '" + input + "'");
  }
  kv.get("forest_trees", c.forest.trees);
  kv.get("forest_max_depth", c.forest.max_depth);
  kv.get("forest_min_leaf", c.forest.min_samples_leaf);
  kv.get("forest_features_per_split", c.forest.features_per_split);
  kv.get("window", c.window);
  kv.get("train_dir", c.train_dir);
  kv.get("val_dir", c.val_dir);
  kv.get("test_dir", c.test_dir);
  kv.get("output_dir", c.output_dir);
  kv.get("checkpoint_dir", c.checkpoint_dir);
  if (finish) kv.finish();
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  KeyValues kv = KeyValues::load(path);
  return train_config_from(kv);
}

/// Synthetic corpus settings plus an optional "split = train, val, test"
/// video count list; with a split, `videos` is ignored.
struct SynthJob {
  SynthConfig synth;
  std::vector<std::uint64_t> split;
};

inline SynthJob synth_job_from(KeyValues& kv) {
  SynthJob j;
  SynthConfig& s = j.synth;
  kv.get("videos", s.videos);
  kv.get("min_signs", s.min_signs);
  kv.get("max_signs", s.max_signs);
  kv.get("sign_length_mean", s.sign_length_mean);
  kv.get("sign_length_std", s.sign_length_std);
  kv.get("min_sign_length", s.min_sign_length);
  kv.get("gap_probability", s.gap_probability);
  kv.get("gap_min", s.gap_min);
  kv.get("gap_max", s.gap_max);
  kv.get("feature_dim", s.feature_dim);
  kv.get("noise_std", s.noise_std);
  kv.get("transition_width", s.transition_width);
  kv.get("vocabulary", s.vocabulary);
  kv.get("signers", s.signers);
  kv.get("poses", s.poses);
  kv.get("pose_noise_std", s.pose_noise_std);
  kv.get("seed", s.seed);
  kv.get("split", j.split);
  kv.finish();
  if (!j.split.empty()) {
    if (j.split.size() != 3) throw ConfigError("synth: split must list train, val, test counts");
    s.videos = j.split[0] + j.split[1] + j.split[2];
  }
  if (s.videos < 1) throw ConfigError("synth: videos must be >= 1");
  s.validate();
  return j;
}

}  // namespace signseg
