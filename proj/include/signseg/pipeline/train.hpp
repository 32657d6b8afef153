#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "signseg/baselines/geometric.hpp"
#include "signseg/checkpoint.hpp"
#include "signseg/dataio/corpus.hpp"
#include "signseg/labeling.hpp"
#include "signseg/losses.hpp"
#include "signseg/metrics.hpp"
#include "signseg/pipeline/config.hpp"
#include "signseg/segmodel.hpp"

namespace signseg {

/// Model inputs and targets for a list of videos.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<FeatureSequence<float>> x;
  std::vector<FrameLabels> y;
  std::vector<SegmentAnnotation> annotations;

  std::size_t size() const noexcept { return x.size(); }
  std::size_t width() const { return x.empty() ? 0 : x.front().cols(); }

  Dataset first(std::size_t n) const {
    Dataset d;
    n = std::min(n, size());
    d.ids.assign(ids.begin(), ids.begin() + n);
    d.x.assign(x.begin(), x.begin() + n);
    d.y.assign(y.begin(), y.begin() + n);
    d.annotations.assign(annotations.begin(), annotations.begin() + n);
    return d;
  }
};

inline FeatureSequence<float> geometric_input(const PoseSequence<float>& pose) {
  return geometric_features(pose, default_geom_config()).features;
}

inline Dataset dataset_from(const Corpus& c, InputKind input = InputKind::kFeatures) {
  Dataset d;
  d.ids = c.ids();
  d.y = c.labels();
  d.annotations = c.annotations;
  if (input == InputKind::kFeatures) {
    if (c.features.size() != c.size()) throw ArgumentError("dataset: corpus has no features loaded");
    d.x = c.features;
  } else {
    if (c.poses.size() != c.size()) {
      throw ArgumentError("dataset: geometric input needs pose files (<corpus>/poses/)");
    }
    for (const auto& p : c.poses) d.x.push_back(geometric_input(p));
  }
  return d;
}

inline Dataset load_dataset(const std::string& dir, InputKind input = InputKind::kFeatures) {
  return dataset_from(load_corpus(dir, input == InputKind::kFeatures, input == InputKind::kGeometric),
                      input);
}

/// Number of training videos used for fraction f: ceil(n f), at least 1.
inline std::size_t fraction_count(std::size_t n, double f) {
  const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * f - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

// ---------------------------------------------------------------------------

template <class S>
FrameLabels predict_labels(const ModelParams<S>& params, const FeatureSequence<S>& x) {
  return probs_to_labels(mstcn_forward(x, params).final_probabilities());
}

template <class S>
std::vector<FrameLabels> predict_all(const ModelParams<S>& params, const Dataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.x[i].cols() != params.config.input_dim) {
      throw DimensionError("evaluate: model expects input_dim " +
                           std::to_string(params.config.input_dim) + ", video '" + data.ids[i] +
                           "' has " + std::to_string(data.x[i].cols()));
    }
  }
  std::vector<FrameLabels> out;
  out.reserve(data.size());
  for (const auto& x : data.x) out.push_back(predict_labels(params, x));
  return out;
}

inline EvalReport evaluate(const ModelParams<float>& params, const Dataset& data,
                           const std::string& config_hash = {}) {
  EvalReport r = evaluate_labels(predict_all(params, data), data.y);
  r.config_hash = config_hash;
  return r;
}

inline EvalReport evaluate(const std::string& checkpoint, const Dataset& data) {
  CheckpointHeader h;
  const ModelParams<float> params = read_checkpoint<float>(checkpoint, &h);
  return evaluate(params, data, hash_hex(h.config_hash));
}

/// Mean |predicted - true| number of interior runs per video.
inline double segment_count_mae(const std::vector<FrameLabels>& preds, const std::vector<FrameLabels>& gts) {
  if (preds.size() != gts.size() || preds.empty()) throw ArgumentError("segment_count_mae: arity mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    acc += std::abs(static_cast<double>(extract_segments(preds[i]).size()) -
                    static_cast<double>(extract_segments(gts[i]).size()));
  }
  return acc / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------

struct RunRecord {
  std::uint64_t seed = 0;
  std::size_t train_videos = 0;
  std::vector<double> train_loss;  // mean per-video loss, one entry per epoch
  std::vector<double> val_mF1B;
  std::vector<double> val_mF1S;
  std::size_t best_epoch = 0;  // 1-based
  double wall_seconds = 0.0;
  std::string checkpoint_path;
  std::string config_hash;
  ModelParams<float> best;

  std::size_t epochs() const noexcept { return train_loss.size(); }
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mF1B = 0.0;
  double val_mF1S = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains one model. Videos are visited in a freshly shuffled order each
/// epoch with one Adam step per video; the epoch with the best validation
/// mF1B (earliest on ties) is kept and, if `checkpoint_path` is set, written
/// there. With an empty validation set the training videos are used for
/// model selection.
inline RunRecord train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                       std::uint64_t seed, const std::string& checkpoint_path = {},
                       const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.size() == 0) throw TrainingError("train: empty training set");
  const auto t0 = std::chrono::steady_clock::now();

  ModelConfig mc = cfg.model;
  const auto width = static_cast<std::uint32_t>(train_set.width());
  if (mc.input_dim == 0) mc.input_dim = width;
  if (mc.input_dim != width) {
    throw DimensionError("train: config input_dim " + std::to_string(mc.input_dim) +
                         " but features have " + std::to_string(width) + " dimensions");
  }
  TrainConfig resolved = cfg;
  resolved.model = mc;
  const std::uint64_t hash = run_hash(resolved, seed);

  RunRecord rec;
  rec.seed = seed;
  rec.config_hash = hash_hex(hash);
  rec.train_videos = fraction_count(train_set.size(), cfg.train_fraction);
  const Dataset used = train_set.first(rec.train_videos);
  const Dataset& val = val_set.size() > 0 ? val_set : used;

  ModelParams<float> params = init_params<float>(mc, derive_seed(seed, 0x1417));
  std::vector<Parameter<float>*> plist = params.all();
  Rng order_rng(derive_seed(seed, 0x0dde));
  Rng dropout_rng(derive_seed(seed, 0xd120));
  std::vector<std::size_t> order(used.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_score = -1.0;

  AdamConfig adam = cfg.adam;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    adam.learning_rate = cfg.adam.learning_rate * lr_factor(cfg.lr_schedule, epoch, cfg.epochs);
    order_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t i : order) {
      Tape<float> tape;
      const StageNodes nodes =
          ad::mstcn_forward(tape, tape.constant_ref(used.x[i]), params, {true, &dropout_rng});
      const Var loss = ad::total_loss(tape, nodes, used.y[i], cfg.loss);
      const double value = tape.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " on video '" +
                           used.ids[i] + "' (seed " + std::to_string(seed) + ", learning rate " +
                           std::to_string(cfg.adam.learning_rate) + ")");
      }
      tape.backward(loss);
      adam_step(plist, adam);
      loss_sum += value;
    }
    const EvalReport vr = evaluate(params, val);
    rec.train_loss.push_back(loss_sum / static_cast<double>(used.size()));
    rec.val_mF1B.push_back(vr.mF1B);
    rec.val_mF1S.push_back(vr.mF1S);
    if (vr.mF1B > best_score) {
      best_score = vr.mF1B;
      rec.best_epoch = epoch;
      rec.best = params;
    }
    if (on_epoch) on_epoch({epoch, rec.train_loss.back(), vr.mF1B, vr.mF1S});
  }

  if (!checkpoint_path.empty()) {
    write_checkpoint(checkpoint_path, rec.best, hash);
    rec.checkpoint_path = checkpoint_path;
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["schema"] = "signseg.run_record";
  j["version"] = 1;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["train_videos"] = r.train_videos;
  j["epochs"] = r.epochs();
  j["best_epoch"] = r.best_epoch;
  j["train_loss"] = r.train_loss;
  j["val_mF1B"] = r.val_mF1B;
  j["val_mF1S"] = r.val_mF1S;
  j["checkpoint"] = r.checkpoint_path;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace signseg
