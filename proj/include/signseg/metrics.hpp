#pragma once

// Boundary F1 over frame-distance thresholds (mF1B), segment F1 over IoU
// thresholds (mF1S), mean boundary width and multi-seed aggregation.
//
// Correctness of a prediction is decided by a maximum-cardinality one-to-one
// matching between predicted and ground-truth events (augmenting paths), so
// results do not depend on event order. Counts are summed over videos before
// precision/recall are formed. Both choices are exposed in MetricOptions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "signseg/errors.hpp"
#include "signseg/labeling.hpp"

namespace signseg {

inline constexpr std::array<int, 4> kBoundaryThresholds{1, 2, 3, 4};
// IoU thresholds 0.40, 0.45, ..., 0.75 in hundredths.
inline constexpr std::array<int, 8> kSegmentIouPercent{40, 45, 50, 55, 60, 65, 70, 75};

struct MatchCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

enum class ThresholdRule { kClosed, kStrict };
enum class Aggregation { kMicro, kMacro };

struct MetricOptions {
  ThresholdRule boundary_rule = ThresholdRule::kClosed;  // |d| <= t
  ThresholdRule segment_rule = ThresholdRule::kClosed;   // IoU >= thr
  Aggregation aggregation = Aggregation::kMicro;
};

/// Size of a maximum matching in the bipartite graph given by `edge(i, j)`,
/// via Kuhn's augmenting-path algorithm.
inline std::size_t max_bipartite_matching(std::size_t n_left, std::size_t n_right,
                                          const std::function<bool(std::size_t, std::size_t)>& edge) {
  std::vector<std::vector<std::size_t>> adj(n_left);
  for (std::size_t i = 0; i < n_left; ++i)
    for (std::size_t j = 0; j < n_right; ++j)
      if (edge(i, j)) adj[i].push_back(j);
  constexpr std::size_t kFree = static_cast<std::size_t>(-1);
  std::vector<std::size_t> match_right(n_right, kFree);
  std::vector<char> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t u) {
    for (std::size_t v : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      if (match_right[v] == kFree || augment(match_right[v])) {
        match_right[v] = u;
        return true;
      }
    }
    return false;
  };
  std::size_t size = 0;
  for (std::size_t u = 0; u < n_left; ++u) {
    seen.assign(n_right, 0);
    if (augment(u)) ++size;
  }
  return size;
}

inline MatchCounts counts_from_matching(std::size_t matched, std::size_t n_pred,
                                        std::size_t n_gt) {
  return {matched, n_pred - matched, n_gt - matched};
}

inline MatchCounts match_boundaries(const BoundarySet& pred, const BoundarySet& gt,
                                    double threshold,
                                    ThresholdRule rule = ThresholdRule::kClosed) {
  if (!(threshold > 0.0)) throw ArgumentError("match_boundaries: threshold must be > 0");
  const std::size_t m = max_bipartite_matching(
      pred.size(), gt.size(), [&](std::size_t i, std::size_t j) {
        const double d = std::abs(pred.positions[i] - gt.positions[j]);
        return rule == ThresholdRule::kClosed ? d <= threshold : d < threshold;
      });
  return counts_from_matching(m, pred.size(), gt.size());
}

/// |a ∩ b| / |a ∪ b| for inclusive frame intervals.
inline double interval_iou(const Interval& a, const Interval& b) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  const std::size_t inter = hi >= lo ? hi - lo + 1 : 0;
  const std::size_t uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {
// inter >= thr * union, with a relative tolerance so 0.45 etc. compare exactly.
inline bool iou_passes(const Interval& a, const Interval& b, double thr, ThresholdRule rule) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  const double inter = hi >= lo ? static_cast<double>(hi - lo + 1) : 0.0;
  const double uni = static_cast<double>(a.length() + b.length()) - inter;
  const double lhs = inter;
  const double rhs = thr * uni;
  const double tol = 1e-9 * uni;
  return rule == ThresholdRule::kClosed ? lhs >= rhs - tol : lhs > rhs + tol;
}
}  // namespace detail

inline MatchCounts match_segments(const SegmentSet& pred, const SegmentSet& gt,
                                  double iou_threshold,
                                  ThresholdRule rule = ThresholdRule::kClosed) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw ArgumentError("match_segments: IoU threshold must be in (0, 1)");
  }
  const std::size_t m = max_bipartite_matching(
      pred.size(), gt.size(), [&](std::size_t i, std::size_t j) {
        return detail::iou_passes(pred.intervals[i], gt.intervals[j], iou_threshold, rule);
      });
  return counts_from_matching(m, pred.size(), gt.size());
}

/// Precision, recall and F1 in percent.
struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// 0/0 conventions: with no events on either side the score is 100,
/// otherwise an empty denominator yields 0.
inline PRF prf_from_counts(const MatchCounts& c) {
  if (c.tp + c.fp + c.fn == 0) return {100.0, 100.0, 100.0};
  PRF r;
  r.precision = c.tp + c.fp > 0 ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn > 0 ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

struct ThresholdResult {
  double threshold = 0.0;
  MatchCounts counts;
  PRF scores;
};

namespace detail {
inline void check_aligned(std::size_t a, std::size_t b, const char* who) {
  if (a != b) {
    throw ArgumentError(std::string(who) + ": " + std::to_string(a) + " predictions vs " +
                        std::to_string(b) + " ground-truth videos");
  }
}

template <class Matcher>
ThresholdResult aggregate_matches(std::size_t n, double threshold, Aggregation agg,
                                  Matcher&& match) {
  ThresholdResult out;
  out.threshold = threshold;
  PRF macro;
  for (std::size_t v = 0; v < n; ++v) {
    const MatchCounts c = match(v);
    out.counts += c;
    if (agg == Aggregation::kMacro) {
      const PRF s = prf_from_counts(c);
      macro.precision += s.precision;
      macro.recall += s.recall;
      macro.f1 += s.f1;
    }
  }
  if (agg == Aggregation::kMicro || n == 0) {
    out.scores = prf_from_counts(out.counts);
  } else {
    const double k = static_cast<double>(n);
    out.scores = {macro.precision / k, macro.recall / k, macro.f1 / k};
  }
  return out;
}
}  // namespace detail

inline ThresholdResult f1_boundary(const std::vector<BoundarySet>& preds,
                                   const std::vector<BoundarySet>& gts, double threshold,
                                   const MetricOptions& opt = {}) {
  detail::check_aligned(preds.size(), gts.size(), "f1_boundary");
  return detail::aggregate_matches(preds.size(), threshold, opt.aggregation, [&](std::size_t v) {
    return match_boundaries(preds[v], gts[v], threshold, opt.boundary_rule);
  });
}

inline ThresholdResult f1_segment(const std::vector<SegmentSet>& preds,
                                  const std::vector<SegmentSet>& gts, double iou_threshold,
                                  const MetricOptions& opt = {}) {
  detail::check_aligned(preds.size(), gts.size(), "f1_segment");
  return detail::aggregate_matches(preds.size(), iou_threshold, opt.aggregation,
                                   [&](std::size_t v) {
                                     return match_segments(preds[v], gts[v], iou_threshold,
                                                           opt.segment_rule);
                                   });
}

inline std::vector<BoundarySet> boundaries_of(const std::vector<FrameLabels>& ys) {
  std::vector<BoundarySet> out;
  out.reserve(ys.size());
  for (const auto& y : ys) out.push_back(extract_boundaries(y));
  return out;
}

inline std::vector<SegmentSet> segments_of(const std::vector<FrameLabels>& ys) {
  std::vector<SegmentSet> out;
  out.reserve(ys.size());
  for (const auto& y : ys) out.push_back(extract_segments(y));
  return out;
}

inline std::vector<ThresholdResult> boundary_sweep(const std::vector<BoundarySet>& preds,
                                                   const std::vector<BoundarySet>& gts,
                                                   const MetricOptions& opt = {}) {
  std::vector<ThresholdResult> out;
  for (int t : kBoundaryThresholds) out.push_back(f1_boundary(preds, gts, t, opt));
  return out;
}

inline std::vector<ThresholdResult> segment_sweep(const std::vector<SegmentSet>& preds,
                                                  const std::vector<SegmentSet>& gts,
                                                  const MetricOptions& opt = {}) {
  std::vector<ThresholdResult> out;
  for (int p : kSegmentIouPercent) out.push_back(f1_segment(preds, gts, p / 100.0, opt));
  return out;
}

inline double mean_f1(const std::vector<ThresholdResult>& rs) {
  double acc = 0.0;
  for (const auto& r : rs) acc += r.scores.f1;
  return rs.empty() ? 0.0 : acc / static_cast<double>(rs.size());
}

inline double mf1b(const std::vector<FrameLabels>& preds, const std::vector<FrameLabels>& gts,
                   const MetricOptions& opt = {}) {
  detail::check_aligned(preds.size(), gts.size(), "mf1b");
  return mean_f1(boundary_sweep(boundaries_of(preds), boundaries_of(gts), opt));
}

inline double mf1s(const std::vector<FrameLabels>& preds, const std::vector<FrameLabels>& gts,
                   const MetricOptions& opt = {}) {
  detail::check_aligned(preds.size(), gts.size(), "mf1s");
  return mean_f1(segment_sweep(segments_of(preds), segments_of(gts), opt));
}

/// Mean length of the runs of boundary frames over all videos; 0 if none.
inline double mean_boundary_width(const std::vector<FrameLabels>& preds) {
  std::uint64_t runs = 0, frames = 0;
  for (const auto& y : preds) {
    for (std::size_t w : extract_boundaries(y).widths) {
      ++runs;
      frames += w;
    }
  }
  return runs == 0 ? 0.0 : static_cast<double>(frames) / static_cast<double>(runs);
}

inline constexpr int kEvalReportVersion = 1;

struct EvalReport {
  std::vector<ThresholdResult> boundary;
  std::vector<ThresholdResult> segment;
  double mF1B = 0.0;
  double mF1S = 0.0;
  double mean_boundary_width = 0.0;
  std::size_t videos = 0;
  std::string config_hash;  // empty when not produced by a configured run
};

inline EvalReport evaluate_labels(const std::vector<FrameLabels>& preds,
                                  const std::vector<FrameLabels>& gts,
                                  const MetricOptions& opt = {}) {
  detail::check_aligned(preds.size(), gts.size(), "evaluate_labels");
  for (std::size_t v = 0; v < preds.size(); ++v) {
    if (preds[v].size() != gts[v].size()) {
      throw DimensionError("evaluate_labels: video " + std::to_string(v) + " has " +
                           std::to_string(preds[v].size()) + " predicted vs " +
                           std::to_string(gts[v].size()) + " ground-truth frames");
    }
  }
  EvalReport r;
  r.boundary = boundary_sweep(boundaries_of(preds), boundaries_of(gts), opt);
  r.segment = segment_sweep(segments_of(preds), segments_of(gts), opt);
  r.mF1B = mean_f1(r.boundary);
  r.mF1S = mean_f1(r.segment);
  r.mean_boundary_width = mean_boundary_width(preds);
  r.videos = preds.size();
  return r;
}

// ---------------------------------------------------------------------------
// Serialization. JSON object (schema "signseg.eval_report", version 1):
//   { "schema", "version", "config_hash", "videos", "mF1B", "mF1S",
//     "mean_boundary_width",
//     "boundary": [{"threshold", "precision", "recall", "f1", "tp", "fp", "fn"}],
//     "segment":  [{"iou", "precision", "recall", "f1", "tp", "fp", "fn"}] }
// CSV: header from eval_report_csv_header(), one row per report.

inline nlohmann::ordered_json threshold_json(const ThresholdResult& r, const char* key) {
  nlohmann::ordered_json j;
  j[key] = r.threshold;
  j["precision"] = r.scores.precision;
  j["recall"] = r.scores.recall;
  j["f1"] = r.scores.f1;
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["fn"] = r.counts.fn;
  return j;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = "signseg.eval_report";
  j["version"] = kEvalReportVersion;
  j["config_hash"] = r.config_hash;
  j["videos"] = r.videos;
  j["mF1B"] = r.mF1B;
  j["mF1S"] = r.mF1S;
  j["mean_boundary_width"] = r.mean_boundary_width;
  j["boundary"] = nlohmann::ordered_json::array();
  for (const auto& b : r.boundary) j["boundary"].push_back(threshold_json(b, "threshold"));
  j["segment"] = nlohmann::ordered_json::array();
  for (const auto& s : r.segment) j["segment"].push_back(threshold_json(s, "iou"));
  return j;
}

inline ThresholdResult threshold_from_json(const nlohmann::json& j, const char* key) {
  ThresholdResult r;
  r.threshold = j.at(key).get<double>();
  r.scores = {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
  r.counts = {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
              j.at("fn").get<std::uint64_t>()};
  return r;
}

/// Parses and validates an EvalReport JSON object; throws FormatError.
inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "signseg.eval_report") {
      throw FormatError("eval report: unexpected schema");
    }
    if (j.at("version").get<int>() != kEvalReportVersion) {
      throw FormatError("eval report: unsupported version");
    }
    EvalReport r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.videos = j.at("videos").get<std::size_t>();
    r.mF1B = j.at("mF1B").get<double>();
    r.mF1S = j.at("mF1S").get<double>();
    r.mean_boundary_width = j.at("mean_boundary_width").get<double>();
    for (const auto& b : j.at("boundary")) r.boundary.push_back(threshold_from_json(b, "threshold"));
    for (const auto& s : j.at("segment")) r.segment.push_back(threshold_from_json(s, "iou"));
    if (r.boundary.size() != kBoundaryThresholds.size() ||
        r.segment.size() != kSegmentIouPercent.size()) {
      throw FormatError("eval report: wrong number of thresholds");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
}

inline std::string eval_report_csv_header() {
  std::string h = "version,config_hash,videos,mF1B,mF1S,mean_boundary_width";
  for (int t : kBoundaryThresholds) h += ",F1B@" + std::to_string(t);
  for (int p : kSegmentIouPercent) {
    std::ostringstream s;
    s << ",F1S@" << std::fixed << std::setprecision(2) << p / 100.0;
    h += s.str();
  }
  return h;
}

inline std::string to_csv_row(const EvalReport& r) {
  std::ostringstream s;
  s << std::setprecision(10) << kEvalReportVersion << ',' << r.config_hash << ',' << r.videos
    << ',' << r.mF1B << ',' << r.mF1S << ',' << r.mean_boundary_width;
  for (const auto& b : r.boundary) s << ',' << b.scores.f1;
  for (const auto& x : r.segment) s << ',' << x.scores.f1;
  return s.str();
}

// ---------------------------------------------------------------------------
// Multi-seed aggregation.

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.size() < 2) throw ArityError("mean_std: need at least 2 values");
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0))};
}

struct SeedAggregate {
  std::size_t runs = 0;
  MeanStd mF1B;
  MeanStd mF1S;
  MeanStd mean_boundary_width;
  std::vector<MeanStd> boundary_f1;  // per threshold
  std::vector<MeanStd> segment_f1;   // per IoU threshold
};

inline SeedAggregate aggregate_seeds(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) {
    throw ArityError("aggregate_seeds: need at least 2 runs, got " + std::to_string(reports.size()));
  }
  const auto collect = [&](auto&& get) {
    std::vector<double> xs;
    for (const auto& r : reports) xs.push_back(get(r));
    return mean_std(xs);
  };
  SeedAggregate a;
  a.runs = reports.size();
  a.mF1B = collect([](const EvalReport& r) { return r.mF1B; });
  a.mF1S = collect([](const EvalReport& r) { return r.mF1S; });
  a.mean_boundary_width = collect([](const EvalReport& r) { return r.mean_boundary_width; });
  for (std::size_t i = 0; i < kBoundaryThresholds.size(); ++i)
    a.boundary_f1.push_back(collect([i](const EvalReport& r) { return r.boundary.at(i).scores.f1; }));
  for (std::size_t i = 0; i < kSegmentIouPercent.size(); ++i)
    a.segment_f1.push_back(collect([i](const EvalReport& r) { return r.segment.at(i).scores.f1; }));
  return a;
}

/// "68.68 ± 0.6": mean with two decimals, standard deviation with one.
inline std::string format_mean_std(const MeanStd& v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v.mean << " ± " << std::setprecision(1) << v.std;
  return s.str();
}

/// "68.68_{±0.6}", the subscripted table-cell form.
inline std::string format_mean_std_subscript(const MeanStd& v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v.mean << "_{±" << std::setprecision(1) << v.std
    << "}";
  return s.str();
}

}  // namespace signseg
