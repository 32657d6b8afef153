#pragma once

// Sweeps, baselines and their on-disk artifacts.
//
// A sweep directory holds
//   sweep.json         every test report, grouped by sweep point
//   runs.csv           one EvalReport row per (point, seed)
//   summary.csv        mean and sample std per point
//   mF1B.dat, mF1S.dat plot data: "value mean std" per line
//   <point>/seed<k>/   model.sgsg, run.json, report.json

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "signseg/baselines/forest.hpp"
#include "signseg/baselines/geometric.hpp"
#include "signseg/baselines/uniform.hpp"
#include "signseg/pipeline/train.hpp"

namespace signseg {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw FormatError(path.string() + ": write failed");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": byte " + std::to_string(e.byte) + ": invalid JSON");
  }
}

enum class SweepKind { kNone, kStages, kFraction };

inline SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "none") return SweepKind::kNone;
  if (s == "stages") return SweepKind::kStages;
  if (s == "fraction") return SweepKind::kFraction;
  throw UsageError("sweep kind must be none, stages or fraction, got '" + s + "'");
}

inline const char* sweep_kind_name(SweepKind k) {
  switch (k) {
    case SweepKind::kStages: return "stages";
    case SweepKind::kFraction: return "fraction";
    default: return "none";
  }
}

inline std::vector<double> sweep_values(SweepKind k) {
  switch (k) {
    case SweepKind::kStages: return {1, 2, 3, 4, 5, 6};
    case SweepKind::kFraction: return {0.25, 0.5, 0.75, 1.0};
    default: return {0};
  }
}

inline std::string point_label(SweepKind k, double v) {
  if (k == SweepKind::kNone) return "run";
  std::ostringstream s;
  s << sweep_kind_name(k) << '=' << v;
  return s.str();
}

inline TrainConfig apply_sweep_point(TrainConfig cfg, SweepKind k, double v) {
  if (k == SweepKind::kStages) cfg.model.num_stages = static_cast<std::uint32_t>(v);
  if (k == SweepKind::kFraction) cfg.train_fraction = v;
  return cfg;
}

struct RunResult {
  RunRecord record;
  EvalReport test;
};

struct SweepPoint {
  std::string label;
  double value = 0.0;
  std::vector<RunResult> runs;

  std::vector<EvalReport> reports() const {
    std::vector<EvalReport> out;
    for (const auto& r : runs) out.push_back(r.test);
    return out;
  }
};

struct ExperimentTable {
  SweepKind kind = SweepKind::kNone;
  std::string config_hash;  // of the base config
  std::vector<SweepPoint> points;
};

inline fs::path run_dir(const fs::path& root, const std::string& label, std::uint64_t seed) {
  return root / label / ("seed" + std::to_string(seed));
}

/// Writes model.sgsg (under checkpoint_dir if set), run.json and report.json.
inline RunResult train_and_test(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val,
                                const Dataset& test, std::uint64_t seed, const fs::path& out,
                                const fs::path& ckpt_dir, const EpochCallback& on_epoch = {}) {
  std::string ckpt;
  if (!ckpt_dir.empty()) {
    fs::create_directories(ckpt_dir);
    ckpt = (ckpt_dir / "model.sgsg").string();
  }
  RunResult r;
  r.record = train(cfg, train_set, val, seed, ckpt, on_epoch);
  if (test.size() > 0) r.test = evaluate(r.record.best, test, r.record.config_hash);
  if (!out.empty()) {
    write_text(out / "run.json", to_json(r.record).dump(2) + "\n");
    if (test.size() > 0) write_text(out / "report.json", to_json(r.test).dump(2) + "\n");
  }
  return r;
}

/// Trains every (sweep point, seed) pair of `cfg.seeds` and scores it on
/// `test`. With an empty `out_dir` nothing is written.
inline ExperimentTable run_experiment(const TrainConfig& cfg, SweepKind kind, const Dataset& train_set,
                                      const Dataset& val, const Dataset& test,
                                      const std::string& out_dir = {},
                                      const std::function<void(const std::string&)>& log = {}) {
  cfg.validate();
  if (test.size() == 0) throw ArgumentError("experiment: a test set is required");
  ExperimentTable table;
  table.kind = kind;
  table.config_hash = hash_hex(fnv1a64(canonical_config(cfg) + "sweep=" + sweep_kind_name(kind) + "\n"));
  for (double v : sweep_values(kind)) {
    SweepPoint p;
    p.value = v;
    p.label = point_label(kind, v);
    const TrainConfig pc = apply_sweep_point(cfg, kind, v);
    for (std::uint64_t seed : cfg.seeds) {
      fs::path out, ckpt;
      if (!out_dir.empty()) {
        out = run_dir(out_dir, p.label, seed);
        ckpt = cfg.checkpoint_dir.empty() ? out : run_dir(cfg.checkpoint_dir, p.label, seed);
      }
      p.runs.push_back(train_and_test(pc, train_set, val, test, seed, out, ckpt));
      if (log) {
        std::ostringstream s;
        s << p.label << " seed " << seed << ": test mF1B " << std::fixed << std::setprecision(2)
          << p.runs.back().test.mF1B << ", mF1S " << p.runs.back().test.mF1S;
        log(s.str());
      }
    }
    table.points.push_back(std::move(p));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Tables of reports.

struct ReportGroup {
  std::string label;
  double value = 0.0;
  std::vector<EvalReport> reports;
};

/// Mean and sample std; std is NaN for a single report.
inline MeanStd summarize(const std::vector<EvalReport>& rs, double EvalReport::*field) {
  if (rs.empty()) throw ArityError("summarize: no reports");
  std::vector<double> xs;
  for (const auto& r : rs) xs.push_back(r.*field);
  if (xs.size() == 1) return {xs[0], std::numeric_limits<double>::quiet_NaN()};
  return mean_std(xs);
}

inline std::vector<ReportGroup> report_groups(const ExperimentTable& t) {
  std::vector<ReportGroup> out;
  for (const auto& p : t.points) out.push_back({p.label, p.value, p.reports()});
  return out;
}

inline nlohmann::ordered_json sweep_json(const ExperimentTable& t) {
  nlohmann::ordered_json j;
  j["schema"] = "signseg.sweep";
  j["version"] = 1;
  j["kind"] = sweep_kind_name(t.kind);
  j["config_hash"] = t.config_hash;
  j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : t.points) {
    nlohmann::ordered_json jp;
    jp["label"] = p.label;
    jp["value"] = p.value;
    jp["seeds"] = nlohmann::ordered_json::array();
    jp["reports"] = nlohmann::ordered_json::array();
    for (const auto& r : p.runs) {
      jp["seeds"].push_back(r.record.seed);
      jp["reports"].push_back(to_json(r.test));
    }
    j["points"].push_back(jp);
  }
  return j;
}

inline std::vector<ReportGroup> report_groups_from_sweep_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "signseg.sweep") throw FormatError("sweep: unexpected schema");
    std::vector<ReportGroup> out;
    for (const auto& jp : j.at("points")) {
      ReportGroup g{jp.at("label").get<std::string>(), jp.at("value").get<double>(), {}};
      for (const auto& r : jp.at("reports")) g.reports.push_back(eval_report_from_json(r));
      out.push_back(std::move(g));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("sweep: ") + e.what());
  }
}

inline std::string fmt_cell(const MeanStd& v, bool subscript) {
  if (std::isnan(v.std)) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v.mean;
    return s.str();
  }
  return subscript ? format_mean_std_subscript(v) : format_mean_std(v);
}

/// Renders groups as csv, json or md (Markdown table with "68.68_{±0.6}"
/// cells).
inline std::string render_report(const std::vector<ReportGroup>& groups, const std::string& format) {
  std::ostringstream s;
  s << std::setprecision(10);
  if (format == "csv") {
    s << "label,value,runs,mF1B_mean,mF1B_std,mF1S_mean,mF1S_std,width_mean,width_std\n";
    for (const auto& g : groups) {
      s << g.label << ',' << g.value << ',' << g.reports.size();
      for (auto f : {&EvalReport::mF1B, &EvalReport::mF1S, &EvalReport::mean_boundary_width}) {
        const MeanStd m = summarize(g.reports, f);
        s << ',' << m.mean << ',';
        if (!std::isnan(m.std)) s << m.std;
      }
      s << '\n';
    }
  } else if (format == "json") {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& g : groups) {
      nlohmann::ordered_json row;
      row["label"] = g.label;
      row["value"] = g.value;
      row["runs"] = g.reports.size();
      const std::pair<const char*, double EvalReport::*> fields[] = {
          {"mF1B", &EvalReport::mF1B}, {"mF1S", &EvalReport::mF1S}, {"mean_boundary_width", &EvalReport::mean_boundary_width}};
      for (const auto& [name, f] : fields) {
        const MeanStd m = summarize(g.reports, f);
        row[name] = {{"mean", m.mean}, {"std", std::isnan(m.std) ? nlohmann::ordered_json() : nlohmann::ordered_json(m.std)}};
        row[name]["text"] = fmt_cell(m, true);
      }
      j.push_back(row);
    }
    s << j.dump(2) << '\n';
  } else if (format == "md") {
    s << "| run | seeds | mF1B | mF1S | boundary width |\n|---|---|---|---|---|\n";
    for (const auto& g : groups) {
      s << "| " << g.label << " | " << g.reports.size();
      for (auto f : {&EvalReport::mF1B, &EvalReport::mF1S, &EvalReport::mean_boundary_width})
        s << " | " << fmt_cell(summarize(g.reports, f), true);
      s << " |\n";
    }
  } else {
    throw UsageError("report format must be csv, json or md, got '" + format + "'");
  }
  return s.str();
}

inline std::string plot_data(const std::vector<ReportGroup>& groups, double EvalReport::*field) {
  std::ostringstream s;
  s << std::setprecision(10) << "# value mean std\n";
  for (const auto& g : groups) {
    const MeanStd m = summarize(g.reports, field);
    s << g.value << ' ' << m.mean << ' ' << (std::isnan(m.std) ? 0.0 : m.std) << '\n';
  }
  return s.str();
}

inline void write_experiment(const ExperimentTable& t, const std::string& dir) {
  const fs::path root(dir);
  write_text(root / "sweep.json", sweep_json(t).dump(2) + "\n");
  std::ostringstream runs;
  runs << "point,value,seed," << eval_report_csv_header() << '\n';
  for (const auto& p : t.points)
    for (const auto& r : p.runs) runs << p.label << ',' << p.value << ',' << r.record.seed << ',' << to_csv_row(r.test) << '\n';
  write_text(root / "runs.csv", runs.str());
  const auto groups = report_groups(t);
  write_text(root / "summary.csv", render_report(groups, "csv"));
  write_text(root / "mF1B.dat", plot_data(groups, &EvalReport::mF1B));
  write_text(root / "mF1S.dat", plot_data(groups, &EvalReport::mF1S));
}

/// Groups for `signseg report`: sweep.json if present, otherwise every
/// report.json below `dir` grouped by parent of its seed directory.
inline std::vector<ReportGroup> load_report_groups(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw FormatError(dir + ": not a directory");
  if (fs::exists(root / "sweep.json")) return report_groups_from_sweep_json(read_json_file(root / "sweep.json"));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == "report.json") files.push_back(e.path());
  if (files.empty()) throw FormatError(dir + ": no sweep.json or report.json files found");
  std::sort(files.begin(), files.end());
  std::vector<ReportGroup> groups;
  for (const auto& f : files) {
    fs::path group_dir = f.parent_path();
    if (group_dir.filename().string().rfind("seed", 0) == 0 && group_dir != root) group_dir = group_dir.parent_path();
    std::string label = fs::relative(group_dir, root).string();
    if (label == ".") label = root.filename().string();
    if (groups.empty() || groups.back().label != label) groups.push_back({label, 0.0, {}});
    try {
      groups.back().reports.push_back(eval_report_from_json(read_json_file(f)));
    } catch (const FormatError& e) {
      throw FormatError(f.string() + ": " + e.what());
    }
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Baselines.

enum class BaselineKind { kUniform, kGeomRf, kGeomMstcn };

inline BaselineKind parse_baseline_kind(const std::string& s) {
  if (s == "uniform") return BaselineKind::kUniform;
  if (s == "geom-rf") return BaselineKind::kGeomRf;
  if (s == "geom-mstcn") return BaselineKind::kGeomMstcn;
  throw UsageError("baseline method must be uniform, geom-rf or geom-mstcn, got '" + s + "'");
}

/// Uniform split of every clip by its ground-truth sign count.
inline std::vector<FrameLabels> uniform_predictions(const std::vector<SegmentAnnotation>& anns) {
  std::vector<FrameLabels> out;
  for (const auto& a : anns) {
    if (a.segments.empty()) {
      throw ArgumentError("uniform baseline: video '" + a.video_id + "' has no ground-truth signs");
    }
    out.push_back(uniform_segmentation(a.num_frames, a.segments.size()));
  }
  return out;
}

inline EvalReport uniform_baseline(const std::vector<SegmentAnnotation>& anns) {
  std::vector<FrameLabels> gts;
  for (const auto& a : anns) gts.push_back(build_frame_labels(a));
  return evaluate_labels(uniform_predictions(anns), gts);
}

struct ForestRun {
  Forest forest;
  double sigma = 1.0;
  EvalReport report;
  std::vector<FrameLabels> predictions;
};

/// Laplacian-window features of `train_set` (first train_fraction of it)
/// feed a random forest scored on `test`. Sigma is the median L1 frame
/// distance of the training features.
inline ForestRun forest_baseline(const TrainConfig& cfg, const Dataset& train_set, const Dataset& test,
                                 std::uint64_t seed) {
  cfg.validate();
  const Dataset used = train_set.first(fraction_count(train_set.size(), cfg.train_fraction));
  std::vector<const FeatureSequence<float>*> ptrs;
  for (const auto& x : used.x) ptrs.push_back(&x);
  ForestRun run;
  run.sigma = median_l1_sigma(ptrs);
  GeomFeatureConfig g;
  g.window = cfg.window;
  g.sigma = run.sigma;
  std::vector<FeatureSequence<float>> xs;
  for (const auto& x : used.x) xs.push_back(laplacian_window_features(x, g));
  ForestConfig fc = cfg.forest;
  fc.seed = derive_seed(seed, 0xf0e5);
  run.forest = forest_train(xs, used.y, fc);
  for (const auto& x : test.x) run.predictions.push_back(forest_predict(run.forest, laplacian_window_features(x, g)));
  run.report = evaluate_labels(run.predictions, test.y);
  return run;
}

inline void require_dir(const std::string& dir, const char* key, const char* who) {
  if (dir.empty()) throw ArgumentError(std::string(who) + ": config key '" + key + "' is required");
  if (!fs::is_directory(dir)) throw ArgumentError(std::string(who) + ": " + key + " '" + dir + "' is not a directory");
}

/// Runs one baseline from the corpus directories named in `cfg` and writes
/// report.json (plus the trained model) under `out_dir`.
inline EvalReport run_baseline(BaselineKind kind, const TrainConfig& cfg, std::uint64_t seed,
                               const std::string& out_dir) {
  const fs::path out(out_dir);
  EvalReport report;
  if (kind == BaselineKind::kUniform) {
    require_dir(cfg.test_dir, "test_dir", "baseline uniform");
    report = uniform_baseline(read_annotations((fs::path(cfg.test_dir) / "annotations.jsonl").string()));
  } else {
    const char* who = kind == BaselineKind::kGeomRf ? "baseline geom-rf" : "baseline geom-mstcn";
    require_dir(cfg.train_dir, "train_dir", who);
    require_dir(cfg.test_dir, "test_dir", who);
    for (const std::string& d : {cfg.train_dir, cfg.test_dir, cfg.val_dir}) {
      if (!d.empty() && !fs::exists(fs::path(d) / "poses" / "schema.json")) {
        throw ArgumentError(std::string(who) + ": pose files missing, expected " +
                            (fs::path(d) / "poses" / "schema.json").string());
      }
    }
    const Dataset tr = load_dataset(cfg.train_dir, InputKind::kGeometric);
    const Dataset te = load_dataset(cfg.test_dir, InputKind::kGeometric);
    if (kind == BaselineKind::kGeomRf) {
      ForestRun run = forest_baseline(cfg, tr, te, seed);
      fs::create_directories(out);
      write_forest((out / "forest.sgrf").string(), run.forest);
      report = run.report;
    } else {
      TrainConfig gc = cfg;
      gc.input = InputKind::kGeometric;
      gc.model.input_dim = 0;
      const Dataset va = cfg.val_dir.empty() ? Dataset{} : load_dataset(cfg.val_dir, InputKind::kGeometric);
      fs::create_directories(out);
      report = train_and_test(gc, tr, va, te, seed, out, out).test;
    }
  }
  if (kind != BaselineKind::kGeomMstcn) report.config_hash = hash_hex(run_hash(cfg, seed));
  write_text(out / "report.json", to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace signseg
