// signseg command-line tool. Exit codes: 0 success, 1 usage, 2 data error,
// 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "signseg/dataio/corpus.hpp"
#include "signseg/dataio/synth.hpp"
#include "signseg/pipeline/config.hpp"
#include "signseg/pipeline/experiment.hpp"
#include "signseg/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace signseg;

namespace {

void log_line(const std::string& s) { std::cerr << s << std::endl; }

int cmd_synth(const std::string& config, const std::string& out) {
  KeyValues kv = KeyValues::load(config);
  const SynthJob job = synth_job_from(kv);
  Corpus all = corpus_from_synth(synth_generate(job.synth));
  if (job.split.empty()) {
    save_corpus(out, all);
  } else {
    const char* names[] = {"train", "val", "test"};
    std::size_t first = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      save_corpus((fs::path(out) / names[k]).string(), all.slice(first, job.split[k]));
      first += job.split[k];
    }
  }
  log_line("wrote " + std::to_string(all.size()) + " videos to " + out);
  return 0;
}

Dataset optional_dataset(const std::string& dir, InputKind input) {
  return dir.empty() ? Dataset{} : load_dataset(dir, input);
}

int cmd_train(TrainConfig cfg, const std::string& out, std::optional<std::uint64_t> seed,
              std::optional<double> fraction, std::optional<std::uint32_t> stages) {
  if (seed) cfg.seeds = {*seed};
  if (fraction) cfg.train_fraction = *fraction;
  if (stages) cfg.model.num_stages = *stages;
  cfg.validate();
  require_dir(cfg.train_dir, "train_dir", "train");
  const Dataset tr = load_dataset(cfg.train_dir, cfg.input);
  const Dataset va = optional_dataset(cfg.val_dir, cfg.input);
  const Dataset te = optional_dataset(cfg.test_dir, cfg.input);
  write_text(fs::path(out) / "config.txt", canonical_config(cfg));
  std::vector<EvalReport> reports;
  for (std::uint64_t s : cfg.seeds) {
    const fs::path dir = fs::path(out) / ("seed" + std::to_string(s));
    const fs::path ckpt = cfg.checkpoint_dir.empty() ? dir : fs::path(cfg.checkpoint_dir) / dir.filename();
    const RunResult r = train_and_test(cfg, tr, va, te, s, dir, ckpt, [&](const EpochLog& e) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "seed %llu epoch %zu: loss %.5f  val mF1B %.2f  mF1S %.2f",
                    static_cast<unsigned long long>(s), e.epoch, e.train_loss, e.val_mF1B, e.val_mF1S);
      log_line(buf);
    });
    log_line("seed " + std::to_string(s) + ": best epoch " + std::to_string(r.record.best_epoch) +
             ", checkpoint " + r.record.checkpoint_path);
    if (te.size() > 0) reports.push_back(r.test);
  }
  if (!reports.empty()) std::cout << render_report({{"train", 0.0, reports}}, "md");
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& features, const std::string& annotations,
             const std::string& out) {
  Corpus c;
  c.annotations = read_annotations(annotations);
  c.features = load_feature_dir(features, c.annotations);
  const EvalReport r = evaluate(checkpoint, dataset_from(c));
  write_text(out, to_json(r).dump(2) + "\n");
  std::cout << render_report({{"eval", 0.0, {r}}}, "md");
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& features, const std::string& out) {
  const ModelParams<float> params = read_checkpoint<float>(checkpoint);
  Dataset d;
  d.ids = {fs::path(features).stem().string()};
  d.x = {read_features(features)};
  write_predictions(out, d.ids, predict_all(params, d));
  return 0;
}

int cmd_baseline(const std::string& method, const TrainConfig& cfg, const std::string& out,
                 std::optional<std::uint64_t> seed) {
  const BaselineKind kind = parse_baseline_kind(method);
  const EvalReport r = run_baseline(kind, cfg, seed.value_or(cfg.seeds.front()), out);
  std::cout << render_report({{method, 0.0, {r}}}, "md");
  return 0;
}

int cmd_sweep(const std::string& kind_name, const TrainConfig& cfg, const std::string& out) {
  const SweepKind kind = parse_sweep_kind(kind_name);
  require_dir(cfg.train_dir, "train_dir", "sweep");
  require_dir(cfg.test_dir, "test_dir", "sweep");
  const Dataset tr = load_dataset(cfg.train_dir, cfg.input);
  const Dataset va = optional_dataset(cfg.val_dir, cfg.input);
  const Dataset te = load_dataset(cfg.test_dir, cfg.input);
  const ExperimentTable t = run_experiment(cfg, kind, tr, va, te, out, log_line);
  write_text(fs::path(out) / "config.txt", canonical_config(cfg));
  write_experiment(t, out);
  std::cout << render_report(report_groups(t), "md");
  return 0;
}

int cmd_report(const std::string& in, const std::string& format, const std::string& out) {
  const std::string text = render_report(load_report_groups(in), format);
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sign segmentation with multi-stage temporal convolutional networks"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, features, annotations, method, kind, in, format = "md";
  std::optional<std::uint64_t> seed;
  std::optional<double> fraction;
  std::optional<std::uint32_t> stages;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--config", config, "Synthetic corpus config")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train one model per seed");
  train_cmd->add_option("--config", config, "Training config")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out, "Output directory")->required();
  train_cmd->add_option("--seed", seed, "Train a single seed");
  train_cmd->add_option("--fraction", fraction, "Fraction of training videos")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--stages", stages, "Number of stages")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Score a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--features", features, "Directory of <video_id>.sgf files")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--annotations", annotations, "annotations.jsonl")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "report.json")->required();

  auto* predict = app.add_subcommand("predict", "Label one feature file");
  predict->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  predict->add_option("--features", features, "Feature file")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out, "labels.json")->required();

  auto* baseline = app.add_subcommand("baseline", "Run a baseline");
  baseline->add_option("--method", method, "uniform, geom-rf or geom-mstcn")->required();
  baseline->add_option("--config", config, "Training config")->required()->check(CLI::ExistingFile);
  baseline->add_option("--out", out, "Output directory")->required();
  baseline->add_option("--seed", seed, "Seed (default: first configured seed)");

  auto* sweep = app.add_subcommand("sweep", "Stage-count or training-fraction sweep");
  sweep->add_option("--kind", kind, "stages or fraction")->required();
  sweep->add_option("--config", config, "Training config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Render mean and std tables");
  report->add_option("--in", in, "Sweep or training directory")->required();
  report->add_option("--format", format, "csv, json or md");
  report->add_option("--out", out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(config, out);
    if (*train_cmd) return cmd_train(load_train_config(config), out, seed, fraction, stages);
    if (*eval) return cmd_eval(checkpoint, features, annotations, out);
    if (*predict) return cmd_predict(checkpoint, features, out);
    if (*baseline) return cmd_baseline(method, load_train_config(config), out, seed);
    if (*sweep) return cmd_sweep(kind, load_train_config(config), out);
    if (*report) return cmd_report(in, format, out);
  } catch (const Error& e) {
    std::cerr << "signseg: " << e.what() << std::endl;
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "signseg: " << e.what() << std::endl;
    return 2;
  }
  return 1;
}
