#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "signseg/dataio/annotations.hpp"
#include "signseg/dataio/corpus.hpp"
#include "signseg/dataio/features.hpp"
#include "signseg/dataio/stats.hpp"
#include "signseg/dataio/synth.hpp"

namespace signseg {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("signseg_dataio_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  void write_bytes(const std::string& p, const std::vector<char>& b) const {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  }
  std::vector<char> read_bytes(const std::string& p) const {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }
};

using FeatureFiles = TempDir;

TEST_F(FeatureFiles, RoundTripIsBitwiseExact) {
  Rng rng(1);
  FeatureSequence<float> f(17, 5);
  for (float& v : f.values()) v = static_cast<float>(rng.normal());
  f(3, 2) = -0.0f;
  write_features(path("a.sgf"), f);
  const auto back = read_features(path("a.sgf"));
  EXPECT_EQ(std::memcmp(back.data(), f.data(), f.size() * sizeof(float)), 0);
  EXPECT_EQ(back.rows(), 17u);
  EXPECT_EQ(fs::file_size(path("a.sgf")), feature_file_size(17, 5));
}

TEST_F(FeatureFiles, MinimalFileIsSixteenBytes) {
  write_features(path("m.sgf"), FeatureSequence<float>(1, 1, 2.5f));
  EXPECT_EQ(fs::file_size(path("m.sgf")), 16u);
  const auto b = read_bytes(path("m.sgf"));
  EXPECT_EQ(std::string(b.data(), 4), "SGF1");
}

TEST_F(FeatureFiles, MalformedFilesFailWithPositions) {
  write_features(path("ok.sgf"), FeatureSequence<float>(4, 3, 1.0f));
  auto bytes = read_bytes(path("ok.sgf"));

  auto trunc = bytes;
  trunc.resize(bytes.size() - 5);
  write_bytes(path("t.sgf"), trunc);
  try {
    read_features(path("t.sgf"));
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 60 bytes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("file has 55"), std::string::npos) << msg;
    EXPECT_NE(msg.find("byte offset"), std::string::npos) << msg;
  }

  auto magic = bytes;
  magic[1] = 'X';
  write_bytes(path("g.sgf"), magic);
  EXPECT_THROW(read_features(path("g.sgf")), FormatError);

  write_bytes(path("h.sgf"), std::vector<char>(bytes.begin(), bytes.begin() + 6));
  try {
    read_features(path("h.sgf"));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset 4"), std::string::npos) << e.what();
  }

  auto zero = bytes;
  std::fill(zero.begin() + 4, zero.begin() + 8, 0);
  write_bytes(path("z.sgf"), zero);
  EXPECT_THROW(read_features(path("z.sgf")), FormatError);
  EXPECT_THROW(read_features(path("missing.sgf")), FormatError);
  EXPECT_THROW(write_features(path("e.sgf"), FeatureSequence<float>(0, 3)), DimensionError);
}

TEST(Annotations, ParseValidAndRejectInvalidWithLineNumbers) {
  std::istringstream ok(
      R"({"video_id":"a","num_frames":10,"segments":[{"start":0,"end":3,"gloss":"HELLO"},{"start":4,"end":7}]})"
      "\n");
  const auto anns = parse_annotations(ok, "ok.jsonl");
  ASSERT_EQ(anns.size(), 1u);
  EXPECT_EQ(anns[0].segments.size(), 2u);
  EXPECT_EQ(anns[0].segments[0].gloss, "HELLO");
  EXPECT_FALSE(anns[0].segments[1].gloss.has_value());

  std::istringstream overlap(
      "{\"video_id\":\"a\",\"num_frames\":10,\"segments\":[]}\n"
      "{\"video_id\":\"b\",\"num_frames\":10,\"segments\":[{\"start\":0,\"end\":4},{\"start\":4,\"end\":7}]}\n");
  try {
    parse_annotations(overlap, "x.jsonl");
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_NE(std::string(e.what()).find("x.jsonl:2:"), std::string::npos) << e.what();
  }

  std::istringstream past_end(R"({"video_id":"a","num_frames":5,"segments":[{"start":0,"end":5}]})");
  EXPECT_THROW(parse_annotations(past_end, "p"), AnnotationError);
  std::istringstream bad_json("{not json}\n");
  EXPECT_THROW(parse_annotations(bad_json, "j"), FormatError);
  std::istringstream missing(R"({"video_id":"a","segments":[]})");
  EXPECT_THROW(parse_annotations(missing, "m"), FormatError);
  std::istringstream negative(R"({"video_id":"a","num_frames":5,"segments":[{"start":-1,"end":2}]})");
  EXPECT_THROW(parse_annotations(negative, "n"), AnnotationError);
}

using AnnotationFiles = TempDir;

TEST_F(AnnotationFiles, WriteReadRoundTripAndPredictions) {
  SynthConfig cfg;
  cfg.videos = 5;
  std::vector<SegmentAnnotation> anns;
  for (auto& v : synth_generate(cfg)) anns.push_back(v.annotation);
  write_annotations(path("a.jsonl"), anns);
  const auto back = read_annotations(path("a.jsonl"));
  ASSERT_EQ(back.size(), anns.size());
  for (std::size_t i = 0; i < anns.size(); ++i) {
    EXPECT_EQ(back[i].segments, anns[i].segments);
    EXPECT_EQ(back[i].signer, anns[i].signer);
  }

  std::vector<FrameLabels> ys;
  std::vector<std::string> ids;
  for (const auto& a : anns) {
    ys.push_back(build_frame_labels(a));
    ids.push_back(a.video_id);
  }
  write_predictions(path("p.jsonl"), ids, ys);
  std::vector<std::string> read_ids;
  EXPECT_EQ(read_prediction_labels(path("p.jsonl"), &read_ids), ys);
  EXPECT_EQ(read_ids, ids);
  // Prediction files parse as annotation files too.
  EXPECT_EQ(read_annotations(path("p.jsonl")).size(), anns.size());
}

TEST(DatasetStats, ArithmeticAndErrors) {
  SegmentAnnotation a{"v", 40, {{0, 9, "A"}, {10, 21, "B"}, {22, 33, "A"}}, "s1"};
  const auto st = dataset_stats({a});
  EXPECT_NEAR(st.frames_per_sign.mean, 34.0 / 3.0, 1e-12);
  EXPECT_NEAR(st.frames_per_sign.mean, 11.33, 5e-3);
  EXPECT_EQ(st.frames_per_video.std, 0.0);
  EXPECT_EQ(st.total_unique_glosses, 2u);
  const SegmentAnnotation one{"w", 5, {{1, 3, {}}}, {}};
  const auto s1 = dataset_stats({one});
  EXPECT_EQ(s1.frames_per_sign.std, 0.0);
  EXPECT_EQ(s1.signs_per_video.std, 0.0);
  const auto j = to_json(st);
  EXPECT_TRUE(j.contains("avg_frames_per_sign"));
  EXPECT_TRUE(j.contains("avg_frames_per_video"));
  EXPECT_TRUE(j.contains("avg_glosses_per_video"));
  EXPECT_THROW(dataset_stats({}), ArityError);
}

std::vector<SegmentAnnotation> videos(std::size_t n, std::size_t signers) {
  std::vector<SegmentAnnotation> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({"v" + std::to_string(i), 4, {{0, 3, {}}}, "s" + std::to_string(i % signers)});
  return out;
}

TEST(SplitDataset, RandomFourToOne) {
  const auto anns = videos(10, 3);
  const auto a = split_dataset(anns, {0.8, 0.2}, SplitMode::kRandom, 3);
  EXPECT_EQ(std::count(a.begin(), a.end(), 0u), 8);
  EXPECT_EQ(std::count(a.begin(), a.end(), 1u), 2);
  EXPECT_EQ(a, split_dataset(anns, {0.8, 0.2}, SplitMode::kRandom, 3));
  EXPECT_NE(a, split_dataset(anns, {0.8, 0.2}, SplitMode::kRandom, 4));
}

TEST(SplitDataset, BySignerKeepsSignersWhole) {
  const auto anns = videos(12, 2);
  const auto a = split_dataset(anns, {0.5, 0.5}, SplitMode::kBySigner, 1);
  std::set<std::size_t> s0, s1;
  for (std::size_t i = 0; i < anns.size(); ++i) (i % 2 == 0 ? s0 : s1).insert(a[i]);
  EXPECT_EQ(s0.size(), 1u);
  EXPECT_EQ(s1.size(), 1u);
  EXPECT_NE(*s0.begin(), *s1.begin());

  const auto many = videos(60, 10);
  const auto b = split_dataset(many, {0.7, 0.2, 0.1}, SplitMode::kBySigner, 5);
  std::map<std::string, std::set<std::size_t>> by;
  for (std::size_t i = 0; i < many.size(); ++i) by[*many[i].signer].insert(b[i]);
  for (const auto& [who, splits] : by) EXPECT_EQ(splits.size(), 1u) << who;
}

TEST(SplitDataset, Errors) {
  auto anns = videos(4, 2);
  EXPECT_THROW(split_dataset(anns, {0.5, 0.4}, SplitMode::kRandom, 0), ArgumentError);
  anns[2].signer.reset();
  EXPECT_THROW(split_dataset(anns, {0.5, 0.5}, SplitMode::kBySigner, 0), ArgumentError);
}

TEST(LengthDistribution, CalibratedMomentsMatchTargets) {
  const auto d = LengthDistribution::calibrate(11.3, 8.5, 2);
  const auto m = d.moments();
  EXPECT_NEAR(m.mean, 11.3, 1e-8);
  EXPECT_NEAR(m.std, 8.5, 1e-8);
  // Plain clamping of N(11.3, 8.5) overshoots the mean.
  const LengthDistribution naive{11.3, 8.5, 2};
  EXPECT_GT(naive.moments().mean, 11.3 * 1.05);
}

TEST(SynthGenerate, SeedStableAndValid) {
  SynthConfig cfg;
  cfg.videos = 20;
  cfg.seed = 4;
  cfg.poses = true;
  const auto a = synth_generate(cfg), b = synth_generate(cfg);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].annotation.segments, b[i].annotation.segments);
    EXPECT_NO_THROW(validate_annotation(a[i].annotation));
    const auto n = a[i].annotation.segments.size();
    EXPECT_GE(n, 3u);
    EXPECT_LE(n, 10u);
    EXPECT_EQ(a[i].features.rows(), a[i].annotation.num_frames);
    EXPECT_EQ(a[i].features.cols(), 32u);
    ASSERT_TRUE(a[i].pose.has_value());
    EXPECT_NO_THROW(a[i].pose->validate());
  }
  cfg.seed = 5;
  EXPECT_FALSE(synth_generate(cfg)[0].features == a[0].features);
}

TEST(SynthGenerate, ChangePointOracleRecoversBoundaries) {
  SynthConfig cfg;
  cfg.videos = 40;
  cfg.noise_std = 0.0;
  cfg.transition_width = 0;
  cfg.gap_probability = 0.5;
  for (const auto& v : synth_generate(cfg)) {
    const auto& f = v.features;
    std::set<std::size_t> detected;
    for (std::size_t t = 1; t < f.rows(); ++t) {
      bool same = true;
      for (std::size_t d = 0; d < f.cols(); ++d) same = same && f(t, d) == f(t - 1, d);
      if (!same) detected.insert(t);
    }
    std::set<std::size_t> truth;
    const auto& segs = v.annotation.segments;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (i > 0) truth.insert(segs[i].start);
      if (i + 1 < segs.size() && segs[i].end + 1 != segs[i + 1].start) truth.insert(segs[i].end + 1);
    }
    EXPECT_EQ(detected, truth) << v.annotation.video_id;
  }
}

TEST(SynthGenerate, LengthStatisticsConverge) {
  SynthConfig cfg;
  cfg.videos = 500;
  cfg.feature_dim = 2;
  std::vector<SegmentAnnotation> anns;
  for (auto& v : synth_generate(cfg)) anns.push_back(v.annotation);
  const auto st = dataset_stats(anns);
  ASSERT_GE(st.total_signs, 2000u);
  EXPECT_NEAR(st.frames_per_sign.mean, 11.3, 0.05 * 11.3);
  EXPECT_NEAR(st.frames_per_sign.std, 8.5, 0.05 * 8.5);
  std::size_t too_short = 0;
  for (const auto& a : anns)
    for (const auto& s : a.segments) too_short += s.length() < 2;
  EXPECT_EQ(too_short, 0u);
}

TEST(SynthGenerate, TransitionsCrossFadeLinearly) {
  SynthConfig cfg;
  cfg.videos = 3;
  cfg.noise_std = 0.0;
  cfg.gap_probability = 0.0;
  cfg.transition_width = 2;
  cfg.sign_length_std = 0.0;
  cfg.sign_length_mean = 12;
  const auto v = synth_generate(cfg)[0];
  const std::size_t b = v.annotation.segments[1].start;  // first frame of sign 2
  // Width 2: frames b-1 and b are blends; b-2 .. b+1 step linearly from A to B.
  for (std::size_t d = 0; d < 4; ++d) {
    const double a = v.features(b - 2, d), z = v.features(b + 1, d);
    for (int k = 0; k <= 3; ++k)
      EXPECT_NEAR(v.features(b - 2 + static_cast<std::size_t>(k), d), a + (z - a) * k / 3.0, 1e-6);
    EXPECT_NEAR(v.features(b - 3, d), a, 1e-6);
    EXPECT_NEAR(v.features(b + 2, d), z, 1e-6);
  }
}

TEST(SynthConfig, ValidateRejects) {
  SynthConfig c;
  c.feature_dim = 1;
  EXPECT_THROW(synth_generate(c), ConfigError);
  c = {};
  c.gap_probability = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.sign_length_mean = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

using CorpusFiles = TempDir;

TEST_F(CorpusFiles, SaveLoadRoundTripAndAlignmentErrors) {
  SynthConfig cfg;
  cfg.videos = 4;
  cfg.poses = true;
  const Corpus c = corpus_from_synth(synth_generate(cfg));
  save_corpus(path("c"), c);
  const Corpus back = load_corpus(path("c"), true, true);
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.features[i], c.features[i]);
    EXPECT_EQ(back.poses[i].coords, c.poses[i].coords);
  }
  EXPECT_EQ(back.poses[0].schema, upper_body_schema());
  EXPECT_EQ(c.slice(1, 2).ids(), (std::vector<std::string>{"synth_1", "synth_2"}));

  write_features(path("c/features/synth_0.sgf"), FeatureSequence<float>(3, 32));
  EXPECT_THROW(load_corpus(path("c")), AlignmentError);
  fs::remove(path("c/features/synth_0.sgf"));
  EXPECT_THROW(load_corpus(path("c")), FormatError);
}

}  // namespace
}  // namespace signseg
