#pragma once

#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "signseg/errors.hpp"
#include "signseg/labeling.hpp"
#include "signseg/rng.hpp"

namespace signseg {

struct SampleMoments {
  double mean = 0.0;
  double std = 0.0;  // sample (n-1) standard deviation; 0 for a single value
};

inline SampleMoments sample_moments(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() == 1) return {m, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0))};
}

/// Corpus statistics laid out like a dataset-statistics table: per-sign,
/// per-video and per-gloss rows plus totals.
struct DatasetStats {
  SampleMoments frames_per_sign;
  SampleMoments frames_per_video;
  SampleMoments signs_per_video;
  std::size_t total_videos = 0;
  std::size_t total_signs = 0;
  std::size_t total_signers = 0;
  std::size_t total_unique_glosses = 0;
};

inline DatasetStats dataset_stats(const std::vector<SegmentAnnotation>& anns) {
  if (anns.empty()) throw ArityError("dataset_stats: no annotations");
  std::vector<double> sign_len, video_len, signs;
  std::set<std::string> signers, glosses;
  for (const auto& a : anns) {
    video_len.push_back(static_cast<double>(a.num_frames));
    signs.push_back(static_cast<double>(a.segments.size()));
    if (a.signer) signers.insert(*a.signer);
    for (const auto& s : a.segments) {
      sign_len.push_back(static_cast<double>(s.length()));
      if (s.gloss) glosses.insert(*s.gloss);
    }
  }
  DatasetStats st;
  st.frames_per_sign = sample_moments(sign_len);
  st.frames_per_video = sample_moments(video_len);
  st.signs_per_video = sample_moments(signs);
  st.total_videos = anns.size();
  st.total_signs = sign_len.size();
  st.total_signers = signers.size();
  st.total_unique_glosses = glosses.size();
  return st;
}

inline nlohmann::ordered_json to_json(const DatasetStats& s) {
  const auto ms = [](const SampleMoments& m) {
    return nlohmann::ordered_json{{"mean", m.mean}, {"std", m.std}};
  };
  nlohmann::ordered_json j;
  j["avg_frames_per_sign"] = ms(s.frames_per_sign);
  j["avg_frames_per_video"] = ms(s.frames_per_video);
  j["avg_glosses_per_video"] = ms(s.signs_per_video);
  j["total_videos"] = s.total_videos;
  j["total_signs"] = s.total_signs;
  j["total_signers"] = s.total_signers;
  j["total_unique_glosses"] = s.total_unique_glosses;
  return j;
}

enum class SplitMode { kRandom, kBySigner };

/// Assigns each video a split index. Random mode shuffles videos and cuts at
/// the rounded cumulative ratios; by-signer mode shuffles signers and places
/// each signer's videos, whole, into the split furthest below its target.
inline std::vector<std::size_t> split_dataset(const std::vector<SegmentAnnotation>& anns,
                                              const std::vector<double>& ratios, SplitMode mode,
                                              std::uint64_t seed) {
  if (ratios.empty()) throw ArgumentError("split_dataset: no ratios");
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ArgumentError("split_dataset: ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("split_dataset: ratios must sum to 1");
  const std::size_t n = anns.size();
  std::vector<std::size_t> assign(n, 0);
  Rng rng(derive_seed(seed, 0x5b17));

  if (mode == SplitMode::kRandom) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    double cum = 0.0;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < ratios.size(); ++k) {
      cum += ratios[k];
      const std::size_t stop =
          k + 1 == ratios.size() ? n : static_cast<std::size_t>(std::llround(cum * static_cast<double>(n)));
      for (; pos < stop && pos < n; ++pos) assign[order[pos]] = k;
    }
    return assign;
  }

  std::vector<std::string> signers;
  for (std::size_t i = 0; i < n; ++i) {
    if (!anns[i].signer) {
      throw ArgumentError("split_dataset: by-signer mode needs a signer id for video '" +
                          anns[i].video_id + "'");
    }
    signers.push_back(*anns[i].signer);
  }
  std::vector<std::string> unique(signers.begin(), signers.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  rng.shuffle(unique.begin(), unique.end());
  std::vector<double> filled(ratios.size(), 0.0);
  for (const std::string& who : unique) {
    std::size_t videos = 0;
    for (const auto& s : signers) videos += s == who;
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t k = 0; k < ratios.size(); ++k) {
      const double deficit = ratios[k] * static_cast<double>(n) - filled[k];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = k;
      }
    }
    filled[best] += static_cast<double>(videos);
    for (std::size_t i = 0; i < n; ++i)
      if (signers[i] == who) assign[i] = best;
  }
  return assign;
}

}  // namespace signseg
