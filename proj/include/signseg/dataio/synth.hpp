#pragma once

// Synthetic continuous-signing corpus. Every sign instance gets its own
// unit-norm embedding in R^D (and a hand configuration for pose output);
// with `vocabulary` > 0 signs are instead drawn from a gloss vocabulary whose
// glosses own the embeddings. Interior frames carry the embedding plus
// Gaussian noise, gap frames carry the zero vector ("rest"), and a moving
// average over `transition_width` + 1 frames turns every change into a linear
// cross-fade whose `transition_width` middle frames blend both sides.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "signseg/dataio/pose.hpp"
#include "signseg/errors.hpp"
#include "signseg/labeling.hpp"
#include "signseg/numerics/tensor.hpp"
#include "signseg/rng.hpp"

namespace signseg {

struct SynthConfig {
  std::size_t videos = 100;
  std::size_t min_signs = 3;
  std::size_t max_signs = 10;
  double sign_length_mean = 11.3;
  double sign_length_std = 8.5;
  std::size_t min_sign_length = 2;
  double gap_probability = 0.1;
  std::size_t gap_min = 1;
  std::size_t gap_max = 3;
  std::size_t feature_dim = 32;
  double noise_std = 0.3;
  std::size_t transition_width = 2;
  std::size_t vocabulary = 0;  // 0: fresh embedding per sign instance
  std::size_t signers = 10;
  bool poses = false;
  double pose_noise_std = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    if (min_signs < 1 || max_signs < min_signs) throw ConfigError("synth: bad signs-per-video range");
    if (min_sign_length < 1) throw ConfigError("synth: min_sign_length must be >= 1");
    if (!(sign_length_mean >= 2.0) || sign_length_mean < static_cast<double>(min_sign_length)) {
      throw ConfigError("synth: sign_length_mean must be >= max(2, min_sign_length)");
    }
    if (!(sign_length_std >= 0.0)) throw ConfigError("synth: sign_length_std must be >= 0");
    if (!(gap_probability >= 0.0 && gap_probability <= 1.0)) {
      throw ConfigError("synth: gap_probability must be in [0, 1]");
    }
    if (gap_min < 1 || gap_max < gap_min) throw ConfigError("synth: bad gap length range");
    if (feature_dim < 2) throw ConfigError("synth: feature_dim must be >= 2");
    if (!(noise_std >= 0.0) || !(pose_noise_std >= 0.0)) throw ConfigError("synth: noise must be >= 0");
    if (vocabulary == 1) throw ConfigError("synth: vocabulary must be 0 or >= 2");
    if (signers < 1) throw ConfigError("synth: signers must be >= 1");
  }
};

struct SynthVideo {
  SegmentAnnotation annotation;
  FeatureSequence<float> features;
  std::optional<PoseSequence<float>> pose;
};

/// Latent normal parameters whose rounded, clamped samples
/// max(min_len, round(N(mu, sigma))) have the requested mean and std.
struct LengthDistribution {
  double latent_mean = 0.0;
  double latent_std = 0.0;
  std::size_t min_length = 1;

  struct Moments {
    double mean;
    double std;
  };

  static double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

  /// Exact mean / std of the discrete distribution (summed over support).
  Moments moments() const {
    if (latent_std <= 0.0) {
      const double v = std::max(static_cast<double>(min_length), std::round(latent_mean));
      return {v, 0.0};
    }
    const double a = static_cast<double>(min_length);
    const double kmax = std::ceil(latent_mean + 12.0 * latent_std) + 1.0;
    double p = normal_cdf((a + 0.5 - latent_mean) / latent_std);
    double m1 = p * a, m2 = p * a * a;
    for (double k = a + 1.0; k <= kmax; k += 1.0) {
      p = normal_cdf((k + 0.5 - latent_mean) / latent_std) -
          normal_cdf((k - 0.5 - latent_mean) / latent_std);
      m1 += p * k;
      m2 += p * k * k;
    }
    return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
  }

  static LengthDistribution calibrate(double mean, double std, std::size_t min_length) {
    LengthDistribution d{mean, std, min_length};
    if (std <= 0.0) return d;
    for (int it = 0; it < 500; ++it) {
      const Moments m = d.moments();
      if (std::abs(m.mean - mean) < 1e-10 && std::abs(m.std - std) < 1e-10) break;
      d.latent_mean += mean - m.mean;
      d.latent_std = std::max(1e-3, d.latent_std * (m.std > 0.0 ? std / m.std : 2.0));
    }
    return d;
  }

  std::size_t sample(Rng& rng) const {
    const double x = latent_std > 0.0 ? rng.normal(latent_mean, latent_std) : latent_mean;
    const double r = std::round(x);
    return r < static_cast<double>(min_length) ? min_length : static_cast<std::size_t>(r);
  }
};

namespace detail {

inline std::vector<double> gloss_embedding(std::uint64_t seed, std::size_t gloss, std::size_t D) {
  Rng rng(derive_seed(seed, 0x10000000ULL + gloss));
  std::vector<double> e(D);
  double n2 = 0.0;
  for (double& v : e) {
    v = rng.normal();
    n2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (double& v : e) v *= inv;
  return e;
}

// Per-joint coordinates (x, y, z) for a gloss's hand configuration; static
// joints are shared, wrists and elbows move.
inline std::vector<double> gloss_pose(std::uint64_t seed, std::optional<std::size_t> gloss) {
  const std::array<double, 3> nose{0.0, 1.6, 0.05}, neck{0.0, 1.4, 0.0};
  const std::array<double, 3> rs{-0.2, 1.4, 0.0}, ls{0.2, 1.4, 0.0};
  std::array<double, 3> rw{-0.25, 0.85, 0.1}, lw{0.25, 0.85, 0.1};
  if (gloss) {
    Rng rng(derive_seed(seed, 0x20000000ULL + *gloss));
    rw = {rs[0] + rng.uniform(-0.1, 0.45), rs[1] + rng.uniform(-0.45, 0.25), rng.uniform(0.1, 0.5)};
    lw = {ls[0] + rng.uniform(-0.45, 0.1), ls[1] + rng.uniform(-0.45, 0.25), rng.uniform(0.1, 0.5)};
  }
  const auto elbow = [](const std::array<double, 3>& s, const std::array<double, 3>& w,
                        double side) {
    return std::array<double, 3>{0.5 * (s[0] + w[0]) + 0.12 * side, 0.5 * (s[1] + w[1]) - 0.08,
                                 0.5 * (s[2] + w[2])};
  };
  const auto re = elbow(rs, rw, -1.0), le = elbow(ls, lw, 1.0);
  std::vector<double> out;
  for (const auto& j : {nose, neck, rs, re, rw, ls, le, lw}) out.insert(out.end(), j.begin(), j.end());
  return out;
}

// Moving average over offsets [-floor(W/2), ceil(W/2)] with edge clamping.
// A step between frames b-1 and b becomes a linear ramp whose W interior
// frames b-ceil(W/2) .. b+floor(W/2)-1 are blends of both sides.
inline std::vector<std::vector<double>> box_filter(const std::vector<std::vector<double>>& x,
                                                   std::size_t width) {
  if (width == 0) return x;
  const auto T = static_cast<std::ptrdiff_t>(x.size());
  const std::size_t D = x.empty() ? 0 : x[0].size();
  const auto lo = -static_cast<std::ptrdiff_t>(width / 2);
  const auto hi = static_cast<std::ptrdiff_t>(width - width / 2);
  std::vector<std::vector<double>> out(x.size(), std::vector<double>(D, 0.0));
  const double inv = 1.0 / static_cast<double>(width + 1);
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    for (std::ptrdiff_t j = t + lo; j <= t + hi; ++j) {
      const auto& src = x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, T - 1))];
      for (std::size_t d = 0; d < D; ++d) out[t][d] += src[d] * inv;
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<SynthVideo> synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const LengthDistribution lengths =
      LengthDistribution::calibrate(cfg.sign_length_mean, cfg.sign_length_std, cfg.min_sign_length);
  Rng rng(derive_seed(cfg.seed, 0x5e7));
  std::vector<std::optional<std::vector<double>>> embeddings(cfg.vocabulary);
  std::vector<std::optional<std::vector<double>>> poses(cfg.vocabulary);
  const std::uint64_t instance_seed = derive_seed(cfg.seed, 0x1457);
  std::size_t instance = 0;
  const std::vector<double> rest_pose = detail::gloss_pose(cfg.seed, std::nullopt);
  const PoseSchema schema = upper_body_schema();

  std::vector<SynthVideo> out;
  out.reserve(cfg.videos);
  for (std::size_t v = 0; v < cfg.videos; ++v) {
    SynthVideo video;
    SegmentAnnotation& ann = video.annotation;
    ann.video_id = "synth_" + std::to_string(v);
    ann.signer = "signer_" + std::to_string(rng.index(cfg.signers));
    const auto n_signs = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(cfg.min_signs), static_cast<std::int64_t>(cfg.max_signs)));
    std::vector<long> region;  // sign index per frame, -1 for gap
    std::vector<std::vector<double>> sign_emb, sign_pose;
    std::size_t prev_gloss = cfg.vocabulary;
    for (std::size_t s = 0; s < n_signs; ++s) {
      if (s > 0 && rng.bernoulli(cfg.gap_probability)) {
        const auto gap = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(cfg.gap_min), static_cast<std::int64_t>(cfg.gap_max)));
        region.insert(region.end(), gap, -1);
      }
      std::optional<std::string> label;
      if (cfg.vocabulary > 0) {
        std::size_t gloss;
        do {
          gloss = rng.index(cfg.vocabulary);
        } while (gloss == prev_gloss);
        prev_gloss = gloss;
        if (!embeddings[gloss]) embeddings[gloss] = detail::gloss_embedding(cfg.seed, gloss, cfg.feature_dim);
        sign_emb.push_back(*embeddings[gloss]);
        if (cfg.poses) {
          if (!poses[gloss]) poses[gloss] = detail::gloss_pose(cfg.seed, gloss);
          sign_pose.push_back(*poses[gloss]);
        }
        label = "G" + std::to_string(gloss);
      } else {
        sign_emb.push_back(detail::gloss_embedding(instance_seed, instance, cfg.feature_dim));
        if (cfg.poses) sign_pose.push_back(detail::gloss_pose(instance_seed, instance));
        ++instance;
      }
      const std::size_t len = lengths.sample(rng);
      ann.segments.push_back({region.size(), region.size() + len - 1, label});
      region.insert(region.end(), len, static_cast<long>(s));
    }
    ann.num_frames = region.size();

    std::vector<std::vector<double>> clean(region.size());
    std::vector<std::vector<double>> clean_pose(cfg.poses ? region.size() : 0);
    for (std::size_t t = 0; t < region.size(); ++t) {
      if (region[t] < 0) {
        clean[t].assign(cfg.feature_dim, 0.0);
        if (cfg.poses) clean_pose[t] = rest_pose;
        continue;
      }
      const auto k = static_cast<std::size_t>(region[t]);
      clean[t] = sign_emb[k];
      if (cfg.poses) clean_pose[t] = sign_pose[k];
    }
    clean = detail::box_filter(clean, cfg.transition_width);
    video.features = FeatureSequence<float>(region.size(), cfg.feature_dim);
    for (std::size_t t = 0; t < region.size(); ++t)
      for (std::size_t d = 0; d < cfg.feature_dim; ++d)
        video.features(t, d) = static_cast<float>(clean[t][d] + (cfg.noise_std > 0.0 ? rng.normal(0.0, cfg.noise_std) : 0.0));
    if (cfg.poses) {
      clean_pose = detail::box_filter(clean_pose, cfg.transition_width);
      PoseSequence<float> pose{Tensor2<float>(region.size(), 3 * schema.size()), schema};
      for (std::size_t t = 0; t < region.size(); ++t)
        for (std::size_t d = 0; d < 3 * schema.size(); ++d)
          pose.coords(t, d) = static_cast<float>(
              clean_pose[t][d] + (cfg.pose_noise_std > 0.0 ? rng.normal(0.0, cfg.pose_noise_std) : 0.0));
      video.pose = std::move(pose);
    }
    out.push_back(std::move(video));
  }
  return out;
}

}  // namespace signseg
