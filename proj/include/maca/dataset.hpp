/*
 * Copyright 2026 The maca Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MACA_DATASET_HPP_
#define MACA_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "maca/binary_io.hpp"
#include "maca/core.hpp"
#include "maca/error.hpp"
#include "maca/observation.hpp"
#include "maca/orca.hpp"
#include "maca/partition.hpp"
#include "maca/random.hpp"
#include "maca/sensing.hpp"

namespace maca {

inline constexpr std::size_t kInputDim = kObservationDim + 2;

struct FrameMeta {
  float protectRadius = 0.0f;
  float timeHorizon = 0.0f;
  std::uint16_t neighborCount = 0;
  float noiseSigma = 0.0f;

  friend bool operator==(const FrameMeta&, const FrameMeta&) = default;
};

/// World snapshot a frame was generated from. Only freshly generated frames
/// carry one; it is never written to disk.
struct FrameScene {
  AgentState self;
  std::vector<AgentState> neighbors;
  Vec2 vPref;
  Vec2 vNew;  // expert velocity, global frame
  double tau = 0.1;
};

/// One training example in the agent's heading-aligned frame.
struct Frame {
  std::vector<float> observation = std::vector<float>(kObservationDim, 0.0f);
  Vec2 prefVelocity;    // rotated (v_pref - v)
  Vec2 expertVelocity;  // rotated (v+ - v)
  int label = 0;
  FrameMeta meta;
  std::optional<FrameScene> scene;

  /// Network input: observation ++ prefVelocity.
  std::vector<double> input() const {
    std::vector<double> x(kInputDim);
    std::copy(observation.begin(), observation.end(), x.begin());
    x[kObservationDim] = prefVelocity.x;
    x[kObservationDim + 1] = prefVelocity.y;
    return x;
  }

  /// Compares the stored record; the in-memory scene is ignored.
  friend bool operator==(const Frame& a, const Frame& b) {
    return a.observation == b.observation && a.prefVelocity == b.prefVelocity &&
           a.expertVelocity == b.expertVelocity && a.label == b.label && a.meta == b.meta;
  }
};

/// Data-generation settings. Defaults follow the published sweep.
struct GenConfig {
  OrcaParams base{3.5, 10, 3.0, 0.5, 0.2, 1.0, 1.0};
  std::vector<double> protectRadii{0.2, 0.5};
  std::vector<double> timeHorizons{0.5, 1.0, 2.0};
  int minNeighbors = 3;
  int maxNeighbors = 10;
  double noiseMin = 0.01;
  double noiseMax = 0.05;
  double tau = 0.1;
  int placementAttempts = 100;
  double outlierSpeedFraction = 0.99;
  CpdConfig cpd;
  VelocityPartition partition;

  void validate() const {
    base.validate();
    if (protectRadii.empty() || timeHorizons.empty()) throw InvalidArgument("GenConfig: empty parameter sweep");
    for (double r : protectRadii) {
      OrcaParams p = base;
      p.protectRadius = r;
      p.validate();
    }
    for (double h : timeHorizons) {
      if (!(h > 0.0)) throw InvalidArgument("GenConfig: time horizons must be positive");
    }
    if (minNeighbors < 1 || maxNeighbors < minNeighbors) throw InvalidArgument("GenConfig: bad neighbour range");
    if (!(noiseMin >= 0.0 && noiseMax >= noiseMin)) throw InvalidArgument("GenConfig: bad noise range");
    if (!(tau > 0.0)) throw InvalidArgument("GenConfig: tau must be positive");
  }
};

namespace detail {

inline Vec2 to_f32(const Vec2& v) { return {static_cast<float>(v.x), static_cast<float>(v.y)}; }

}  // namespace detail

/// One ORCA frame around an agent at the origin, or nullopt when the random
/// neighbour placement could not be completed.
template <class RngT>
std::optional<Frame> generate_frame(const GenConfig& cfg, RngT& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_int_distribution<std::size_t> pick_radius(0, cfg.protectRadii.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_horizon(0, cfg.timeHorizons.size() - 1);
  std::uniform_int_distribution<int> pick_count(cfg.minNeighbors, cfg.maxNeighbors);
  std::uniform_real_distribution<double> pick_noise(cfg.noiseMin, cfg.noiseMax);

  OrcaParams params = cfg.base;
  params.protectRadius = cfg.protectRadii[pick_radius(rng)];
  params.timeHorizon = cfg.timeHorizons[pick_horizon(rng)];
  const int count = pick_count(rng);
  const double sigma = pick_noise(rng);

  FrameScene scene;
  scene.tau = cfg.tau;
  scene.self.id = 0;
  scene.self.params = params;
  const double pref_angle = angle(rng);
  scene.vPref = params.maxSpeed * Vec2{std::cos(pref_angle), std::sin(pref_angle)};

  const double min_gap = 2.0 * params.radius;
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.placementAttempts && !placed; ++attempt) {
      const double r = params.neighborDist * std::sqrt(unit(rng));
      const double a = angle(rng);
      const Vec2 p{r * std::cos(a), r * std::sin(a)};
      bool clear = abs(p) >= min_gap;
      for (const AgentState& o : scene.neighbors) clear = clear && abs(p - o.position) >= min_gap;
      if (!clear) continue;
      AgentState n;
      n.id = k + 1;
      n.position = p;
      n.params = params;
      scene.neighbors.push_back(n);
      placed = true;
    }
    if (!placed) return std::nullopt;
  }

  auto sample_velocity = [&]() {
    const double s = params.maxSpeed * unit(rng);
    const double a = angle(rng);
    return Vec2{s * std::cos(a), s * std::sin(a)};
  };
  scene.self.velocity = sample_velocity();
  for (AgentState& n : scene.neighbors) n.velocity = sample_velocity();

  scene.vNew = orca_velocity(scene.self, scene.neighbors, {}, scene.vPref, cfg.tau);

  // Previous step: everyone rewound by one cycle along the sampled velocity.
  AgentState self_prev = scene.self;
  self_prev.position -= cfg.tau * scene.self.velocity;
  std::vector<AgentState> neighbors_prev = scene.neighbors;
  for (AgentState& n : neighbors_prev) n.position -= cfg.tau * n.velocity;

  const Scan curr = perturb_scan(raycast_scan(scene.self, scene.neighbors, {}), sigma, rng);
  const Scan prev = perturb_scan(raycast_scan(self_prev, neighbors_prev, {}), sigma, rng);
  Observation obs{curr, estimate_flow(prev, curr, cfg.tau, cfg.tau * scene.self.velocity, cfg.cpd)};

  const LocalInput local = to_local_frame(scene.self, obs, scene.vPref);
  Frame f;
  const std::vector<double> flat = local.obs.flatten();
  std::transform(flat.begin(), flat.end(), f.observation.begin(), [](double v) { return static_cast<float>(v); });
  f.prefVelocity = detail::to_f32(local.v_pref);
  f.expertVelocity = detail::to_f32(global_to_increment(scene.vNew, scene.self.velocity, local.frame.heading));
  f.label = cfg.partition.label(f.expertVelocity);
  f.meta.protectRadius = static_cast<float>(params.protectRadius);
  f.meta.timeHorizon = static_cast<float>(params.timeHorizon);
  f.meta.neighborCount = static_cast<std::uint16_t>(count);
  f.meta.noiseSigma = static_cast<float>(sigma);
  f.scene = std::move(scene);
  return f;
}

/// True when the frame survives cleansing: no physical collision after one
/// step and an expert speed clearly below maxSpeed.
inline bool keep_frame(const Frame& f, double outlier_fraction = 0.99) {
  if (!f.scene) throw InvalidArgument("cleanse: frame carries no scene to re-simulate");
  const FrameScene& s = *f.scene;
  if (abs(s.vNew) >= outlier_fraction * s.self.params.maxSpeed) return false;
  const Vec2 p = s.self.position + s.tau * s.vNew;
  for (const AgentState& n : s.neighbors) {
    const Vec2 q = n.position + s.tau * n.velocity;
    if (abs(p - q) < s.self.params.radius + n.params.radius) return false;
  }
  return true;
}

inline std::vector<Frame> cleanse(std::vector<Frame> frames, double outlier_fraction = 0.99) {
  std::vector<Frame> out;
  out.reserve(frames.size());
  for (Frame& f : frames) {
    if (keep_frame(f, outlier_fraction)) out.push_back(std::move(f));
  }
  return out;
}

/// Reflection across the heading axis.
inline Frame mirror_frame(const Frame& f, const VelocityPartition& partition = {}) {
  Frame m;
  for (std::size_t i = 0; i < kBeams; ++i) {
    const std::size_t j = (kBeams - i) % kBeams;
    m.observation[j] = f.observation[i];
    m.observation[kBeams + 2 * j] = f.observation[kBeams + 2 * i];
    m.observation[kBeams + 2 * j + 1] = -f.observation[kBeams + 2 * i + 1];
  }
  m.prefVelocity = {f.prefVelocity.x, -f.prefVelocity.y};
  m.expertVelocity = {f.expertVelocity.x, -f.expertVelocity.y};
  m.label = partition.label(m.expertVelocity);
  m.meta = f.meta;
  return m;
}

/// originals ++ mirrored ++ `noise_copies` noisy variants of each original.
/// Noise touches hit ranges only; stored flow is reused.
template <class RngT>
std::vector<Frame> augment(const std::vector<Frame>& frames, int noise_copies, double sigma, RngT& rng,
                           const VelocityPartition& partition = {}, double min_range = 0.2,
                           double max_range = kDefaultMaxRange) {
  if (noise_copies < 0) throw InvalidArgument("augment: noiseCopies must be >= 0");
  if (!(sigma >= 0.0)) throw InvalidArgument("augment: sigma must be >= 0");
  std::vector<Frame> out;
  out.reserve(frames.size() * static_cast<std::size_t>(2 + noise_copies));
  auto stored = [](const Frame& f) { return Frame{f.observation, f.prefVelocity, f.expertVelocity, f.label, f.meta, {}}; };
  for (const Frame& f : frames) out.push_back(stored(f));
  for (const Frame& f : frames) out.push_back(mirror_frame(f, partition));
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  for (const Frame& f : frames) {
    for (int c = 0; c < noise_copies; ++c) {
      Frame n = stored(f);
      if (sigma > 0.0) {
        for (std::size_t i = 0; i < kBeams; ++i) {
          if (n.observation[i] >= static_cast<float>(max_range)) continue;
          const double r = std::clamp(n.observation[i] + noise(rng), min_range, max_range);
          n.observation[i] = static_cast<float>(r);
        }
      }
      out.push_back(std::move(n));
    }
  }
  return out;
}

/// Per-feature z-score over observation ++ prefVelocity.
struct Standardizer {
  std::vector<double> mean = std::vector<double>(kInputDim, 0.0);
  std::vector<double> std = std::vector<double>(kInputDim, 1.0);

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != mean.size()) throw InvalidArgument("Standardizer: input has wrong length");
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean[i]) / std[i];
    return y;
  }
};

inline constexpr double kConstantFeatureStd = 1e-12;

inline Standardizer fit_standardizer(std::span<const Frame> frames) {
  if (frames.size() < 2) throw InvalidArgument("fit_standardizer: need at least 2 frames");
  Standardizer s;
  const double n = static_cast<double>(frames.size());
  std::vector<double> sum(kInputDim, 0.0);
  for (const Frame& f : frames) {
    const auto x = f.input();
    for (std::size_t i = 0; i < kInputDim; ++i) sum[i] += x[i];
  }
  for (std::size_t i = 0; i < kInputDim; ++i) s.mean[i] = sum[i] / n;
  std::vector<double> sq(kInputDim, 0.0);
  for (const Frame& f : frames) {
    const auto x = f.input();
    for (std::size_t i = 0; i < kInputDim; ++i) {
      const double d = x[i] - s.mean[i];
      sq[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < kInputDim; ++i) {
    const double sd = std::sqrt(sq[i] / n);
    s.std[i] = sd > kConstantFeatureStd ? sd : 1.0;
  }
  return s;
}

inline std::vector<double> apply_standardizer(const Standardizer& s, std::span<const double> x) { return s.apply(x); }

// ---------------------------------------------------------------------------
// Dataset file

inline constexpr char kDatasetMagic[4] = {'M', 'A', 'C', 'A'};
inline constexpr std::uint16_t kDatasetVersion = 1;

inline void write_dataset(std::ostream& os, std::span<const Frame> frames) {
  os.write(kDatasetMagic, 4);
  io::put_u16(os, kDatasetVersion);
  io::put_u64(os, frames.size());
  io::put_u32(os, static_cast<std::uint32_t>(kObservationDim));
  io::put_u16(os, static_cast<std::uint16_t>(VelocityPartition::kClasses));
  for (const Frame& f : frames) {
    if (f.observation.size() != kObservationDim) throw InvalidArgument("write_dataset: bad observation length");
    for (float v : f.observation) io::put_f32(os, v);
    io::put_f32(os, static_cast<float>(f.prefVelocity.x));
    io::put_f32(os, static_cast<float>(f.prefVelocity.y));
    io::put_f32(os, static_cast<float>(f.expertVelocity.x));
    io::put_f32(os, static_cast<float>(f.expertVelocity.y));
    io::put_u16(os, static_cast<std::uint16_t>(f.label));
    io::put_f32(os, f.meta.protectRadius);
    io::put_f32(os, f.meta.timeHorizon);
    io::put_u16(os, f.meta.neighborCount);
    io::put_f32(os, f.meta.noiseSigma);
  }
  if (!os) throw FormatError("write_dataset: stream error");
}

inline std::vector<Frame> read_dataset(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kDatasetMagic)) throw FormatError("dataset: bad magic");
  if (io::get_u16(is) != kDatasetVersion) throw FormatError("dataset: unsupported version");
  const std::uint64_t count = io::get_u64(is);
  if (io::get_u32(is) != kObservationDim) throw FormatError("dataset: unexpected observation dim");
  if (io::get_u16(is) != VelocityPartition::kClasses) throw FormatError("dataset: unexpected class count");
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 22)));
  for (std::uint64_t k = 0; k < count; ++k) {
    Frame f;
    for (float& v : f.observation) v = io::get_f32(is);
    f.prefVelocity.x = io::get_f32(is);
    f.prefVelocity.y = io::get_f32(is);
    f.expertVelocity.x = io::get_f32(is);
    f.expertVelocity.y = io::get_f32(is);
    f.label = io::get_u16(is);
    if (f.label >= VelocityPartition::kClasses) throw FormatError("dataset: label out of range");
    f.meta.protectRadius = io::get_f32(is);
    f.meta.timeHorizon = io::get_f32(is);
    f.meta.neighborCount = io::get_u16(is);
    f.meta.noiseSigma = io::get_f32(is);
    frames.push_back(std::move(f));
  }
  return frames;
}

inline void write_dataset(const std::string& path, std::span<const Frame> frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_dataset(os, frames);
}

inline std::vector<Frame> read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_dataset(is);
}

// ---------------------------------------------------------------------------
// Pipeline

struct BuildStats {
  std::uint64_t attempted = 0;  // frame indices consumed
  std::uint64_t rejected = 0;   // placement failures
  std::uint64_t cleansed = 0;   // dropped by cleanse
  std::uint64_t kept = 0;
};

/// Generates frames from per-index random streams until `target` frames survive
/// cleansing. Output depends only on (cfg, target, seed), not on `threads`.
inline std::vector<Frame> generate_cleansed(const GenConfig& cfg, std::size_t target, std::uint64_t seed,
                                            unsigned threads = 1, BuildStats* stats = nullptr) {
  cfg.validate();
  std::vector<Frame> kept;
  BuildStats st;
  threads = std::max(1u, threads);
  const std::size_t batch = std::max<std::size_t>(64, 16 * threads);
  std::uint64_t next = 0;
  while (kept.size() < target) {
    std::vector<std::optional<Frame>> out(batch);
    auto work = [&](unsigned t) {
      for (std::size_t k = t; k < batch; k += threads) {
        Rng rng = make_stream(seed, {next + k});
        out[k] = generate_frame(cfg, rng);
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }
    for (std::size_t k = 0; k < batch && kept.size() < target; ++k) {
      ++st.attempted;
      if (!out[k]) {
        ++st.rejected;
        continue;
      }
      if (!keep_frame(*out[k], cfg.outlierSpeedFraction)) {
        ++st.cleansed;
        continue;
      }
      kept.push_back(std::move(*out[k]));
    }
    next += batch;
  }
  st.kept = kept.size();
  if (stats) *stats = st;
  return kept;
}

}  // namespace maca

#endif  // MACA_DATASET_HPP_
