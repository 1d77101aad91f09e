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

#ifndef MACA_POLICY_HPP_
#define MACA_POLICY_HPP_

#include <cmath>
#include <limits>
#include <vector>

#include "maca/canet.hpp"
#include "maca/core.hpp"
#include "maca/error.hpp"
#include "maca/partition.hpp"
#include "maca/sensing.hpp"
#include "maca/vec2.hpp"

namespace maca {

struct PolicyConfig {
  int samplesPerClass = 10;
  double marginHorizon = 0.1;  // s
  int slowdownSteps = 8;
  bool advectScan = true;  // false: scan points treated as static

  void validate() const {
    if (samplesPerClass < 1 || !(marginHorizon > 0.0) || slowdownSteps < 1) {
      throw InvalidArgument("PolicyConfig: invalid values");
    }
  }
};

inline constexpr double kNoHitMargin = std::numeric_limits<double>::infinity();

/// Smallest clearance between an agent disc swept along `velocity` for
/// `horizon` seconds and the scan's return points, each moving with its flow.
/// Everything is in the agent-centred frame the scan is expressed in.
inline double swept_margin(const Observation& obs, const Vec2& velocity, double radius, double horizon, bool advect) {
  double margin = kNoHitMargin;
  for (std::size_t i = 0; i < kBeams; ++i) {
    if (!obs.scan.hit[i]) continue;
    const Vec2 p = obs.scan.ranges[i] * beam_direction(i);
    const Vec2 rel = (advect ? obs.flow.velocities[i] : Vec2{}) - velocity;
    const double d = std::sqrt(dist_sq_point_segment(p, p + horizon * rel, Vec2{}));
    margin = std::min(margin, d - radius);
  }
  return margin;
}

struct Selection {
  Vec2 velocity;       // global frame
  int predictedClass = 0;
  double margin = kNoHitMargin;
  int slowdownSteps = 0;  // steps applied, 0 when the candidate was safe
};

/// Model input for a heading-aligned observation: flattened observation and
/// local v_pref, rounded through f32 like stored frames, then standardized.
inline std::vector<double> policy_input(const CANetModel& model, const LocalInput& local) {
  std::vector<double> x = local.obs.flatten();
  x.push_back(local.v_pref.x);
  x.push_back(local.v_pref.y);
  for (double& v : x) v = static_cast<double>(static_cast<float>(v));
  return model.standardizer.apply(x);
}

inline int argmax_lowest(std::span<const double> probs) {
  int best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c) {
    if (probs[c] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

/// Learned reactive controller: classify, sample increments inside the class,
/// keep the candidate with the largest swept margin, slow it down if unsafe.
template <class RngT>
Selection select_velocity_detailed(const CANetModel& model, const VelocityPartition& partition, const LocalInput& local,
                                   const AgentState& agent, const PolicyConfig& cfg, RngT& rng) {
  cfg.validate();
  const std::vector<double> x = policy_input(model, local);
  const ForwardResult fr = forward(model, x, Mode::Eval, rng);

  Selection out;
  out.predictedClass = argmax_lowest(fr.probs);
  const double heading = local.frame.heading;
  const Vec2 v_local = rotate(agent.velocity, -heading);
  const double max_speed = agent.params.maxSpeed;
  const double radius = agent.params.radius;

  Vec2 best;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.samplesPerClass; ++k) {
    const Vec2 cand = clamp_length(v_local + partition.sample(out.predictedClass, rng), max_speed);
    const double m = swept_margin(local.obs, cand, radius, cfg.marginHorizon, cfg.advectScan);
    if (m > best_margin) {
      best_margin = m;
      best = cand;
    }
  }

  Vec2 chosen = best;
  double margin = best_margin;
  for (int s = 1; margin < 0.0 && s <= cfg.slowdownSteps; ++s) {
    chosen = s == cfg.slowdownSteps ? Vec2{} : best * (1.0 - static_cast<double>(s) / cfg.slowdownSteps);
    margin = swept_margin(local.obs, chosen, radius, cfg.marginHorizon, cfg.advectScan);
    out.slowdownSteps = s;
  }
  out.velocity = rotate(chosen, heading);
  if (out.slowdownSteps == cfg.slowdownSteps) out.velocity = {};
  out.margin = margin;
  return out;
}

template <class RngT>
Vec2 select_velocity(const CANetModel& model, const VelocityPartition& partition, const LocalInput& local,
                     const AgentState& agent, const PolicyConfig& cfg, RngT& rng) {
  return select_velocity_detailed(model, partition, local, agent, cfg, rng).velocity;
}

/// One sensing-acting update: p += v*tau, v = chosen.
inline AgentState apply_cycle(AgentState agent, const Vec2& chosen, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("apply_cycle: tau must be positive");
  agent.position += tau * chosen;
  agent.velocity = chosen;
  return agent;
}

}  // namespace maca

#endif  // MACA_POLICY_HPP_
