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

#ifndef MACA_CORE_HPP_
#define MACA_CORE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "maca/error.hpp"
#include "maca/observation.hpp"
#include "maca/vec2.hpp"

namespace maca {

/// Tunable ORCA parameters of one agent.
struct OrcaParams {
  double maxSpeed = 3.5;        // m/s
  int maxNeighbors = 10;
  double neighborDist = 3.0;    // m
  double protectRadius = 0.5;   // m, inflated radius used by the constraints
  double radius = 0.2;          // m, physical radius
  double timeHorizon = 1.0;     // s
  double timeHorizonObs = 1.0;  // s

  void validate() const {
    auto fail = [](const char* what) { throw InvalidArgument(std::string("OrcaParams: ") + what); };
    if (!(maxSpeed > 0.0)) fail("maxSpeed must be positive");
    if (!(radius > 0.0)) fail("radius must be positive");
    if (!(protectRadius >= radius)) fail("protectRadius must be >= radius");
    if (!(neighborDist > 2.0 * protectRadius)) fail("neighborDist must exceed 2*protectRadius");
    if (!(timeHorizon > 0.0)) fail("timeHorizon must be positive");
    if (!(timeHorizonObs > 0.0)) fail("timeHorizonObs must be positive");
    if (maxNeighbors < 1) fail("maxNeighbors must be >= 1");
  }

  friend bool operator==(const OrcaParams&, const OrcaParams&) = default;
};

struct AgentState {
  int id = 0;
  Vec2 position;
  Vec2 velocity;
  Vec2 goal;
  OrcaParams params;
};

/// Static obstacle: a simple polygon with counter-clockwise vertices.
struct Obstacle {
  std::vector<Vec2> vertices;

  double signed_area() const {
    double a = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      a += det(vertices[i], vertices[(i + 1) % vertices.size()]);
    }
    return 0.5 * a;
  }

  bool contains(const Vec2& p) const {
    bool inside = false;
    for (std::size_t i = 0, j = vertices.size() - 1; i < vertices.size(); j = i++) {
      const Vec2& a = vertices[i];
      const Vec2& b = vertices[j];
      if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
        inside = !inside;
      }
    }
    return inside;
  }

  /// Distance from p to the polygon boundary, negated when p is inside.
  double signed_distance(const Vec2& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      best = std::min(best, dist_sq_point_segment(vertices[i], vertices[(i + 1) % vertices.size()], p));
    }
    const double d = std::sqrt(best);
    return contains(p) ? -d : d;
  }

  void validate() const {
    if (vertices.size() < 3) throw InvalidArgument("Obstacle: needs at least 3 vertices");
    if (!(signed_area() > 0.0)) throw InvalidArgument("Obstacle: vertices must be counter-clockwise");
    const std::size_t n = vertices.size();
    auto cross = [](Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
      const double d1 = det(b - a, c - a), d2 = det(b - a, d - a);
      const double d3 = det(d - c, a - c), d4 = det(d - c, b - c);
      return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (cross(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n])) {
          throw InvalidArgument("Obstacle: polygon self-intersects");
        }
      }
    }
  }
};

/// Axis-aligned rectangle as a counter-clockwise obstacle.
inline Obstacle make_box(Vec2 lo, Vec2 hi) {
  return Obstacle{{lo, {hi.x, lo.y}, hi, {lo.x, hi.y}}};
}

/// Maps an angle to [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  double r = a - std::numbers::pi;
  if (r >= std::numbers::pi) r -= kTwoPi;
  return r;
}

/// Agent-centred frame whose +x axis follows the agent's heading.
struct LocalFrame {
  Vec2 origin;
  double heading = 0.0;  // radians, in [-pi, pi)

  /// Number of whole beams the scan is index-rotated by.
  int beam_shift() const {
    const long deg = std::lround(heading * 180.0 / std::numbers::pi);
    return static_cast<int>(((deg % 360) + 360) % 360);
  }
};

inline constexpr double kStillSpeed = 1e-6;

/// Heading from the current velocity, else from v_pref, else global +x.
inline double heading_of(const Vec2& velocity, const Vec2& v_pref) {
  if (abs(velocity) >= kStillSpeed) return wrap_angle(std::atan2(velocity.y, velocity.x));
  if (abs(v_pref) >= kStillSpeed) return wrap_angle(std::atan2(v_pref.y, v_pref.x));
  return 0.0;
}

/// Goal-directed velocity, capped so the agent never overshoots in one cycle.
inline Vec2 preferred_velocity(const Vec2& position, const Vec2& goal, const OrcaParams& params, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("preferred_velocity: tau must be positive");
  const Vec2 to_goal = goal - position;
  const double dist = abs(to_goal);
  if (dist <= 0.0) return {};
  const double speed = std::min(params.maxSpeed, dist / tau);
  return to_goal * (speed / dist);
}

struct LocalInput {
  Observation obs;
  Vec2 v_pref;  // rotated (v_pref - v)
  LocalFrame frame;
};

namespace detail {

inline Scan shift_scan(const Scan& in, int shift) {
  Scan out = in;
  for (std::size_t j = 0; j < kBeams; ++j) {
    const std::size_t src = (j + static_cast<std::size_t>(shift)) % kBeams;
    out.ranges[j] = in.ranges[src];
    out.hit[j] = in.hit[src];
  }
  return out;
}

inline ScanFlow shift_rotate_flow(const ScanFlow& in, int shift, double angle) {
  ScanFlow out;
  for (std::size_t j = 0; j < kBeams; ++j) {
    const std::size_t src = (j + static_cast<std::size_t>(shift)) % kBeams;
    out.velocities[j] = rotate(in.velocities[src], angle);
  }
  return out;
}

}  // namespace detail

/// Local frame of an agent given its velocity and preferred velocity.
inline LocalFrame local_frame_of(const AgentState& agent, const Vec2& v_pref) {
  return {agent.position, heading_of(agent.velocity, v_pref)};
}

/// Re-expresses a world-aligned observation and the preferred velocity in the
/// agent's heading-aligned frame. Flow vectors are rotated only: they stay
/// velocities of the scanned points, not relative to the agent.
inline LocalInput to_local_frame(const AgentState& agent, const Observation& obs, const Vec2& v_pref) {
  LocalInput out;
  out.frame = local_frame_of(agent, v_pref);
  const int shift = out.frame.beam_shift();
  out.obs.scan = detail::shift_scan(obs.scan, shift);
  out.obs.flow = detail::shift_rotate_flow(obs.flow, shift, -out.frame.heading);
  out.v_pref = rotate(v_pref - agent.velocity, -out.frame.heading);
  return out;
}

/// Local velocity increment -> global velocity.
inline Vec2 increment_to_global(const Vec2& local_increment, const Vec2& velocity, double heading) {
  return velocity + rotate(local_increment, heading);
}

/// Global velocity -> local increment (rotated v - velocity).
inline Vec2 global_to_increment(const Vec2& v, const Vec2& velocity, double heading) {
  return rotate(v - velocity, -heading);
}

/// Inverse of to_local_frame for the same agent velocity.
inline std::pair<Observation, Vec2> from_local_frame(const LocalInput& local, const Vec2& velocity) {
  const int shift = local.frame.beam_shift();
  const int back = static_cast<int>((kBeams - static_cast<std::size_t>(shift)) % kBeams);
  Observation obs;
  obs.scan = detail::shift_scan(local.obs.scan, back);
  obs.flow = detail::shift_rotate_flow(local.obs.flow, back, local.frame.heading);
  return {obs, increment_to_global(local.v_pref, velocity, local.frame.heading)};
}

}  // namespace maca

#endif  // MACA_CORE_HPP_
