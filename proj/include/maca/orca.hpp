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

#ifndef MACA_ORCA_HPP_
#define MACA_ORCA_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "maca/core.hpp"
#include "maca/error.hpp"
#include "maca/vec2.hpp"

namespace maca {

/// Velocity-space half-plane {v : dot(v - point, normal) >= 0}.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;  // unit, into the permitted side

  double slack(const Vec2& v) const { return dot(v - point, normal); }
};

/// Truncated cone of relative velocities that collide within the horizon.
struct VelocityObstacle {
  Vec2 apexOffset;    // relative position / horizon (centre of the cut-off disc)
  double discRadius;  // combined radius / horizon
};

/// ORCA constraint together with the smallest relative-velocity change u
/// that leaves the velocity obstacle.
struct AgentConstraint {
  HalfPlane plane;
  Vec2 u;
  VelocityObstacle vo;
};

namespace detail {

inline constexpr double kLpEpsilon = 1e-10;

// Oriented line; the permitted side is to the left of `direction`.
struct Line {
  Vec2 point;
  Vec2 direction;
};

inline Line to_line(const HalfPlane& h) { return {h.point, {h.normal.y, -h.normal.x}}; }
inline HalfPlane to_half_plane(const Line& l) { return {l.point, perp_left(l.direction)}; }

// Optimum on line `line_no` subject to lines [0, line_no) and the speed disc.
inline bool linear_program1(std::span<const Line> lines, std::size_t line_no, double radius,
                            const Vec2& opt_velocity, bool direction_opt, Vec2& result) {
  const Line& line = lines[line_no];
  const double dot_product = dot(line.point, line.direction);
  const double discriminant = dot_product * dot_product + radius * radius - abs_sq(line.point);

  if (discriminant < 0.0) return false;  // speed disc misses the line

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(line.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, line.point - lines[i].point);

    if (std::fabs(denominator) <= kLpEpsilon) {
      // parallel
      if (numerator < 0.0) return false;
      continue;
    }

    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = dot(opt_velocity, line.direction) > 0.0 ? line.point + t_right * line.direction
                                                     : line.point + t_left * line.direction;
  } else {
    const double t = dot(line.direction, opt_velocity - line.point);
    const double tc = std::clamp(t, t_left, t_right);
    result = line.point + tc * line.direction;
  }
  return true;
}

// Incremental randomized-order-free 2D LP. Returns lines.size() on success,
// otherwise the index of the first line that made the program infeasible.
inline std::size_t linear_program2(std::span<const Line> lines, double radius, const Vec2& opt_velocity,
                                   bool direction_opt, Vec2& result) {
  if (direction_opt) {
    result = opt_velocity * radius;
  } else if (abs_sq(opt_velocity) > radius * radius) {
    result = normalize(opt_velocity) * radius;
  } else {
    result = opt_velocity;
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 previous = result;
      if (!linear_program1(lines, i, radius, opt_velocity, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

// Minimises the largest violation of lines [hard_count, end) while keeping
// lines [0, hard_count) satisfied.
inline void linear_program3(std::span<const Line> lines, std::size_t hard_count, std::size_t begin_line,
                            double radius, Vec2& result) {
  double distance = 0.0;

  for (std::size_t i = begin_line; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= distance) continue;

    std::vector<Line> projected(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(hard_count));
    for (std::size_t j = hard_count; j < i; ++j) {
      Line line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::fabs(determinant) <= kLpEpsilon) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;  // same direction
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) * lines[i].direction;
      }
      line.direction = normalize(lines[j].direction - lines[i].direction);
      projected.push_back(line);
    }

    const Vec2 previous = result;
    if (linear_program2(projected, radius, perp_left(lines[i].direction), true, result) < projected.size()) {
      // Numerically the current result is already feasible here; keep it.
      result = previous;
    }
    distance = det(lines[i].direction, lines[i].point - result);
  }
}

}  // namespace detail

/// The velocity obstacle of b relative to a.
inline VelocityObstacle velocity_obstacle(const AgentState& a, const AgentState& b, double horizon) {
  const double combined = a.params.protectRadius + b.params.protectRadius;
  return {(b.position - a.position) / horizon, combined / horizon};
}

/// ORCA half-plane for agent a induced by agent b. When the two protect discs
/// already overlap, the cut-off disc is taken at `step_tau` instead.
inline AgentConstraint reciprocal_constraint(const AgentState& a, const AgentState& b, double time_horizon,
                                             double step_tau) {
  const Vec2 rel_pos = b.position - a.position;
  const Vec2 rel_vel = a.velocity - b.velocity;
  const double dist_sq = abs_sq(rel_pos);
  if (dist_sq < 1e-18) {
    throw DegenerateGeometry("agent_half_plane: agents " + std::to_string(a.id) + " and " +
                             std::to_string(b.id) + " are coincident");
  }
  const double combined = a.params.protectRadius + b.params.protectRadius;
  const double combined_sq = combined * combined;

  detail::Line line;
  Vec2 u;
  VelocityObstacle vo;

  if (dist_sq > combined_sq) {
    const double inv_h = 1.0 / time_horizon;
    vo = {rel_pos * inv_h, combined * inv_h};
    const Vec2 w = rel_vel - inv_h * rel_pos;  // from cut-off centre to relative velocity
    const double w_len_sq = abs_sq(w);
    const double dot1 = dot(w, rel_pos);

    if (dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq) {
      // nearest boundary point lies on the cut-off arc
      const double w_len = std::sqrt(w_len_sq);
      const Vec2 unit_w = w / w_len;
      line.direction = {unit_w.y, -unit_w.x};
      u = (combined * inv_h - w_len) * unit_w;
    } else {
      const double leg = std::sqrt(dist_sq - combined_sq);
      if (det(rel_pos, w) >= 0.0) {
        // left leg; ties go here
        line.direction = Vec2{rel_pos.x * leg - rel_pos.y * combined, rel_pos.x * combined + rel_pos.y * leg} / dist_sq;
      } else {
        line.direction = -Vec2{rel_pos.x * leg + rel_pos.y * combined, -rel_pos.x * combined + rel_pos.y * leg} / dist_sq;
      }
      u = dot(rel_vel, line.direction) * line.direction - rel_vel;
    }
  } else {
    const double inv_step = 1.0 / step_tau;
    vo = {rel_pos * inv_step, combined * inv_step};
    const Vec2 w = rel_vel - inv_step * rel_pos;
    double w_len = abs(w);
    Vec2 unit_w = w_len > 0.0 ? w / w_len : normalize(-rel_pos);
    line.direction = {unit_w.y, -unit_w.x};
    u = (combined * inv_step - w_len) * unit_w;
  }

  line.point = a.velocity + 0.5 * u;
  return {detail::to_half_plane(line), u, vo};
}

inline HalfPlane agent_half_plane(const AgentState& a, const AgentState& b, double time_horizon,
                                  double step_tau = 0.1) {
  return reciprocal_constraint(a, b, time_horizon, step_tau).plane;
}

namespace detail {

struct ObstacleVertex {
  Vec2 point;
  Vec2 unitDir;  // towards the next vertex
  bool convex = true;
  std::size_t next = 0;
  std::size_t prev = 0;
};

inline std::vector<ObstacleVertex> build_vertices(std::span<const Obstacle> obstacles) {
  std::vector<ObstacleVertex> out;
  for (const Obstacle& obs : obstacles) {
    const std::size_t base = out.size();
    const std::size_t n = obs.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& prev = obs.vertices[(i + n - 1) % n];
      const Vec2& cur = obs.vertices[i];
      const Vec2& next = obs.vertices[(i + 1) % n];
      ObstacleVertex v;
      v.point = cur;
      v.unitDir = normalize(next - cur);
      v.convex = det(cur - prev, next - cur) >= 0.0;
      v.next = base + (i + 1) % n;
      v.prev = base + (i + n - 1) % n;
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace detail

/// Half-planes keeping `a` clear of every polygon edge within neighborDist
/// over `time_horizon_obs`. The agent takes full responsibility.
inline std::vector<HalfPlane> obstacle_half_planes(const AgentState& a, std::span<const Obstacle> obstacles,
                                                   double time_horizon_obs) {
  using detail::Line;
  const auto verts = detail::build_vertices(obstacles);
  const double range_sq = a.params.neighborDist * a.params.neighborDist;

  // Edges facing the agent, nearest first.
  std::vector<std::pair<double, std::size_t>> edges;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const Vec2& p1 = verts[i].point;
    const Vec2& p2 = verts[verts[i].next].point;
    if (det(p2 - p1, a.position - p1) >= 0.0) continue;  // agent on the inner side
    const double d = dist_sq_point_segment(p1, p2, a.position);
    if (d < range_sq) edges.emplace_back(d, i);
  }
  std::stable_sort(edges.begin(), edges.end(), [](const auto& l, const auto& r) { return l.first < r.first; });

  const double inv_h = 1.0 / time_horizon_obs;
  const double radius = a.params.protectRadius;
  const double radius_sq = radius * radius;
  const Vec2& position = a.position;
  const Vec2& velocity = a.velocity;

  std::vector<Line> lines;
  for (const auto& [unused, edge] : edges) {
    const detail::ObstacleVertex* ob1 = &verts[edge];
    const detail::ObstacleVertex* ob2 = &verts[ob1->next];

    const Vec2 rel1 = ob1->point - position;
    const Vec2 rel2 = ob2->point - position;

    bool covered = false;
    for (const Line& l : lines) {
      if (det(inv_h * rel1 - l.point, l.direction) - inv_h * radius >= -detail::kLpEpsilon &&
          det(inv_h * rel2 - l.point, l.direction) - inv_h * radius >= -detail::kLpEpsilon) {
        covered = true;
        break;
      }
    }
    if (covered) continue;

    const double dist_sq1 = abs_sq(rel1);
    const double dist_sq2 = abs_sq(rel2);
    const Vec2 obstacle_vector = ob2->point - ob1->point;
    const double s = dot(-rel1, obstacle_vector) / abs_sq(obstacle_vector);
    const double dist_sq_line = abs_sq(-rel1 - s * obstacle_vector);

    Line line;
    if (s < 0.0 && dist_sq1 <= radius_sq) {
      // already touching the left vertex
      if (ob1->convex) {
        line.point = {};
        line.direction = normalize(Vec2{-rel1.y, rel1.x});
        lines.push_back(line);
      }
      continue;
    }
    if (s > 1.0 && dist_sq2 <= radius_sq) {
      if (ob2->convex && det(rel2, ob2->unitDir) >= 0.0) {
        line.point = {};
        line.direction = normalize(Vec2{-rel2.y, rel2.x});
        lines.push_back(line);
      }
      continue;
    }
    if (s >= 0.0 && s < 1.0 && dist_sq_line <= radius_sq) {
      line.point = {};
      line.direction = -ob1->unitDir;
      lines.push_back(line);
      continue;
    }

    Vec2 left_leg, right_leg;
    if (s < 0.0 && dist_sq_line <= radius_sq) {
      // seen obliquely: the left vertex defines the obstacle
      if (!ob1->convex) continue;
      ob2 = ob1;
      const double leg1 = std::sqrt(dist_sq1 - radius_sq);
      left_leg = Vec2{rel1.x * leg1 - rel1.y * radius, rel1.x * radius + rel1.y * leg1} / dist_sq1;
      right_leg = Vec2{rel1.x * leg1 + rel1.y * radius, -rel1.x * radius + rel1.y * leg1} / dist_sq1;
    } else if (s > 1.0 && dist_sq_line <= radius_sq) {
      if (!ob2->convex) continue;
      ob1 = ob2;
      const double leg2 = std::sqrt(dist_sq2 - radius_sq);
      left_leg = Vec2{rel2.x * leg2 - rel2.y * radius, rel2.x * radius + rel2.y * leg2} / dist_sq2;
      right_leg = Vec2{rel2.x * leg2 + rel2.y * radius, -rel2.x * radius + rel2.y * leg2} / dist_sq2;
    } else {
      if (ob1->convex) {
        const double leg1 = std::sqrt(dist_sq1 - radius_sq);
        left_leg = Vec2{rel1.x * leg1 - rel1.y * radius, rel1.x * radius + rel1.y * leg1} / dist_sq1;
      } else {
        left_leg = -ob1->unitDir;
      }
      if (ob2->convex) {
        const double leg2 = std::sqrt(dist_sq2 - radius_sq);
        right_leg = Vec2{rel2.x * leg2 + rel2.y * radius, -rel2.x * radius + rel2.y * leg2} / dist_sq2;
      } else {
        right_leg = ob1->unitDir;
      }
    }

    // Legs never point into a neighbouring edge; velocities projected on such
    // a foreign leg are left to that edge's constraint.
    const detail::ObstacleVertex& left_neighbor = verts[ob1->prev];
    bool left_foreign = false;
    bool right_foreign = false;
    if (ob1->convex && det(left_leg, -left_neighbor.unitDir) >= 0.0) {
      left_leg = -left_neighbor.unitDir;
      left_foreign = true;
    }
    if (ob2->convex && det(right_leg, ob2->unitDir) <= 0.0) {
      right_leg = ob2->unitDir;
      right_foreign = true;
    }

    const Vec2 left_cutoff = inv_h * (ob1->point - position);
    const Vec2 right_cutoff = inv_h * (ob2->point - position);
    const Vec2 cutoff_vec = right_cutoff - left_cutoff;
    const bool same_vertex = ob1 == ob2;

    const double t = same_vertex ? 0.5 : dot(velocity - left_cutoff, cutoff_vec) / abs_sq(cutoff_vec);
    const double t_left = dot(velocity - left_cutoff, left_leg);
    const double t_right = dot(velocity - right_cutoff, right_leg);

    if ((t < 0.0 && t_left < 0.0) || (same_vertex && t_left < 0.0 && t_right < 0.0)) {
      const Vec2 unit_w = normalize(velocity - left_cutoff);
      line.direction = {unit_w.y, -unit_w.x};
      line.point = left_cutoff + radius * inv_h * unit_w;
      lines.push_back(line);
      continue;
    }
    if (t > 1.0 && t_right < 0.0) {
      const Vec2 unit_w = normalize(velocity - right_cutoff);
      line.direction = {unit_w.y, -unit_w.x};
      line.point = right_cutoff + radius * inv_h * unit_w;
      lines.push_back(line);
      continue;
    }

    constexpr double kInf = std::numeric_limits<double>::infinity();
    const double dist_sq_cutoff =
        (t < 0.0 || t > 1.0 || same_vertex) ? kInf : abs_sq(velocity - (left_cutoff + t * cutoff_vec));
    const double dist_sq_left = t_left < 0.0 ? kInf : abs_sq(velocity - (left_cutoff + t_left * left_leg));
    const double dist_sq_right = t_right < 0.0 ? kInf : abs_sq(velocity - (right_cutoff + t_right * right_leg));

    if (dist_sq_cutoff <= dist_sq_left && dist_sq_cutoff <= dist_sq_right) {
      line.direction = -ob1->unitDir;
      line.point = left_cutoff + radius * inv_h * perp_left(line.direction);
      lines.push_back(line);
    } else if (dist_sq_left <= dist_sq_right) {
      if (left_foreign) continue;
      line.direction = left_leg;
      line.point = left_cutoff + radius * inv_h * perp_left(line.direction);
      lines.push_back(line);
    } else {
      if (right_foreign) continue;
      line.direction = -right_leg;
      line.point = right_cutoff + radius * inv_h * perp_left(line.direction);
      lines.push_back(line);
    }
  }

  std::vector<HalfPlane> planes;
  planes.reserve(lines.size());
  for (const Line& l : lines) planes.push_back(detail::to_half_plane(l));
  return planes;
}

struct VelocitySolution {
  Vec2 velocity;
  bool feasible = true;  // false when the min-max-violation fallback ran
};

/// Velocity closest to v_pref inside the speed disc satisfying every plane.
/// When the planes conflict, minimises the largest violation of the soft
/// planes; the first `hard_count` planes stay satisfied where possible.
inline VelocitySolution solve_velocity_detailed(std::span<const HalfPlane> planes, const Vec2& v_pref,
                                                double max_speed, std::size_t hard_count = 0) {
  if (!(max_speed > 0.0)) throw InvalidArgument("solve_velocity: maxSpeed must be positive");
  std::vector<detail::Line> lines;
  lines.reserve(planes.size());
  for (const HalfPlane& h : planes) lines.push_back(detail::to_line(h));

  VelocitySolution out;
  const std::size_t fail = detail::linear_program2(lines, max_speed, v_pref, false, out.velocity);
  if (fail < lines.size()) {
    out.feasible = false;
    detail::linear_program3(lines, std::min(hard_count, lines.size()), fail, max_speed, out.velocity);
  }
  return out;
}

inline Vec2 solve_velocity(std::span<const HalfPlane> planes, const Vec2& v_pref, double max_speed,
                           std::size_t hard_count = 0) {
  return solve_velocity_detailed(planes, v_pref, max_speed, hard_count).velocity;
}

/// All constraints acting on one agent, obstacle planes first.
struct OrcaProblem {
  std::vector<HalfPlane> planes;
  std::size_t obstacleCount = 0;
  std::vector<int> neighborIds;  // agents that contributed a plane, nearest first
};

inline OrcaProblem orca_problem(const AgentState& a, std::span<const AgentState> neighbors,
                                std::span<const Obstacle> obstacles, double step_tau = 0.1) {
  OrcaProblem p;
  p.planes = obstacle_half_planes(a, obstacles, a.params.timeHorizonObs);
  p.obstacleCount = p.planes.size();

  std::vector<std::pair<double, std::size_t>> near;
  const double range_sq = a.params.neighborDist * a.params.neighborDist;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (neighbors[i].id == a.id) continue;
    const double d = abs_sq(neighbors[i].position - a.position);
    if (d < range_sq) near.emplace_back(d, i);
  }
  std::stable_sort(near.begin(), near.end(), [&](const auto& l, const auto& r) {
    if (l.first != r.first) return l.first < r.first;
    return neighbors[l.second].id < neighbors[r.second].id;
  });
  if (near.size() > static_cast<std::size_t>(a.params.maxNeighbors)) {
    near.resize(static_cast<std::size_t>(a.params.maxNeighbors));
  }
  for (const auto& [d, i] : near) {
    p.planes.push_back(agent_half_plane(a, neighbors[i], a.params.timeHorizon, step_tau));
    p.neighborIds.push_back(neighbors[i].id);
  }
  return p;
}

/// The ORCA expert: permitted velocity closest to v_pref.
inline Vec2 orca_velocity(const AgentState& a, std::span<const AgentState> neighbors,
                          std::span<const Obstacle> obstacles, const Vec2& v_pref, double step_tau = 0.1) {
  const OrcaProblem p = orca_problem(a, neighbors, obstacles, step_tau);
  return solve_velocity(p.planes, v_pref, a.params.maxSpeed, p.obstacleCount);
}

}  // namespace maca

#endif  // MACA_ORCA_HPP_
