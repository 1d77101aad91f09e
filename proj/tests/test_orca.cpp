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


#include <gtest/gtest.h>

#include <random>

#include "maca/orca.hpp"
#include "maca/random.hpp"
#include "maca/sim.hpp"
#include "oracles.hpp"

namespace maca {
namespace {

AgentState make(int id, Vec2 p, Vec2 v, double protect = 0.5) {
  AgentState a;
  a.id = id;
  a.position = p;
  a.velocity = v;
  a.params.protectRadius = protect;
  return a;
}

TEST(AgentHalfPlane, HeadOnLegProjection) {
  const AgentState a = make(0, {0, 0}, {1, 0});
  const AgentState b = make(1, {2, 0}, {-1, 0});
  const AgentConstraint c = reciprocal_constraint(a, b, 2.0, 0.1);
  EXPECT_NEAR(c.plane.point.x, 0.75, 1e-3);
  EXPECT_NEAR(c.plane.point.y, 0.433, 1e-3);
  EXPECT_NEAR(c.plane.normal.x, -0.5, 1e-3);
  EXPECT_NEAR(c.plane.normal.y, 0.866, 1e-3);

  // brute-force nearest boundary point of the truncated cone
  const Vec2 rel = a.velocity - b.velocity;
  const auto boundary = oracle::vo_boundary(c.vo.apexOffset, c.vo.discRadius, 10.0, 1e-4);
  const double best = abs(oracle::nearest_point(boundary, rel) - rel);
  EXPECT_NEAR(abs(c.u), best, 2e-4);
  EXPECT_LT(abs(oracle::nearest_point(boundary, rel + c.u) - (rel + c.u)), 2e-4);
}

TEST(AgentHalfPlane, OutsideVoKeepsCurrentVelocity) {
  const AgentState a = make(0, {0, 0}, {0, 1});
  const AgentState b = make(1, {3, 0}, {0, -1});
  const HalfPlane h = agent_half_plane(a, b, 1.0);
  EXPECT_GT(h.slack(a.velocity), 0.0);
  const AgentConstraint c = reciprocal_constraint(a, b, 1.0, 0.1);
  // u points from the relative velocity into the obstacle
  const Vec2 rel = a.velocity - b.velocity;
  EXPECT_LT(abs(rel + c.u - c.vo.apexOffset), abs(rel - c.vo.apexOffset));
}

TEST(AgentHalfPlane, CoincidentAgentsThrow) {
  EXPECT_THROW(agent_half_plane(make(0, {1, 1}, {}), make(1, {1, 1}, {}), 1.0), DegenerateGeometry);
}

TEST(AgentHalfPlane, NormalIsUnit) {
  Rng rng = make_stream(21);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const AgentState a = make(0, {u(rng), u(rng)}, {u(rng), u(rng)});
    const AgentState b = make(1, {u(rng), u(rng)}, {u(rng), u(rng)});
    if (abs(a.position - b.position) < 1e-3) continue;
    EXPECT_NEAR(abs(agent_half_plane(a, b, 1.0).normal), 1.0, 1e-9);
  }
}

TEST(AgentHalfPlane, MatchesSampledBoundaryOnRandomPairs) {
  Rng rng = make_stream(22);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> horizon(0.5, 3.0);
  int checked = 0;
  while (checked < 60) {
    const AgentState a = make(0, {0, 0}, {u(rng), u(rng)}, 0.2 + 0.3 * std::abs(u(rng)) / 3.0);
    const AgentState b = make(1, {u(rng), u(rng)}, {u(rng), u(rng)}, 0.2 + 0.3 * std::abs(u(rng)) / 3.0);
    if (abs(b.position) <= a.params.protectRadius + b.params.protectRadius + 0.05) continue;
    const AgentConstraint c = reciprocal_constraint(a, b, horizon(rng), 0.1);
    const Vec2 rel = a.velocity - b.velocity;
    const auto boundary = oracle::vo_boundary(c.vo.apexOffset, c.vo.discRadius, 25.0, 2e-3);
    const double best = abs(oracle::nearest_point(boundary, rel) - rel);
    EXPECT_NEAR(abs(c.u), best, 3e-3);
    ++checked;
  }
}

TEST(AgentHalfPlane, Reciprocity) {
  Rng rng = make_stream(23);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const AgentState a = make(0, {u(rng), u(rng)}, {u(rng), u(rng)});
    const AgentState b = make(1, {u(rng), u(rng)}, {u(rng), u(rng)});
    if (abs(a.position - b.position) <= 1.0) continue;
    const Vec2 ab = reciprocal_constraint(a, b, 1.5, 0.1).u;
    const Vec2 ba = reciprocal_constraint(b, a, 1.5, 0.1).u;
    EXPECT_NEAR(ab.x, -ba.x, 1e-9);
    EXPECT_NEAR(ab.y, -ba.y, 1e-9);
  }
}

TEST(ObstacleHalfPlanes, NoObstacles) {
  EXPECT_TRUE(obstacle_half_planes(make(0, {0, 0}, {1, 0}), {}, 10.0).empty());
}

TEST(ObstacleHalfPlanes, OutOfRange) {
  const std::vector<Obstacle> far{make_box({10, -1}, {11, 1})};
  EXPECT_TRUE(obstacle_half_planes(make(0, {0, 0}, {1, 0}), far, 10.0).empty());
}

// Wall whose near face is the segment x = 1, y in [-5, 5].
TEST(ObstacleHalfPlanes, WallLimitsApproachSpeed) {
  const AgentState a = make(0, {0, 0}, {1, 0});
  const std::vector<Obstacle> wall{make_box({1, -5}, {1.2, 5})};
  const auto planes = obstacle_half_planes(a, wall, 10.0);
  ASSERT_FALSE(planes.empty());
  EXPECT_LT(oracle::min_slack(planes, {0.06, 0.0}), 0.0);
  EXPECT_GE(oracle::min_slack(planes, {0.04, 0.0}), 0.0);
  EXPECT_NEAR(oracle::min_slack(planes, {0.05, 0.0}), 0.0, 1e-9);

  // every permitted velocity keeps the protect disc off the face for 10 s
  for (double vx = -3.5; vx <= 3.5; vx += 0.05) {
    for (double vy = -3.5; vy <= 3.5; vy += 0.05) {
      const Vec2 v{vx, vy};
      if (oracle::min_slack(planes, v) < 0.0) continue;
      for (double t = 0.0; t <= 10.0; t += 0.05) {
        const Vec2 p = t * v;
        EXPECT_GE(std::sqrt(dist_sq_point_segment({1, -5}, {1, 5}, p)), 0.5 - 1e-9) << v;
      }
    }
  }
}

TEST(SolveVelocity, Unconstrained) {
  EXPECT_EQ(solve_velocity({}, {1, 1}, 3.5), (Vec2{1, 1}));
}

TEST(SolveVelocity, SinglePlane) {
  const std::vector<HalfPlane> planes{{{0, 0}, {0, 1}}};
  const Vec2 v = solve_velocity(planes, {2, -1}, 3.5);
  EXPECT_NEAR(v.x, 2.0, 1e-12);
  EXPECT_NEAR(v.y, 0.0, 1e-12);
  const double grid = oracle::polar_grid_distance(planes, {2, -1}, 3.5, 0.005);
  EXPECT_LE(abs(v - Vec2{2, -1}), grid + 1e-9);
}

TEST(SolveVelocity, ConflictingPlanesSplitViolation) {
  const std::vector<HalfPlane> planes{{{0, 0.5}, {0, 1}}, {{0, -0.5}, {0, -1}}};
  const VelocitySolution s = solve_velocity_detailed(planes, {1, 2}, 3.5);
  EXPECT_FALSE(s.feasible);
  EXPECT_NEAR(s.velocity.y, 0.0, 1e-9);
  EXPECT_NEAR(planes[0].slack(s.velocity), planes[1].slack(s.velocity), 1e-9);

  // no grid point has a smaller worst violation
  const double got = -oracle::min_slack(planes, s.velocity);
  double best = std::numeric_limits<double>::infinity();
  for (double x = -3.5; x <= 3.5; x += 0.01) {
    for (double y = -3.5; y <= 3.5; y += 0.01) {
      if (x * x + y * y > 3.5 * 3.5) continue;
      best = std::min(best, -oracle::min_slack(planes, {x, y}));
    }
  }
  EXPECT_LE(got, best + 1e-9);
  EXPECT_LE(abs(s.velocity), 3.5 + 1e-9);
}

TEST(SolveVelocity, FeasiblePreferenceReturnedExactly) {
  Rng rng = make_stream(31);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int hits = 0;
  for (int k = 0; k < 2000 && hits < 200; ++k) {
    const auto planes = oracle::random_feasible_planes(rng, 3.5);
    const Vec2 pref{u(rng), u(rng)};
    if (abs(pref) > 3.5 || oracle::min_slack(planes, pref) < 0.0) continue;
    EXPECT_EQ(solve_velocity(planes, pref, 3.5), pref);
    ++hits;
  }
  EXPECT_GT(hits, 50);
}

TEST(SolveVelocity, FeasibleResultsSatisfyEveryPlaneAndBeatTheGrid) {
  Rng rng = make_stream(32);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::uniform_real_distribution<double> speed(0.5, 3.5);
  for (int k = 0; k < 200; ++k) {
    const double max_speed = speed(rng);
    const auto planes = oracle::random_feasible_planes(rng, max_speed);
    const Vec2 pref{u(rng), u(rng)};
    const VelocitySolution s = solve_velocity_detailed(planes, pref, max_speed);
    ASSERT_TRUE(s.feasible);
    EXPECT_GE(oracle::min_slack(planes, s.velocity), -1e-9);
    EXPECT_LE(abs(s.velocity), max_speed + 1e-9);
    const double lp = abs(s.velocity - pref);
    const double grid = oracle::polar_grid_distance(planes, pref, max_speed, 0.005, lp);
    if (std::isfinite(grid)) {
      EXPECT_LE(lp, grid + 0.01);
    }
  }
}

TEST(OrcaVelocity, AloneKeepsPreference) {
  const AgentState a = make(0, {0, 0}, {0.3, 0});
  EXPECT_EQ(orca_velocity(a, {}, {}, {1, 2}), (Vec2{1, 2}));
}

TEST(OrcaVelocity, NeighbourCountGate) {
  AgentState a = make(0, {0, 0}, {0, 0});
  std::vector<AgentState> others;
  for (int k = 1; k <= 11; ++k) {
    const double ang = 2.0 * std::numbers::pi * k / 11.0;
    const double r = 1.2 + 0.1 * k;
    others.push_back(make(k, {r * std::cos(ang), r * std::sin(ang)}, {}));
  }
  const OrcaProblem p = orca_problem(a, others, {});
  ASSERT_EQ(p.neighborIds.size(), 10u);
  EXPECT_EQ(std::count(p.neighborIds.begin(), p.neighborIds.end(), 11), 0);
  EXPECT_EQ(p.planes.size(), 10u);
}

TEST(OrcaVelocity, NeighbourRangeGate) {
  const AgentState a = make(0, {0, 0}, {1, 0});
  const std::vector<AgentState> far{make(1, {3.5, 0}, {-1, 0})};
  EXPECT_TRUE(orca_problem(a, far, {}).planes.empty());
}

TEST(OrcaVelocity, HeadOnIsPointSymmetric) {
  const AgentState a = make(0, {-1.2, 0}, {3.5, 0});
  const AgentState b = make(1, {1.2, 0}, {-3.5, 0});
  const std::vector<AgentState> all{a, b};
  const Vec2 va = orca_velocity(a, all, {}, {3.5, 0});
  const Vec2 vb = orca_velocity(b, all, {}, {-3.5, 0});
  EXPECT_NEAR(va.x, -vb.x, 1e-9);
  EXPECT_NEAR(va.y, -vb.y, 1e-9);
  EXPECT_GT(std::abs(va.y), 0.1);
}

TEST(OrcaVelocity, ClosedLoopKeepsAgentsApart) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Controller c = OrcaController{};
    const Trace t = run(build_scenario("random", 8, seed), c, 60.0);
    for (const auto& snap : t.snapshots) {
      for (std::size_t i = 0; i < snap.size(); ++i) {
        for (std::size_t j = i + 1; j < snap.size(); ++j) {
          EXPECT_GE(abs(snap[i].position - snap[j].position),
                    snap[i].params.radius + snap[j].params.radius - 1e-3);
        }
      }
    }
  }
}

}  // namespace
}  // namespace maca
