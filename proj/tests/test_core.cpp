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

#include <numbers>
#include <random>

#include "maca/core.hpp"
#include "maca/random.hpp"

namespace maca {
namespace {

constexpr double kPi = std::numbers::pi;

AgentState agent_with(Vec2 velocity) {
  AgentState a;
  a.velocity = velocity;
  return a;
}

Observation numbered_observation() {
  Observation o;
  o.scan = Scan::empty(0.2);
  for (std::size_t i = 0; i < kBeams; ++i) {
    o.scan.ranges[i] = 0.5 + 0.01 * static_cast<double>(i % 300);
    o.scan.hit[i] = i % 7 != 0;
    o.flow.velocities[i] = {std::cos(0.1 * i), std::sin(0.3 * i)};
  }
  return o;
}

TEST(PreferredVelocity, CapsAtMaxSpeed) {
  const Vec2 v = preferred_velocity({0, 0}, {10, 0}, OrcaParams{}, 0.1);
  EXPECT_DOUBLE_EQ(v.x, 3.5);
  EXPECT_DOUBLE_EQ(v.y, 0.0);
}

TEST(PreferredVelocity, ZeroAtGoal) {
  EXPECT_EQ(preferred_velocity({5, 5}, {5, 5}, OrcaParams{}, 0.1), Vec2{});
}

TEST(PreferredVelocity, ShortDistanceDoesNotOvershoot) {
  const Vec2 v = preferred_velocity({0, 0}, {0, 0.1}, OrcaParams{}, 0.1);
  EXPECT_NEAR(v.x, 0.0, 1e-12);
  EXPECT_NEAR(v.y, 1.0, 1e-12);
}

TEST(PreferredVelocity, RejectsNonPositiveTau) {
  EXPECT_THROW(preferred_velocity({0, 0}, {1, 0}, OrcaParams{}, 0.0), InvalidArgument);
}

TEST(PreferredVelocity, MagnitudeNeverExceedsMaxSpeed) {
  Rng rng = make_stream(5);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  OrcaParams p;
  for (int k = 0; k < 2000; ++k) {
    p.maxSpeed = 0.1 + std::abs(u(rng)) / 4.0;
    const Vec2 v = preferred_velocity({u(rng), u(rng)}, {u(rng), u(rng)}, p, 0.1);
    EXPECT_LE(abs(v), p.maxSpeed + 1e-12);
  }
}

TEST(LocalFrame, HeadingAlongX) {
  const Observation o = numbered_observation();
  const LocalInput l = to_local_frame(agent_with({1, 0}), o, {2, 0});
  EXPECT_NEAR(l.v_pref.x, 1.0, 1e-12);
  EXPECT_NEAR(l.v_pref.y, 0.0, 1e-12);
  EXPECT_EQ(l.obs.scan, o.scan);
}

TEST(LocalFrame, HeadingAlongY) {
  const Observation o = numbered_observation();
  const LocalInput l = to_local_frame(agent_with({0, 1}), o, {0, 2});
  EXPECT_NEAR(l.v_pref.x, 1.0, 1e-12);
  EXPECT_NEAR(l.v_pref.y, 0.0, 1e-12);
  EXPECT_EQ(l.frame.beam_shift(), 90);
  for (std::size_t j = 0; j < kBeams; ++j) {
    EXPECT_EQ(l.obs.scan.ranges[j], o.scan.ranges[(j + 90) % kBeams]);
  }
}

TEST(LocalFrame, StillAgentUsesPreferredDirection) {
  const LocalInput l = to_local_frame(agent_with({0, 0}), numbered_observation(), {0, 1});
  EXPECT_NEAR(l.frame.heading, kPi / 2, 1e-12);
  EXPECT_NEAR(l.v_pref.x, 1.0, 1e-12);
  EXPECT_NEAR(l.v_pref.y, 0.0, 1e-12);
}

TEST(LocalFrame, FallsBackToGlobalX) {
  const LocalInput l = to_local_frame(agent_with({0, 0}), numbered_observation(), {0, 0});
  EXPECT_EQ(l.frame.heading, 0.0);
}

TEST(LocalFrame, HeadingStaysInHalfOpenRange) {
  EXPECT_EQ(heading_of({-1, 0}, {}), -kPi);
  EXPECT_EQ(wrap_angle(kPi), -kPi);
  Rng rng = make_stream(9);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    const double h = wrap_angle(u(rng));
    EXPECT_GE(h, -kPi);
    EXPECT_LT(h, kPi);
  }
}

TEST(LocalFrame, InverseRoundTrip) {
  Rng rng = make_stream(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Observation o = numbered_observation();
  for (int k = 0; k < 200; ++k) {
    AgentState a = agent_with({u(rng), u(rng)});
    const Vec2 pref{u(rng), u(rng)};
    const LocalInput l = to_local_frame(a, o, pref);
    const auto [back, back_pref] = from_local_frame(l, a.velocity);
    EXPECT_EQ(back.scan, o.scan);
    for (std::size_t i = 0; i < kBeams; ++i) {
      EXPECT_NEAR(back.flow.velocities[i].x, o.flow.velocities[i].x, 1e-9);
      EXPECT_NEAR(back.flow.velocities[i].y, o.flow.velocities[i].y, 1e-9);
    }
    EXPECT_NEAR(back_pref.x, pref.x, 1e-9);
    EXPECT_NEAR(back_pref.y, pref.y, 1e-9);
  }
}

// Rotating the world by whole degrees must not change what the agent sees.
TEST(LocalFrame, InvariantUnderWholeDegreeWorldRotation) {
  Rng rng = make_stream(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> deg(0, 359);
  const Observation o = numbered_observation();
  for (int k = 0; k < 100; ++k) {
    const int h0 = deg(rng);
    const double speed = 0.5 + std::abs(u(rng));
    AgentState a = agent_with(speed * Vec2{std::cos(h0 * kPi / 180), std::sin(h0 * kPi / 180)});
    const Vec2 pref{u(rng), u(rng)};
    const LocalInput base = to_local_frame(a, o, pref);

    const int r = deg(rng);
    const double ang = r * kPi / 180;
    Observation ro;
    ro.scan = detail::shift_scan(o.scan, (360 - r) % 360);
    ro.flow = detail::shift_rotate_flow(o.flow, (360 - r) % 360, ang);
    AgentState b = agent_with(rotate(a.velocity, ang));
    const LocalInput rotated = to_local_frame(b, ro, rotate(pref, ang));

    EXPECT_EQ(rotated.obs.scan, base.obs.scan);
    EXPECT_NEAR(rotated.v_pref.x, base.v_pref.x, 1e-9);
    EXPECT_NEAR(rotated.v_pref.y, base.v_pref.y, 1e-9);
    for (std::size_t i = 0; i < kBeams; ++i) {
      EXPECT_NEAR(rotated.obs.flow.velocities[i].x, base.obs.flow.velocities[i].x, 1e-9);
      EXPECT_NEAR(rotated.obs.flow.velocities[i].y, base.obs.flow.velocities[i].y, 1e-9);
    }
  }
}

TEST(OrcaParams, Validation) {
  OrcaParams p;
  EXPECT_NO_THROW(p.validate());
  p.protectRadius = 0.1;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.neighborDist = 1.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.maxNeighbors = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Obstacle, Validation) {
  EXPECT_NO_THROW(make_box({0, 0}, {1, 1}).validate());
  Obstacle cw{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}};
  EXPECT_THROW(cw.validate(), InvalidArgument);
  Obstacle bow{{{0, 0}, {1, 1}, {1, 0}, {0, 1}}};
  EXPECT_THROW(bow.validate(), InvalidArgument);
  Obstacle two{{{0, 0}, {1, 0}}};
  EXPECT_THROW(two.validate(), InvalidArgument);
}

TEST(Obstacle, SignedDistance) {
  const Obstacle box = make_box({-1, -1}, {1, 1});
  EXPECT_NEAR(box.signed_distance({3, 0}), 2.0, 1e-12);
  EXPECT_NEAR(box.signed_distance({0.5, 0}), -0.5, 1e-12);
}

}  // namespace
}  // namespace maca
