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

#ifndef MACA_SIM_HPP_
#define MACA_SIM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "maca/canet.hpp"
#include "maca/core.hpp"
#include "maca/error.hpp"
#include "maca/orca.hpp"
#include "maca/partition.hpp"
#include "maca/policy.hpp"
#include "maca/random.hpp"
#include "maca/sensing.hpp"

namespace maca {

inline constexpr double kGoalTolerance = 0.1;       // m
inline constexpr double kCollisionSlack = 1e-6;     // m
inline constexpr double kSevereCollision = 0.05;    // m, stress-test failure threshold
inline constexpr double kObstacleTimeHorizon = 10.0;

struct World {
  std::vector<AgentState> agents;
  std::vector<Obstacle> obstacles;
  double time = 0.0;
  double tau = 0.1;
  int steps = 0;
  std::vector<bool> arrived;  // parallel to agents
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> constants;  // builder constants for the trace header

  void validate() const {
    if (!(tau > 0.0)) throw InvalidArgument("World: tau must be positive");
    std::set<int> ids;
    for (const AgentState& a : agents) {
      if (!ids.insert(a.id).second) throw InvalidArgument("World: duplicate agent id");
      a.params.validate();
    }
    for (const Obstacle& o : obstacles) o.validate();
  }

  bool at_goal(std::size_t i) const { return abs(agents[i].goal - agents[i].position) <= kGoalTolerance; }
};

// ---------------------------------------------------------------------------
// Controllers

/// Expert baseline with perfect knowledge of neighbour states.
struct OrcaController {
  double stepTau = 0.1;  // cut-off horizon when protect discs already overlap
};

/// Learned policy fed by simulated lidar, sensor noise and CPD scan flow.
struct LearnedController {
  const CANetModel* model = nullptr;
  VelocityPartition partition;
  PolicyConfig policy;
  double noiseSigma = 0.02;
  double maxRange = kDefaultMaxRange;
  CpdConfig cpd;
  std::uint64_t seed = 0;

  // Per-agent sensing memory keyed by agent id.
  std::map<int, Scan> previousScan;
  std::map<int, Vec2> previousPosition;
};

using Controller = std::variant<OrcaController, LearnedController>;

inline std::string controller_name(const Controller& c) {
  return std::holds_alternative<OrcaController>(c) ? "orca" : "learned";
}

struct StepInfo {
  std::vector<Vec2> chosen;               // per agent, global frame
  std::vector<double> predictedMargin;    // learned only, +inf otherwise
};

namespace detail {

inline Vec2 learned_decision(LearnedController& c, const World& w, std::size_t i, const Vec2& v_pref,
                             double* margin) {
  if (!c.model) throw InvalidArgument("LearnedController: no model");
  const AgentState& a = w.agents[i];
  Rng rng = make_stream(c.seed, {static_cast<std::uint64_t>(a.id), static_cast<std::uint64_t>(w.steps)});
  const Scan scan = perturb_scan(raycast_scan(a, w.agents, w.obstacles, c.maxRange), c.noiseSigma, rng);
  ScanFlow flow;
  if (const auto it = c.previousScan.find(a.id); it != c.previousScan.end()) {
    flow = estimate_flow(it->second, scan, w.tau, a.position - c.previousPosition.at(a.id), c.cpd);
  }
  const LocalInput local = to_local_frame(a, Observation{scan, flow}, v_pref);
  const Selection s = select_velocity_detailed(*c.model, c.partition, local, a, c.policy, rng);
  c.previousScan[a.id] = scan;
  c.previousPosition[a.id] = a.position;
  *margin = s.margin;
  return s.velocity;
}

}  // namespace detail

/// One synchronous sensing-acting cycle: every decision reads the pre-step
/// snapshot, then all agents move together. Arrived agents hold still.
inline World step(const World& world, Controller& controller, StepInfo* info = nullptr) {
  World next = world;
  const std::size_t n = world.agents.size();
  std::vector<Vec2> chosen(n);
  std::vector<double> margins(n, kNoHitMargin);
  for (std::size_t i = 0; i < n; ++i) {
    if (world.arrived[i]) continue;
    const AgentState& a = world.agents[i];
    const Vec2 v_pref = preferred_velocity(a.position, a.goal, a.params, world.tau);
    if (auto* orca = std::get_if<OrcaController>(&controller)) {
      chosen[i] = orca_velocity(a, world.agents, world.obstacles, v_pref, orca->stepTau);
    } else {
      chosen[i] = detail::learned_decision(std::get<LearnedController>(controller), world, i, v_pref, &margins[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (world.arrived[i]) continue;
    next.agents[i] = apply_cycle(world.agents[i], chosen[i], world.tau);
  }
  next.steps = world.steps + 1;
  next.time = next.steps * world.tau;
  for (std::size_t i = 0; i < n; ++i) {
    if (!next.arrived[i] && next.at_goal(i)) {
      next.arrived[i] = true;
      next.agents[i].velocity = {};
    }
  }
  if (info) *info = {std::move(chosen), std::move(margins)};
  return next;
}

// ---------------------------------------------------------------------------
// Scenarios

namespace detail {

inline AgentState make_agent(int id, Vec2 position, Vec2 goal, const OrcaParams& params) {
  AgentState a;
  a.id = id;
  a.position = position;
  a.goal = goal;
  a.params = params;
  return a;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline Vec2 polar(double r, double deg) {
  const double a = deg * std::numbers::pi / 180.0;
  return {r * std::cos(a), r * std::sin(a)};
}

inline Obstacle centred_square(Vec2 c, double side) {
  return make_box(c - Vec2{side / 2, side / 2}, c + Vec2{side / 2, side / 2});
}

/// Random start/goal pairs on a ring around the origin.
template <class RngT>
void ring_pairs(World& w, int n, double ring, double min_sep, const OrcaParams& params, RngT& rng) {
  std::uniform_real_distribution<double> angle(0.0, 360.0);
  std::uniform_real_distribution<double> jitter(-30.0, 30.0);
  for (int k = 0; k < n; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      const double a = angle(rng);
      const Vec2 p = polar(ring, a);
      const Vec2 g = polar(ring, a + 180.0 + jitter(rng));
      bool ok = true;
      for (const AgentState& o : w.agents) {
        ok = ok && abs(o.position - p) >= min_sep && abs(o.goal - g) >= min_sep;
      }
      if (!ok) continue;
      w.agents.push_back(make_agent(k, p, g, params));
      placed = true;
    }
    if (!placed) throw InvalidArgument("build_scenario: could not place agents");
  }
}

}  // namespace detail

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"circle", "swap", "crossing", "random",
                                              "three-obstacles", "one-obstacle", "l-shape"};
  return names;
}

/// Default agent count per scenario.
inline int default_agent_count(const std::string& name) {
  if (name == "three-obstacles") return 6;
  if (name == "one-obstacle" || name == "l-shape") return 4;
  return 8;
}

inline World build_scenario(const std::string& name, int n, std::uint64_t seed, OrcaParams params = {},
                            double tau = 0.1) {
  if (n < 1) throw InvalidArgument("build_scenario: need at least one agent");
  World w;
  w.scenario = name;
  w.seed = seed;
  w.tau = tau;
  Rng rng = make_stream(seed, {0x5ce0});
  const double sep = 2.0 * std::max(params.protectRadius, params.radius);
  auto record = [&](const std::string& k, double v) { w.constants.emplace_back(k, detail::fmt(v)); };

  if (name == "circle") {
    const double r = std::max(2.0, n * 0.5 / std::numbers::pi);
    record("circle_radius", r);
    for (int k = 0; k < n; ++k) {
      const Vec2 p = detail::polar(r, 360.0 * k / n);
      w.agents.push_back(detail::make_agent(k, p, -p, params));
    }
  } else if (name == "swap") {
    const double half = 3.5, gap = std::max(1.2, sep + 0.2);
    record("row_offset", half);
    record("row_spacing", gap);
    const int a = (n + 1) / 2;
    for (int k = 0; k < n; ++k) {
      const bool left = k < a;
      const int idx = left ? k : k - a;
      const int count = left ? a : n - a;
      const double y = (idx - (count - 1) / 2.0) * gap;
      const Vec2 p{left ? -half : half, y};
      w.agents.push_back(detail::make_agent(k, p, {-p.x, y}, params));
    }
  } else if (name == "crossing") {
    const double reach = 6.0, gap = std::max(1.2, sep + 0.2);
    record("start_offset", reach);
    record("lane_spacing", gap);
    const int a = (n + 1) / 2;
    for (int k = 0; k < n; ++k) {
      if (k < a) {
        const double y = k * gap;
        w.agents.push_back(detail::make_agent(k, {-reach, y}, {reach, y}, params));
      } else {
        const double x = (k - a) * gap;
        w.agents.push_back(detail::make_agent(k, {x, -reach}, {x, reach}, params));
      }
    }
  } else if (name == "random") {
    const double half = std::max(3.0, sep * std::sqrt(static_cast<double>(n)));
    record("half_width", half);
    std::uniform_real_distribution<double> u(-half, half);
    for (int k = 0; k < n; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        const Vec2 p{u(rng), u(rng)};
        const Vec2 g{u(rng), u(rng)};
        bool ok = true;
        for (const AgentState& o : w.agents) ok = ok && abs(o.position - p) >= sep && abs(o.goal - g) >= sep;
        if (!ok) continue;
        w.agents.push_back(detail::make_agent(k, p, g, params));
        placed = true;
      }
      if (!placed) throw InvalidArgument("build_scenario: could not place agents");
    }
  } else if (name == "three-obstacles") {
    params.timeHorizonObs = kObstacleTimeHorizon;
    const double ring = 4.0, side = 0.8, spread = 1.2;
    record("agent_ring", ring);
    record("obstacle_side", side);
    record("obstacle_ring", spread);
    for (double a : {90.0, 210.0, 330.0}) w.obstacles.push_back(detail::centred_square(detail::polar(spread, a), side));
    for (int k = 0; k < n; ++k) {
      const Vec2 p = detail::polar(ring, 15.0 + 360.0 * k / n);
      w.agents.push_back(detail::make_agent(k, p, -p, params));
    }
  } else if (name == "one-obstacle") {
    params.timeHorizonObs = kObstacleTimeHorizon;
    const double ring = 3.0, side = 1.2;
    record("agent_ring", ring);
    record("obstacle_side", side);
    w.obstacles.push_back(detail::centred_square({}, side));
    for (int k = 0; k < n; ++k) {
      const Vec2 p = detail::polar(ring, 15.0 + 360.0 * k / n);
      w.agents.push_back(detail::make_agent(k, p, -p, params));
    }
  } else if (name == "l-shape") {
    params.timeHorizonObs = kObstacleTimeHorizon;
    const double ring = 3.5, arm = 1.5, width = 0.6;
    record("agent_ring", ring);
    record("arm_length", arm);
    record("arm_width", width);
    // Convex decomposition of the L: bottom bar plus left column.
    w.obstacles.push_back(make_box({-arm, -arm}, {arm, -arm + width}));
    w.obstacles.push_back(make_box({-arm, -arm + width}, {-arm + width, arm}));
    detail::ring_pairs(w, n, ring, sep, params, rng);
  } else {
    throw InvalidArgument("build_scenario: unknown scenario '" + name + "'");
  }
  w.arrived.assign(w.agents.size(), false);
  for (std::size_t i = 0; i < w.agents.size(); ++i) w.arrived[i] = w.at_goal(i);
  w.validate();
  return w;
}

// ---------------------------------------------------------------------------
// Runs and metrics

struct CollisionEvent {
  int step = 0;
  double time = 0.0;
  int agent = 0;
  int other = 0;  // agent id, or -1 - obstacle index
  double penetration = 0.0;
};

struct Trace {
  std::string scenario;
  std::string controller;
  std::uint64_t worldSeed = 0;
  std::uint64_t controllerSeed = 0;
  double tau = 0.1;
  double timeLimit = 0.0;
  std::vector<std::pair<std::string, std::string>> constants;
  std::vector<std::vector<AgentState>> snapshots;  // steps + 1 entries
  std::vector<std::vector<Vec2>> chosen;           // per step
  std::vector<std::vector<double>> margins;        // per snapshot, surface-to-surface clearance
  std::vector<int> arrivalStep;                    // -1 when never reached
  std::vector<CollisionEvent> collisions;

  std::size_t step_count() const { return chosen.size(); }
  bool completed() const {
    return std::all_of(arrivalStep.begin(), arrivalStep.end(), [](int s) { return s >= 0; });
  }
};

namespace detail {

inline void inspect_snapshot(const World& w, int step, Trace& t) {
  const std::size_t n = w.agents.size();
  std::vector<double> margin(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const AgentState& a = w.agents[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const AgentState& b = w.agents[j];
      const double gap = abs(a.position - b.position) - a.params.radius - b.params.radius;
      margin[i] = std::min(margin[i], gap);
      margin[j] = std::min(margin[j], gap);
      if (gap < -kCollisionSlack) t.collisions.push_back({step, w.time, a.id, b.id, -gap});
    }
    for (std::size_t k = 0; k < w.obstacles.size(); ++k) {
      const double gap = w.obstacles[k].signed_distance(a.position) - a.params.radius;
      margin[i] = std::min(margin[i], gap);
      if (gap < -kCollisionSlack) t.collisions.push_back({step, w.time, a.id, -1 - static_cast<int>(k), -gap});
    }
  }
  t.margins.push_back(std::move(margin));
}

}  // namespace detail

/// Steps until every agent has arrived or the time limit is reached.
inline Trace run(World world, Controller& controller, double time_limit) {
  if (!(time_limit > 0.0)) throw InvalidArgument("run: time limit must be positive");
  world.validate();
  if (world.arrived.size() != world.agents.size()) {
    world.arrived.assign(world.agents.size(), false);
    for (std::size_t i = 0; i < world.agents.size(); ++i) world.arrived[i] = world.at_goal(i);
  }
  Trace t;
  t.scenario = world.scenario;
  t.controller = controller_name(controller);
  t.worldSeed = world.seed;
  if (const auto* l = std::get_if<LearnedController>(&controller)) t.controllerSeed = l->seed;
  t.tau = world.tau;
  t.timeLimit = time_limit;
  t.constants = world.constants;
  t.arrivalStep.assign(world.agents.size(), -1);
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    if (world.arrived[i]) t.arrivalStep[i] = world.steps;
  }
  t.snapshots.push_back(world.agents);
  detail::inspect_snapshot(world, world.steps, t);

  const int max_steps = static_cast<int>(std::llround(time_limit / world.tau));
  for (int k = 0; k < max_steps && !t.completed(); ++k) {
    StepInfo info;
    world = step(world, controller, &info);
    for (std::size_t i = 0; i < world.agents.size(); ++i) {
      if (world.arrived[i] && t.arrivalStep[i] < 0) t.arrivalStep[i] = world.steps;
    }
    t.chosen.push_back(std::move(info.chosen));
    t.snapshots.push_back(world.agents);
    detail::inspect_snapshot(world, world.steps, t);
  }
  return t;
}

struct Metrics {
  double totalTravelTime = 0.0;
  double totalDistance = 0.0;
  double safetyMarginMin = std::numeric_limits<double>::infinity();
  double safetyMarginAvg = std::numeric_limits<double>::infinity();
  bool completed = false;
  double maxPenetration = 0.0;
  std::size_t collisionEvents = 0;
  std::vector<double> arrivalTimes;  // NaN when the agent never arrived
};

/// Margins count each agent until its arrival; frozen agents still act as
/// obstacles for the others.
inline Metrics compute_metrics(const Trace& t) {
  if (t.snapshots.empty()) throw InvalidArgument("compute_metrics: empty trace");
  Metrics m;
  m.completed = t.completed();
  double latest = 0.0;
  for (int s : t.arrivalStep) {
    const double at = s >= 0 ? s * t.tau : std::numeric_limits<double>::quiet_NaN();
    m.arrivalTimes.push_back(at);
    if (s >= 0) latest = std::max(latest, at);
  }
  m.totalTravelTime = m.completed ? latest : t.timeLimit;
  for (std::size_t k = 1; k < t.snapshots.size(); ++k) {
    for (std::size_t i = 0; i < t.snapshots[k].size(); ++i) {
      m.totalDistance += abs(t.snapshots[k][i].position - t.snapshots[k - 1][i].position);
    }
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < t.margins.size(); ++k) {
    for (std::size_t i = 0; i < t.margins[k].size(); ++i) {
      const int arrival = t.arrivalStep[i];
      if (arrival >= 0 && static_cast<int>(k) > arrival) continue;
      const double v = t.margins[k][i];
      if (!std::isfinite(v)) continue;
      m.safetyMarginMin = std::min(m.safetyMarginMin, v);
      sum += v;
      ++count;
    }
  }
  if (count > 0) m.safetyMarginAvg = sum / static_cast<double>(count);
  for (const CollisionEvent& e : t.collisions) m.maxPenetration = std::max(m.maxPenetration, e.penetration);
  m.collisionEvents = t.collisions.size();
  return m;
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j;
  j["total_travel_time"] = finite_or_null(m.totalTravelTime);
  j["total_distance"] = finite_or_null(m.totalDistance);
  j["safety_margin_min"] = finite_or_null(m.safetyMarginMin);
  j["safety_margin_avg"] = finite_or_null(m.safetyMarginAvg);
  j["completed"] = m.completed;
  j["max_penetration"] = m.maxPenetration;
  j["collision_events"] = m.collisionEvents;
  nlohmann::json arrivals = nlohmann::json::array();
  for (double a : m.arrivalTimes) arrivals.push_back(finite_or_null(a));
  j["arrival_times"] = arrivals;
  return j;
}

/// CSV with a '#' header block, then one row per agent per snapshot.
inline void write_trace_csv(std::ostream& os, const Trace& t) {
  os << "# scenario: " << t.scenario << '\n';
  os << "# controller: " << t.controller << '\n';
  os << "# world_seed: " << t.worldSeed << '\n';
  os << "# controller_seed: " << t.controllerSeed << '\n';
  os << "# tau: " << detail::fmt(t.tau) << '\n';
  os << "# time_limit: " << detail::fmt(t.timeLimit) << '\n';
  os << "# goal_tolerance: " << detail::fmt(kGoalTolerance) << '\n';
  for (const auto& [k, v] : t.constants) os << "# " << k << ": " << v << '\n';
  os << "step,agent_id,x,y,vx,vy,margin\n";
  char buf[256];
  for (std::size_t k = 0; k < t.snapshots.size(); ++k) {
    for (std::size_t i = 0; i < t.snapshots[k].size(); ++i) {
      const AgentState& a = t.snapshots[k][i];
      std::snprintf(buf, sizeof(buf), "%zu,%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", k, a.id, a.position.x, a.position.y,
                    a.velocity.x, a.velocity.y, t.margins[k][i]);
      os << buf;
    }
  }
}

inline void write_trace_csv(const std::string& path, const Trace& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_trace_csv(os, t);
}

/// L-shape stress outcome: failure means not all agents arrived or some
/// penetration exceeded kSevereCollision.
struct StressReport {
  int initializations = 0;
  int failures = 0;
  int incomplete = 0;
  int severeCollisions = 0;
  double failure_rate() const { return initializations ? static_cast<double>(failures) / initializations : 0.0; }
};

inline bool stress_failed(const Metrics& m) { return !m.completed || m.maxPenetration > kSevereCollision; }

inline StressReport run_stress(const Controller& prototype, int inits, int agents, std::uint64_t seed,
                               const OrcaParams& params, double time_limit) {
  StressReport r;
  for (int k = 0; k < inits; ++k) {
    Controller c = prototype;
    if (auto* l = std::get_if<LearnedController>(&c)) l->seed = seed + static_cast<std::uint64_t>(k);
    const World w = build_scenario("l-shape", agents, seed + static_cast<std::uint64_t>(k), params);
    const Metrics m = compute_metrics(run(w, c, time_limit));
    ++r.initializations;
    r.incomplete += m.completed ? 0 : 1;
    r.severeCollisions += m.maxPenetration > kSevereCollision ? 1 : 0;
    r.failures += stress_failed(m) ? 1 : 0;
  }
  return r;
}

}  // namespace maca

#endif  // MACA_SIM_HPP_
