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

#ifndef MACA_OBSERVATION_HPP_
#define MACA_OBSERVATION_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "maca/vec2.hpp"

namespace maca {

inline constexpr std::size_t kBeams = 360;
inline constexpr std::size_t kObservationDim = kBeams * 3;  // ranges ++ flow (x, y interleaved)
inline constexpr double kDefaultMaxRange = 4.0;

/// One 360-beam range scan. Beam i points at i degrees from the scan's zero axis.
struct Scan {
  std::array<double, kBeams> ranges{};
  std::array<bool, kBeams> hit{};
  double maxRange = kDefaultMaxRange;
  double minRange = 0.0;  // emitter radius

  static Scan empty(double minRange, double maxRange = kDefaultMaxRange) {
    Scan s;
    s.ranges.fill(maxRange);
    s.hit.fill(false);
    s.maxRange = maxRange;
    s.minRange = minRange;
    return s;
  }

  std::size_t hit_count() const {
    std::size_t n = 0;
    for (bool h : hit) n += h ? 1 : 0;
    return n;
  }

  friend bool operator==(const Scan&, const Scan&) = default;
};

/// Estimated velocity of the return point of every beam; zero for no-hit beams.
struct ScanFlow {
  std::array<Vec2, kBeams> velocities{};

  friend bool operator==(const ScanFlow&, const ScanFlow&) = default;
};

struct Observation {
  Scan scan;
  ScanFlow flow;

  /// Layout: 360 ranges, then (vx, vy) per beam.
  std::vector<double> flatten() const {
    std::vector<double> out(kObservationDim);
    for (std::size_t i = 0; i < kBeams; ++i) {
      out[i] = scan.ranges[i];
      out[kBeams + 2 * i] = flow.velocities[i].x;
      out[kBeams + 2 * i + 1] = flow.velocities[i].y;
    }
    return out;
  }

  /// Inverse of flatten(). Beams at or beyond maxRange are treated as no-hit.
  static Observation unflatten(std::span<const double> values, double minRange,
                               double maxRange = kDefaultMaxRange) {
    Observation o;
    o.scan.maxRange = maxRange;
    o.scan.minRange = minRange;
    for (std::size_t i = 0; i < kBeams; ++i) {
      o.scan.ranges[i] = values[i];
      o.scan.hit[i] = values[i] < maxRange;
      o.flow.velocities[i] = {values[kBeams + 2 * i], values[kBeams + 2 * i + 1]};
    }
    return o;
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

}  // namespace maca

#endif  // MACA_OBSERVATION_HPP_
