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

#ifndef MACA_PARTITION_HPP_
#define MACA_PARTITION_HPP_

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "maca/error.hpp"
#include "maca/vec2.hpp"

namespace maca {

/// Polar cell of the velocity-increment plane.
struct VelocityRegion {
  double rInner = 0.0;
  double rOuter = 0.0;
  double angleLo = -std::numbers::pi;  // radians, half-open [angleLo, angleHi)
  double angleHi = std::numbers::pi;
  bool isCenter = false;
};

/// 61-class partition of velocity increments: a centre disc plus five rings of
/// twelve 30-degree sectors. Magnitudes past the last ring fall in the outer ring.
class VelocityPartition {
 public:
  static constexpr int kRings = 5;
  static constexpr int kSectors = 12;
  static constexpr int kClasses = 1 + kRings * kSectors;

  VelocityPartition() : VelocityPartition(0.35, {0.9, 1.8, 3.2, 5.0, 7.0}) {}

  VelocityPartition(double center_radius, std::array<double, kRings> ring_boundaries)
      : centerRadius_(center_radius), ringBoundaries_(ring_boundaries) {
    double lo = centerRadius_;
    if (!(centerRadius_ > 0.0)) throw InvalidArgument("VelocityPartition: centre radius must be positive");
    for (double b : ringBoundaries_) {
      if (!(b > lo)) throw InvalidArgument("VelocityPartition: ring boundaries must ascend");
      lo = b;
    }
    centroids_.reserve(kClasses);
    for (int c = 0; c < kClasses; ++c) centroids_.push_back(area_centroid(region(c)));
  }

  /// Outer ring ends at twice the maximum speed.
  static VelocityPartition for_max_speed(double max_speed) {
    const double s = 2.0 * max_speed / 7.0;
    return VelocityPartition(0.35 * s, {0.9 * s, 1.8 * s, 3.2 * s, 5.0 * s, 7.0 * s});
  }

  int class_count() const { return kClasses; }
  double center_radius() const { return centerRadius_; }
  const std::array<double, kRings>& ring_boundaries() const { return ringBoundaries_; }
  const std::vector<Vec2>& centroids() const { return centroids_; }
  const Vec2& centroid(int c) const { return centroids_.at(static_cast<std::size_t>(c)); }

  int label(const Vec2& dv) const {
    const double r = abs(dv);
    if (r < centerRadius_) return 0;
    int ring = kRings - 1;
    for (int k = 0; k < kRings; ++k) {
      if (r < ringBoundaries_[static_cast<std::size_t>(k)]) {
        ring = k;
        break;
      }
    }
    return 1 + ring * kSectors + sector_of(dv);
  }

  VelocityRegion region(int c) const {
    if (c < 0 || c >= kClasses) throw InvalidArgument("VelocityPartition: class id out of range");
    VelocityRegion g;
    if (c == 0) {
      g.rOuter = centerRadius_;
      g.isCenter = true;
      return g;
    }
    const int ring = (c - 1) / kSectors;
    const int sector = (c - 1) % kSectors;
    g.rInner = ring == 0 ? centerRadius_ : ringBoundaries_[static_cast<std::size_t>(ring - 1)];
    g.rOuter = ringBoundaries_[static_cast<std::size_t>(ring)];
    g.angleLo = -std::numbers::pi + sector * kSectorWidth;
    g.angleHi = g.angleLo + kSectorWidth;
    return g;
  }

  /// Class of the velocity mirrored across the x axis (off sector boundaries).
  static int mirror_class(int c) {
    if (c == 0) return 0;
    const int ring = (c - 1) / kSectors;
    const int sector = (c - 1) % kSectors;
    return 1 + ring * kSectors + (kSectors - 1 - sector);
  }

  /// Uniform sample over the class region (area measure).
  template <class Rng>
  Vec2 sample(int c, Rng& rng) const {
    const VelocityRegion g = region(c);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    const double a = g.angleLo + unit(rng) * (g.angleHi - g.angleLo);
    const double r = std::sqrt(g.rInner * g.rInner + u * (g.rOuter * g.rOuter - g.rInner * g.rInner));
    return {r * std::cos(a), r * std::sin(a)};
  }

 private:
  static constexpr double kSectorWidth = 2.0 * std::numbers::pi / kSectors;

  static int sector_of(const Vec2& dv) {
    double a = std::atan2(dv.y, dv.x) + std::numbers::pi;
    a = std::fmod(a, 2.0 * std::numbers::pi);
    int s = static_cast<int>(std::floor(a / kSectorWidth));
    return s < 0 ? 0 : (s >= kSectors ? kSectors - 1 : s);
  }

  static Vec2 area_centroid(const VelocityRegion& g) {
    if (g.isCenter) return {};
    const double half = 0.5 * (g.angleHi - g.angleLo);
    const double r3 = g.rOuter * g.rOuter * g.rOuter - g.rInner * g.rInner * g.rInner;
    const double r2 = g.rOuter * g.rOuter - g.rInner * g.rInner;
    const double dist = (2.0 / 3.0) * r3 / r2 * std::sin(half) / half;
    const double mid = g.angleLo + half;
    return {dist * std::cos(mid), dist * std::sin(mid)};
  }

  double centerRadius_;
  std::array<double, kRings> ringBoundaries_;
  std::vector<Vec2> centroids_;
};

inline int label_velocity(const Vec2& dv, const VelocityPartition& partition) { return partition.label(dv); }

}  // namespace maca

#endif  // MACA_PARTITION_HPP_
