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

#ifndef MACA_KMEANS_HPP_
#define MACA_KMEANS_HPP_

#include <algorithm>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "maca/error.hpp"
#include "maca/vec2.hpp"

namespace maca {

struct KMeansResult {
  std::vector<Vec2> centroids;
  std::vector<int> assignments;
  int iterations = 0;
};

namespace detail {

inline std::size_t count_distinct(std::span<const Vec2> points) {
  std::vector<Vec2> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const Vec2& a, const Vec2& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

inline int nearest(const Vec2& p, std::span<const Vec2> centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = abs_sq(p - centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops at an assignment fixpoint
/// or after `max_iterations`.
template <class Rng>
KMeansResult kmeans(std::span<const Vec2> points, int k, Rng& rng, int max_iterations = 200) {
  if (k < 1) throw InvalidArgument("kmeans: k must be >= 1");
  if (points.empty()) throw InvalidArgument("kmeans: no points");
  if (static_cast<std::size_t>(k) > detail::count_distinct(points)) {
    throw InvalidArgument("kmeans: k exceeds the number of distinct points");
  }
  const std::size_t n = points.size();
  KMeansResult r;

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  r.centroids.push_back(points[pick(rng)]);
  std::vector<double> d2(n);
  while (r.centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = abs_sq(points[i] - r.centroids[static_cast<std::size_t>(detail::nearest(points[i], r.centroids))]);
      total += d2[i];
    }
    double target = unit(rng) * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      target -= d2[i];
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    while (d2[chosen] <= 0.0) chosen = (chosen + n - 1) % n;  // only distinct points
    r.centroids.push_back(points[chosen]);
  }

  r.assignments.assign(n, -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = detail::nearest(points[i], r.centroids);
      if (c != r.assignments[i]) {
        r.assignments[i] = c;
        changed = true;
      }
    }
    r.iterations = iter + 1;
    if (!changed) break;

    std::vector<Vec2> sums(static_cast<std::size_t>(k));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[static_cast<std::size_t>(r.assignments[i])] += points[i];
      ++counts[static_cast<std::size_t>(r.assignments[i])];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (counts[c] > 0) {
        r.centroids[c] = sums[c] / static_cast<double>(counts[c]);
        continue;
      }
      // empty cluster: reseed at the point farthest from its centroid
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = abs_sq(points[i] - r.centroids[static_cast<std::size_t>(r.assignments[i])]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      r.centroids[c] = points[far];
      r.assignments[far] = static_cast<int>(c);
    }
  }
  return r;
}

}  // namespace maca

#endif  // MACA_KMEANS_HPP_
