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

#ifndef MACA_SENSING_HPP_
#define MACA_SENSING_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "maca/core.hpp"
#include "maca/observation.hpp"
#include "maca/vec2.hpp"

namespace maca {

/// Unit direction of beam i in the scan's own orientation.
inline Vec2 beam_direction(std::size_t beam) {
  const double a = static_cast<double>(beam) * std::numbers::pi / 180.0;
  return {std::cos(a), std::sin(a)};
}

namespace detail {

// Distance along a unit ray to a disc, or +inf. Origins inside the disc hit at 0.
inline double ray_disc(const Vec2& origin, const Vec2& dir, const Vec2& centre, double radius) {
  const Vec2 f = origin - centre;
  const double b = dot(f, dir);
  const double c = abs_sq(f) - radius * radius;
  if (c <= 0.0) return 0.0;
  const double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
}

inline double ray_segment(const Vec2& origin, const Vec2& dir, const Vec2& a, const Vec2& b) {
  const Vec2 e = b - a;
  const double denom = det(dir, e);
  if (std::fabs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const Vec2 ao = a - origin;
  const double t = det(ao, e) / denom;
  const double s = det(ao, dir) / denom;
  if (t < 0.0 || s < 0.0 || s > 1.0) return std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace detail

/// 360-beam lidar at the agent's centre, beam 0 along global +x. Other agents
/// are seen with their physical radius.
inline Scan raycast_scan(const AgentState& agent, std::span<const AgentState> others,
                         std::span<const Obstacle> obstacles, double max_range = kDefaultMaxRange) {
  Scan scan = Scan::empty(agent.params.radius, max_range);
  for (std::size_t i = 0; i < kBeams; ++i) {
    const Vec2 dir = beam_direction(i);
    double t = std::numeric_limits<double>::infinity();
    for (const AgentState& o : others) {
      if (o.id == agent.id) continue;
      t = std::min(t, detail::ray_disc(agent.position, dir, o.position, o.params.radius));
    }
    for (const Obstacle& obs : obstacles) {
      const std::size_t n = obs.vertices.size();
      for (std::size_t k = 0; k < n; ++k) {
        t = std::min(t, detail::ray_segment(agent.position, dir, obs.vertices[k], obs.vertices[(k + 1) % n]));
      }
    }
    if (t < max_range) {
      scan.hit[i] = true;
      scan.ranges[i] = std::clamp(t, scan.minRange, max_range);
    }
  }
  return scan;
}

/// Adds N(0, sigma^2) to every hit beam. No-hit beams keep maxRange.
template <class Rng>
Scan perturb_scan(const Scan& scan, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw InvalidArgument("perturb_scan: sigma must be non-negative");
  Scan out = scan;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t i = 0; i < kBeams; ++i) {
    if (!out.hit[i]) continue;
    out.ranges[i] = std::clamp(out.ranges[i] + noise(rng), out.minRange, out.maxRange);
  }
  return out;
}

/// Coherent point drift settings (non-rigid, Gaussian motion-coherence kernel).
struct CpdConfig {
  double beta = 2.0;     // kernel width
  double lambda = 3.0;   // regularisation weight
  double w = 0.1;        // outlier weight
  int maxIterations = 50;
  double tolerance = 1e-5;  // relative change of the objective
  double minSigma2 = 1e-10;
  bool normalize = true;  // centre and scale both sets before registering
};

struct CpdResult {
  Eigen::MatrixX2d transformed;  // moving points after registration
  Eigen::MatrixXd posterior;     // M x N, P(m | x_n) from the last E-step
  double sigma2 = 0.0;           // in normalized units when cfg.normalize is set
  int iterations = 0;
  std::vector<double> objective;  // penalised negative log-likelihood per E-step
};

/// Registers the moving set onto the fixed set.
/// fixed: N x 2 (current scan points); moving: M x 2 (previous scan points).
inline CpdResult cpd_register(const Eigen::MatrixX2d& fixed_in, const Eigen::MatrixX2d& moving_in,
                              const CpdConfig& cfg = {}) {
  Eigen::RowVector2d fixed_mean = Eigen::RowVector2d::Zero();
  Eigen::RowVector2d moving_mean = Eigen::RowVector2d::Zero();
  double fixed_scale = 1.0;
  double moving_scale = 1.0;
  if (cfg.normalize) {
    fixed_mean = fixed_in.colwise().mean();
    moving_mean = moving_in.colwise().mean();
    fixed_scale = std::sqrt((fixed_in.rowwise() - fixed_mean).squaredNorm() / static_cast<double>(fixed_in.rows()));
    moving_scale = std::sqrt((moving_in.rowwise() - moving_mean).squaredNorm() / static_cast<double>(moving_in.rows()));
    if (!(fixed_scale > 0.0)) fixed_scale = 1.0;
    if (!(moving_scale > 0.0)) moving_scale = 1.0;
  }
  const Eigen::MatrixX2d fixed = (fixed_in.rowwise() - fixed_mean) / fixed_scale;
  const Eigen::MatrixX2d moving = (moving_in.rowwise() - moving_mean) / moving_scale;

  const Eigen::Index n = fixed.rows();
  const Eigen::Index m = moving.rows();
  constexpr double kDim = 2.0;

  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      g(i, j) = std::exp(-(moving.row(i) - moving.row(j)).squaredNorm() / (2.0 * cfg.beta * cfg.beta));
    }
  }

  double sigma2 = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    sigma2 += (fixed.rowwise() - moving.row(i)).rowwise().squaredNorm().sum();
  }
  sigma2 = std::max(sigma2 / (kDim * static_cast<double>(m * n)), cfg.minSigma2);

  CpdResult r;
  r.transformed = moving;
  Eigen::MatrixX2d coeffs = Eigen::MatrixX2d::Zero(m, 2);
  Eigen::MatrixXd kernel(m, n);
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);

  for (int iter = 0;; ++iter) {
    // E-step
    for (Eigen::Index j = 0; j < n; ++j) {
      kernel.col(j) = (-(r.transformed.rowwise() - fixed.row(j)).rowwise().squaredNorm() / (2.0 * sigma2))
                          .array()
                          .exp()
                          .matrix();
    }
    const double gauss_norm = 2.0 * std::numbers::pi * sigma2;  // (2 pi sigma^2)^(D/2) with D = 2
    const double c = gauss_norm * cfg.w / (1.0 - cfg.w) * md / nd;
    const Eigen::RowVectorXd col_sum = kernel.colwise().sum();

    double nll = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      nll -= std::log((1.0 - cfg.w) * col_sum(j) / (md * gauss_norm) + cfg.w / nd);
    }
    nll += 0.5 * cfg.lambda * (coeffs.transpose() * g * coeffs).trace();
    r.objective.push_back(nll);

    r.posterior = kernel.array().rowwise() / (col_sum.array() + c);
    r.iterations = iter;

    if (iter > 0) {
      const double prev = r.objective[r.objective.size() - 2];
      if (std::fabs(prev - nll) <= cfg.tolerance * std::max(1.0, std::fabs(nll))) break;
    }
    if (iter >= cfg.maxIterations) break;

    // M-step
    const Eigen::VectorXd p1 = r.posterior.rowwise().sum();
    const Eigen::VectorXd pt1 = r.posterior.colwise().sum().transpose();
    const double np = p1.sum();
    if (np <= 0.0) break;
    const Eigen::MatrixX2d px = r.posterior * fixed;

    Eigen::MatrixXd a = p1.asDiagonal() * g;
    a.diagonal().array() += cfg.lambda * sigma2;
    const Eigen::MatrixX2d rhs = px - p1.asDiagonal() * moving;
    coeffs = a.partialPivLu().solve(rhs);
    r.transformed = moving + g * coeffs;

    const double xpx = (pt1.array() * fixed.rowwise().squaredNorm().array()).sum();
    const double tpt = (p1.array() * r.transformed.rowwise().squaredNorm().array()).sum();
    const double cross = (px.array() * r.transformed.array()).sum();
    sigma2 = std::max((xpx - 2.0 * cross + tpt) / (np * kDim), cfg.minSigma2);
  }
  r.sigma2 = sigma2;
  r.transformed = (r.transformed * fixed_scale).rowwise() + fixed_mean;
  return r;
}

/// Hit beams as 2D points in the scan's orientation, shifted by `offset`.
inline Eigen::MatrixX2d scan_points(const Scan& scan, const Vec2& offset, std::vector<std::size_t>* beams = nullptr) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < kBeams; ++i) {
    if (scan.hit[i]) idx.push_back(i);
  }
  Eigen::MatrixX2d pts(static_cast<Eigen::Index>(idx.size()), 2);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Vec2 p = scan.ranges[idx[k]] * beam_direction(idx[k]) + offset;
    pts(static_cast<Eigen::Index>(k), 0) = p.x;
    pts(static_cast<Eigen::Index>(k), 1) = p.y;
  }
  if (beams) *beams = std::move(idx);
  return pts;
}

/// Per-beam velocities of the current scan's return points, estimated by
/// registering the previous scan onto the current one.
///
/// Both scans share one orientation. `ego_displacement` is how far the
/// emitter moved between them; the previous points are shifted by its
/// negative so static surfaces get zero flow.
inline ScanFlow estimate_flow(const Scan& prev, const Scan& curr, double tau, const Vec2& ego_displacement = {},
                              const CpdConfig& cfg = {}) {
  if (!(tau > 0.0)) throw InvalidArgument("estimate_flow: tau must be positive");
  ScanFlow flow;
  std::vector<std::size_t> curr_beams;
  const Eigen::MatrixX2d fixed = scan_points(curr, {}, &curr_beams);
  const Eigen::MatrixX2d moving = scan_points(prev, -ego_displacement);
  if (fixed.rows() < 3 || moving.rows() < 3) return flow;

  const CpdResult reg = cpd_register(fixed, moving, cfg);
  for (Eigen::Index j = 0; j < fixed.rows(); ++j) {
    const double mass = reg.posterior.col(j).sum();
    if (mass <= 1e-12) continue;
    const Eigen::RowVector2d expected = (reg.posterior.col(j).transpose() * moving) / mass;
    const Eigen::RowVector2d v = (fixed.row(j) - expected) / tau;
    flow.velocities[curr_beams[static_cast<std::size_t>(j)]] = {v(0), v(1)};
  }
  return flow;
}

}  // namespace maca

#endif  // MACA_SENSING_HPP_
