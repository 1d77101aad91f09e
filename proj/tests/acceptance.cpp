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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass criterion numbers to run a subset.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "maca/canet.hpp"
#include "maca/cli.hpp"
#include "maca/dataset.hpp"
#include "maca/orca.hpp"
#include "maca/partition.hpp"
#include "maca/sensing.hpp"
#include "maca/sim.hpp"
#include "oracles.hpp"

namespace {

using namespace maca;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

void progress(const std::string& s) {
  std::fprintf(stderr, "  .. %s\n", s.c_str());
  std::fflush(stderr);
}

Outcome ac1_lp_oracle() {
  const auto t0 = Clock::now();
  Rng rng = make_stream(1001);
  std::uniform_real_distribution<double> pref(-4.5, 4.5);
  std::uniform_real_distribution<double> speed(0.5, 3.5);
  int worse = 0;
  int compared = 0;
  double worst_excess = -1.0;
  for (int k = 0; k < 1000; ++k) {
    const double max_speed = speed(rng);
    const auto planes = oracle::random_feasible_planes(rng, max_speed, 10);
    const Vec2 v_pref{pref(rng), pref(rng)};
    const Vec2 v = solve_velocity(planes, v_pref, max_speed);
    const double lp = abs(v - v_pref);
    const double grid = oracle::polar_grid_distance(planes, v_pref, max_speed, 0.005);
    if (!std::isfinite(grid)) continue;
    ++compared;
    worst_excess = std::max(worst_excess, lp - grid);
    if (lp > grid + 0.01) ++worse;
  }
  const double t = seconds_since(t0);
  return {worse == 0 && compared == 1000 && t < 30.0,
          format("%d/%d instances within grid+0.01 (worst excess %.2e m/s), %.1f s", compared - worse, compared,
                 worst_excess, t)};
}

Outcome ac2_orca_safety() {
  const auto t0 = Clock::now();
  OrcaParams params;
  params.protectRadius = 0.5;
  int unsafe_worlds = 0;
  int completed = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Controller c = OrcaController{};
    const Trace t = run(build_scenario("random", 8, seed, params), c, 60.0);
    double pen = 0.0;
    for (const CollisionEvent& e : t.collisions) pen = std::max(pen, e.penetration);
    worst = std::max(worst, pen);
    unsafe_worlds += pen > 1e-3 ? 1 : 0;
    completed += t.completed() ? 1 : 0;
  }
  const double t = seconds_since(t0);
  return {unsafe_worlds == 0 && t < 120.0,
          format("%d/100 worlds with penetration > 1e-3 m (max %.2e m, %d completed), %.1f s", unsafe_worlds, worst,
                 completed, t)};
}

Outcome ac3_gradient() {
  const CANetModel model = CANetModel::initialized(2024);
  Rng rng = make_stream(2025);
  std::normal_distribution<double> g;
  const int batch = 4;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kInputDim), batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const std::vector<int> labels{3, 17, 42, 60};
  const double worst = oracle::gradient_check(model, x, labels, 50, 2026);
  return {worst < 1e-4, format("worst relative error %.3e over 50 parameters", worst)};
}

Outcome ac4_cpd() {
  Rng rng = make_stream(4004);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double tau = 0.1;
  double total = 0.0;
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    std::vector<Vec2> centres;
    const int n = 3 + static_cast<int>(u(rng) * 6.0);
    for (int k = 0; k < n; ++k) {
      const double a = 2.0 * std::numbers::pi * u(rng);
      const double r = 1.0 + 2.2 * u(rng);
      centres.push_back({r * std::cos(a), r * std::sin(a)});
    }
    const double mag = 0.05 + 0.3 * u(rng);
    const double dir = 2.0 * std::numbers::pi * u(rng);
    const Vec2 d{mag * std::cos(dir), mag * std::sin(dir)};
    const Scan scan = oracle::contour_scan(centres, 0.2 + 0.3 * u(rng), {});
    // The sensor moved by d and the returns did not change: the scene translated by d.
    const ScanFlow flow = estimate_flow(scan, scan, tau, d);
    double err = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < kBeams; ++i) {
      if (!scan.hit[i]) continue;
      err += abs(flow.velocities[i] - d / tau);
      ++count;
    }
    if (count == 0) continue;
    err /= count;
    total += err;
    worst = std::max(worst, err);
  }
  const double mae = total / 50.0;
  return {mae < 0.02, format("mean absolute error %.4f m/s over 50 scenes (worst scene %.4f)", mae, worst)};
}

struct DeskRun {
  CrossValidation cv;
  CANetModel model;
  double trainSeconds = 0.0;
  double genSeconds = 0.0;
  std::size_t frames = 0;
};

std::optional<DeskRun> desk;

const DeskRun& desk_run() {
  if (desk) return *desk;
  DeskRun r;
  const auto g0 = Clock::now();
  const std::uint64_t seed = 5005;
  const GenConfig gen;
  const std::vector<Frame> base = generate_cleansed(gen, 10000, seed, cli::thread_count());
  Rng rng = make_stream(seed, {0xa06});
  const std::vector<Frame> frames = augment(base, 1, 0.02, rng, gen.partition, gen.base.radius);
  r.frames = frames.size();
  r.genSeconds = seconds_since(g0);
  progress(format("generated %zu frames in %.0f s", frames.size(), r.genSeconds));

  TrainConfig cfg;
  cfg.learningRate = 0.01;
  cfg.maxEpochs = 12;
  cfg.seed = 1;
  const auto t0 = Clock::now();
  r.cv = cross_validate(frames, 10, cfg, 0.1, seed, [&](const FoldResult& f, const TrainResult& tr) {
    if (f.fold == 0) r.model = tr.model;
    progress(format("fold %d: train %.3f test %.3f (%d epochs, best %d) at %.0f s", f.fold, f.trainAcc, f.testAcc,
                    f.epochs, f.bestEpoch, seconds_since(t0)));
  });
  r.trainSeconds = seconds_since(t0);
  desk = std::move(r);
  return *desk;
}

Outcome ac5_training() {
  const DeskRun& r = desk_run();
  const bool ok = r.frames == 30000 && r.cv.meanTestAcc >= 0.20 && r.cv.meanTrainAcc >= 0.45 && r.trainSeconds < 45 * 60;
  return {ok, format("%zu frames, mean test %.2f%%, mean train %.2f%%, training %.1f min (generation %.1f min)",
                     r.frames, 100.0 * r.cv.meanTestAcc, 100.0 * r.cv.meanTrainAcc, r.trainSeconds / 60.0,
                     r.genSeconds / 60.0)};
}

Outcome ac6_mirror() {
  const VelocityPartition part;
  const std::vector<Frame> frames = generate_cleansed(GenConfig{}, 200, 6006);
  int involution_failures = 0;
  for (const Frame& f : frames) {
    if (!(mirror_frame(mirror_frame(f, part), part) == f)) ++involution_failures;
  }
  Rng rng = make_stream(6007);
  std::uniform_real_distribution<double> r(0.0, 7.5);
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
  const double edge = 1e-6;
  int checked = 0;
  int label_failures = 0;
  while (checked < 100000) {
    const double rad = r(rng);
    const double ang = a(rng);
    // Sector edges, including the x axis, are skipped.
    const double t = (ang + std::numbers::pi) / (2.0 * std::numbers::pi / 12.0);
    const double frac = t - std::floor(t);
    if (frac < edge || frac > 1.0 - edge) continue;
    Frame f;
    f.expertVelocity = {rad * std::cos(ang), rad * std::sin(ang)};
    f.label = part.label(f.expertVelocity);
    const Frame m = mirror_frame(f, part);
    if (m.label != VelocityPartition::mirror_class(f.label)) ++label_failures;
    ++checked;
  }
  return {involution_failures == 0 && label_failures == 0,
          format("involution failures %d/%zu, label mismatches %d/%d", involution_failures, frames.size(),
                 label_failures, checked)};
}

Outcome ac7_learned_navigation() {
  const DeskRun& r = desk_run();
  const auto t0 = Clock::now();
  int successes = 0;
  int completed = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    LearnedController lc;
    lc.model = &r.model;
    lc.seed = 7000 + seed;
    Controller c = lc;
    const Trace t = run(build_scenario("circle", 4, seed), c, 30.0);
    const Metrics m = compute_metrics(t);
    worst = std::max(worst, m.maxPenetration);
    completed += m.completed ? 1 : 0;
    successes += m.completed && m.maxPenetration <= 0.05 ? 1 : 0;
  }
  return {successes >= 16, format("%d/20 runs completed without penetration > 0.05 m (%d completed, max penetration "
                                  "%.3f m), %.0f s",
                                  successes, completed, worst, seconds_since(t0))};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome ac8_determinism() {
  const fs::path root = fs::temp_directory_path() / ("maca_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::ostringstream log;
  std::ostringstream err;
  auto call = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "maca");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    return cli::dispatch(static_cast<int>(argv.size()), argv.data(), log, err);
  };
  auto rerun = [&](const std::string& cmd, const fs::path& first, const fs::path& second) {
    return call({cmd, "--config", (first / "manifest.txt").string(), "--out", second.string()});
  };
  int rc = 0;
  rc |= call({"gen-data", "--frames", "80", "--seed", "8", "--out", (root / "gen1").string()});
  rc |= rerun("gen-data", root / "gen1", root / "gen2");
  const std::string data = (root / "gen1" / "dataset.bin").string();
  rc |= call({"train", "--data", data, "--epochs", "2", "--lr", "0.01", "--seed", "9", "--out", (root / "train1").string()});
  rc |= rerun("train", root / "train1", root / "train2");
  const std::string model = (root / "train1" / "model.bin").string();
  rc |= call({"simulate", "--scenario", "circle", "--agents", "4", "--controller", "learned", "--model", model,
              "--time-limit", "3", "--seed", "10", "--out", (root / "sim1").string()});
  rc |= rerun("simulate", root / "sim1", root / "sim2");

  std::vector<std::string> differing;
  const std::pair<const char*, const char*> files[] = {
      {"gen", "dataset.bin"}, {"train", "model.bin"}, {"sim", "trace.csv"}};
  for (const auto& [stem, file] : files) {
    const std::string a = slurp(root / (std::string(stem) + "1") / file);
    const std::string b = slurp(root / (std::string(stem) + "2") / file);
    if (a.empty() || a != b) differing.push_back(file);
  }
  fs::remove_all(root);
  std::string detail = rc == 0 ? "all commands exited 0" : "a command failed: " + err.str();
  detail += differing.empty() ? "; dataset, checkpoint and trace reruns byte-identical" : "; differing:";
  for (const std::string& d : differing) detail += " " + d;
  return {rc == 0 && differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 ORCA LP matches the polar-grid oracle", ac1_lp_oracle},
      {"AC2 closed-loop ORCA safety", ac2_orca_safety},
      {"AC3 gradient fidelity", ac3_gradient},
      {"AC4 CPD flow recovery", ac4_cpd},
      {"AC5 desk-scale training", ac5_training},
      {"AC6 mirror suite", ac6_mirror},
      {"AC7 learned-policy circle navigation", ac7_learned_navigation},
      {"AC8 end-to-end determinism", ac8_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected.empty() && !selected.count(static_cast<int>(k) + 1)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
