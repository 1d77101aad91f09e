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

#ifndef MACA_CLI_HPP_
#define MACA_CLI_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maca/canet.hpp"
#include "maca/config.hpp"
#include "maca/dataset.hpp"
#include "maca/kmeans.hpp"
#include "maca/partition.hpp"
#include "maca/sim.hpp"

namespace maca::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr const char* kThreadsEnv = "MACA_THREADS";

inline unsigned thread_count() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Key schemas

inline std::vector<KeyDef> common_keys() {
  return {{"seed", "", "random seed (generated and recorded when omitted)"}, {"out", "out", "output directory"}};
}

inline std::vector<KeyDef> agent_keys() {
  return {{"max-speed", "3.5", "agent speed limit (m/s)"},
          {"radius", "0.2", "physical agent radius (m)"},
          {"neighbor-dist", "3.0", "ORCA neighbour range (m)"},
          {"max-neighbors", "10", "ORCA neighbour cap"}};
}

inline std::vector<KeyDef> schema(const std::string& command) {
  std::vector<KeyDef> k = common_keys();
  auto add = [&](std::vector<KeyDef> more) { k.insert(k.end(), more.begin(), more.end()); };
  if (command == "gen-data") {
    add(agent_keys());
    add({{"frames", "1000", "base frames kept after cleansing"},
         {"noise-copies", "1", "noisy copies per frame"},
         {"copy-sigma", "0.02", "range noise of the noisy copies (m)"},
         {"protect-radii", "0.2,0.5", "protect radius sweep (m)"},
         {"time-horizons", "0.5,1,2", "ORCA time horizon sweep (s)"},
         {"min-neighbors", "3", "fewest neighbours per frame"},
         {"max-neighbors-frame", "10", "most neighbours per frame"},
         {"noise-min", "0.01", "lower scan noise sigma (m)"},
         {"noise-max", "0.05", "upper scan noise sigma (m)"},
         {"tau", "0.1", "cycle period (s)"}});
  } else if (command == "partition") {
    add({{"data", "", "dataset file"}, {"k", "61", "k-means cluster count"}});
  } else if (command == "train") {
    add({{"data", "", "dataset file"},
         {"epochs", "300", "maximum epochs"},
         {"patience", "20", "early-stopping patience (epochs)"},
         {"lr", "0.1", "learning rate"},
         {"weight-decay", "0.0002", "L2 weight decay"},
         {"momentum", "0.9", "SGD momentum"},
         {"batch-size", "64", "mini-batch size"},
         {"lr-decay", "1", "per-epoch learning-rate factor"},
         {"val-fraction", "0.1", "stratified validation share"},
         {"folds", "0", "k for an additional stratified k-fold report (0 disables)"}});
  } else if (command == "simulate" || command == "evaluate" || command == "stress") {
    add(agent_keys());
    add({{"controller", "orca", "orca | learned"},
         {"model", "", "checkpoint for the learned controller"},
         {"protect-radius", "0.5", "ORCA protect radius (m)"},
         {"time-horizon", "1.0", "ORCA time horizon (s)"},
         {"noise-sigma", "0.02", "learned controller lidar noise (m)"},
         {"samples-per-class", "10", "candidate velocities per class"},
         {"slowdown-steps", "8", "speed back-off steps"},
         {"advect-scan", "true", "advect scan points by flow in the margin check"}});
    if (command == "simulate") {
      add({{"scenario", "circle", "scenario name"},
           {"agents", "0", "agent count (0: scenario default)"},
           {"time-limit", "60", "simulated seconds"}});
    } else if (command == "evaluate") {
      add({{"scenario", "all", "scenario name or 'all'"},
           {"agents", "0", "agent count (0: scenario default)"},
           {"repetitions", "0", "runs per scenario (0: 20 learned, 1 orca)"},
           {"time-limit", "60", "simulated seconds"}});
    } else {
      add({{"inits", "100", "random L-shape initialisations"},
           {"agents", "4", "agents per initialisation"},
           {"time-limit", "30", "simulated seconds"}});
    }
  } else {
    throw UsageError("unknown subcommand '" + command + "'");
  }
  return k;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"gen-data", "partition", "train", "simulate", "evaluate", "stress"};
  return names;
}

// ---------------------------------------------------------------------------
// Helpers

inline std::filesystem::path out_dir(const RunConfig& cfg) {
  std::filesystem::path p = cfg.str("out");
  std::filesystem::create_directories(p);
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw FormatError("cannot open " + p.string() + " for writing");
  os << text;
}

inline void write_manifest(const RunConfig& cfg, const std::string& extra = {}) {
  write_text(out_dir(cfg) / "manifest.txt", cfg.manifest() + extra);
}

inline OrcaParams agent_params(const RunConfig& cfg) {
  OrcaParams p;
  p.maxSpeed = cfg.real("max-speed");
  p.radius = cfg.real("radius");
  p.neighborDist = cfg.real("neighbor-dist");
  p.maxNeighbors = static_cast<int>(cfg.integer("max-neighbors"));
  if (cfg.known("protect-radius")) p.protectRadius = cfg.real("protect-radius");
  if (cfg.known("time-horizon")) p.timeHorizon = cfg.real("time-horizon");
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return p;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// Controller from config; `model` must outlive the controller.
inline Controller make_controller(const RunConfig& cfg, const CANetModel* model, std::uint64_t seed) {
  const std::string& kind = cfg.str("controller");
  if (kind == "orca") return OrcaController{};
  if (kind != "learned") throw UsageError("controller must be 'orca' or 'learned'");
  LearnedController c;
  c.model = model;
  c.partition = VelocityPartition{};
  c.policy.samplesPerClass = static_cast<int>(cfg.integer("samples-per-class"));
  c.policy.slowdownSteps = static_cast<int>(cfg.integer("slowdown-steps"));
  c.policy.advectScan = cfg.boolean("advect-scan");
  c.noiseSigma = cfg.real("noise-sigma");
  c.seed = seed;
  try {
    c.policy.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return c;
}

inline std::optional<CANetModel> load_model_if_needed(const RunConfig& cfg) {
  if (cfg.str("controller") != "learned") return std::nullopt;
  if (!cfg.has("model")) throw UsageError("--model is required for the learned controller");
  return load_checkpoint(cfg.str("model"));
}

inline int agents_for(const RunConfig& cfg, const std::string& scenario) {
  const long long n = cfg.integer("agents");
  if (n < 0) throw UsageError("agents must be >= 0");
  return n > 0 ? static_cast<int>(n) : default_agent_count(scenario);
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  GenConfig g;
  g.base = agent_params(cfg);
  g.protectRadii = cfg.reals("protect-radii");
  g.timeHorizons = cfg.reals("time-horizons");
  g.minNeighbors = static_cast<int>(cfg.integer("min-neighbors"));
  g.maxNeighbors = static_cast<int>(cfg.integer("max-neighbors-frame"));
  g.noiseMin = cfg.real("noise-min");
  g.noiseMax = cfg.real("noise-max");
  g.tau = cfg.real("tau");
  const long long frames = cfg.integer("frames");
  const long long copies = cfg.integer("noise-copies");
  if (frames < 1 || copies < 0) throw UsageError("frames must be >= 1 and noise-copies >= 0");
  try {
    g.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const std::uint64_t seed = cfg.u64("seed");
  BuildStats st;
  const std::vector<Frame> kept = generate_cleansed(g, static_cast<std::size_t>(frames), seed, thread_count(), &st);
  Rng rng = make_stream(seed, {0xa06});
  const std::vector<Frame> all =
      augment(kept, static_cast<int>(copies), cfg.real("copy-sigma"), rng, g.partition, g.base.radius);
  const auto dir = out_dir(cfg);
  write_dataset((dir / "dataset.bin").string(), all);
  write_manifest(cfg, "# frames_written: " + std::to_string(all.size()) + "\n# attempted: " +
                          std::to_string(st.attempted) + "\n# rejected: " + std::to_string(st.rejected) +
                          "\n# cleansed: " + std::to_string(st.cleansed) + "\n");
  log << "wrote " << all.size() << " frames (" << kept.size() << " kept of " << st.attempted << " generated) to "
      << (dir / "dataset.bin").string() << '\n';
  return kExitOk;
}

inline int cmd_partition(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.has("data")) throw UsageError("--data is required");
  const std::vector<Frame> frames = read_dataset(cfg.str("data"));
  const long long k = cfg.integer("k");
  if (k < 1) throw UsageError("k must be >= 1");
  const VelocityPartition part;
  std::vector<std::size_t> counts(VelocityPartition::kClasses, 0);
  std::vector<Vec2> dv;
  for (const Frame& f : frames) {
    ++counts[static_cast<std::size_t>(f.label)];
    dv.push_back(f.expertVelocity);
  }
  const auto dir = out_dir(cfg);
  {
    std::ofstream os(dir / "partition_table.csv", std::ios::binary);
    os << "class,r_inner,r_outer,angle_lo,angle_hi,centroid_x,centroid_y,count\n";
    for (int c = 0; c < VelocityPartition::kClasses; ++c) {
      const VelocityRegion g = part.region(c);
      const Vec2 m = part.centroid(c);
      os << c << ',' << fmt(g.rInner) << ',' << fmt(g.rOuter) << ',' << fmt(g.angleLo) << ',' << fmt(g.angleHi) << ','
         << fmt(m.x) << ',' << fmt(m.y) << ',' << counts[static_cast<std::size_t>(c)] << '\n';
    }
  }
  Rng rng = make_stream(cfg.u64("seed"), {0x6ea5});
  const KMeansResult km = kmeans(std::span<const Vec2>(dv), static_cast<int>(k), rng);
  {
    std::ofstream os(dir / "kmeans_centroids.csv", std::ios::binary);
    os << "cluster,x,y,size\n";
    std::vector<std::size_t> sizes(km.centroids.size(), 0);
    for (int a : km.assignments) ++sizes[static_cast<std::size_t>(a)];
    for (std::size_t c = 0; c < km.centroids.size(); ++c) {
      os << c << ',' << fmt(km.centroids[c].x) << ',' << fmt(km.centroids[c].y) << ',' << sizes[c] << '\n';
    }
  }
  write_manifest(cfg);
  log << "partition table and " << km.centroids.size() << " k-means centroids written to " << dir.string() << '\n';
  return kExitOk;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.has("data")) throw UsageError("--data is required");
  TrainConfig tc;
  tc.learningRate = cfg.real("lr");
  tc.weightDecay = cfg.real("weight-decay");
  tc.momentum = cfg.real("momentum");
  tc.batchSize = static_cast<int>(cfg.integer("batch-size"));
  tc.maxEpochs = static_cast<int>(cfg.integer("epochs"));
  tc.earlyStopPatience = static_cast<int>(cfg.integer("patience"));
  tc.lrDecay = cfg.real("lr-decay");
  tc.seed = cfg.u64("seed");
  const double val_fraction = cfg.real("val-fraction");
  const long long folds = cfg.integer("folds");
  try {
    tc.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (folds == 1 || folds < 0) throw UsageError("folds must be 0 or >= 2");

  const std::vector<Frame> frames = read_dataset(cfg.str("data"));
  std::vector<int> labels;
  for (const Frame& f : frames) labels.push_back(f.label);
  const auto [tr, va] = stratified_holdout(labels, val_fraction, tc.seed);
  const std::vector<Frame> train_set = gather(frames, tr);
  const std::vector<Frame> val_set = gather(frames, va);
  const TrainResult r = train(CANetModel::initialized(tc.seed), train_set, val_set, tc, [&](const EpochStats& e) {
    log << "epoch " << e.epoch << " train_loss " << fmt(e.trainLoss) << " val_loss " << fmt(e.valLoss)
        << " val_acc " << fmt(e.valAcc) << '\n';
  });
  const auto dir = out_dir(cfg);
  save_checkpoint((dir / "model.bin").string(), r.model);
  {
    std::ofstream os(dir / "history.csv", std::ios::binary);
    write_history_csv(os, r.history);
  }
  if (folds >= 2) {
    const CrossValidation cv = cross_validate(frames, static_cast<int>(folds), tc, val_fraction, tc.seed);
    std::ofstream os(dir / "folds.csv", std::ios::binary);
    os << "fold,train_acc,test_acc,test_loss,epochs,best_epoch\n";
    for (const FoldResult& f : cv.folds) {
      os << f.fold << ',' << fmt(f.trainAcc) << ',' << fmt(f.testAcc) << ',' << fmt(f.testLoss) << ',' << f.epochs
         << ',' << f.bestEpoch << '\n';
    }
    log << "cross-validation: mean train acc " << fmt(cv.meanTrainAcc) << ", mean test acc " << fmt(cv.meanTestAcc)
        << '\n';
  }
  write_manifest(cfg, "# best_epoch: " + std::to_string(r.bestEpoch) + "\n");
  log << "checkpoint written to " << (dir / "model.bin").string() << '\n';
  return kExitOk;
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const std::string scenario = cfg.str("scenario");
  if (std::find(scenario_names().begin(), scenario_names().end(), scenario) == scenario_names().end()) {
    throw UsageError("unknown scenario '" + scenario + "'");
  }
  const double limit = cfg.real("time-limit");
  if (!(limit > 0.0)) throw UsageError("time-limit must be positive");
  const std::uint64_t seed = cfg.u64("seed");
  const std::optional<CANetModel> model = load_model_if_needed(cfg);
  Controller ctl = make_controller(cfg, model ? &*model : nullptr, seed);
  const World w = build_scenario(scenario, agents_for(cfg, scenario), seed, agent_params(cfg));
  const Trace t = run(w, ctl, limit);
  const Metrics m = compute_metrics(t);
  const auto dir = out_dir(cfg);
  write_trace_csv((dir / "trace.csv").string(), t);
  write_text(dir / "metrics.json", to_json(m).dump(2) + "\n");
  write_manifest(cfg);
  log << scenario << " (" << controller_name(ctl) << "): completed=" << (m.completed ? "true" : "false")
      << " time=" << fmt(m.totalTravelTime) << " distance=" << fmt(m.totalDistance) << '\n';
  return kExitOk;
}

inline int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  std::vector<std::string> scenarios;
  if (cfg.str("scenario") == "all") {
    scenarios = {"crossing", "circle", "swap", "random", "three-obstacles", "one-obstacle"};
  } else {
    scenarios = {cfg.str("scenario")};
    if (std::find(scenario_names().begin(), scenario_names().end(), scenarios[0]) == scenario_names().end()) {
      throw UsageError("unknown scenario '" + scenarios[0] + "'");
    }
  }
  const double limit = cfg.real("time-limit");
  if (!(limit > 0.0)) throw UsageError("time-limit must be positive");
  const std::uint64_t seed = cfg.u64("seed");
  const std::optional<CANetModel> model = load_model_if_needed(cfg);
  long long reps = cfg.integer("repetitions");
  if (reps < 0) throw UsageError("repetitions must be >= 0");
  if (reps == 0) reps = cfg.str("controller") == "learned" ? 20 : 1;
  const auto dir = out_dir(cfg);
  for (const std::string& name : scenarios) {
    nlohmann::json runs = nlohmann::json::array();
    std::map<std::string, double> sum;
    std::map<std::string, int> finite;
    int completed = 0;
    for (long long r = 0; r < reps; ++r) {
      const std::uint64_t s = seed + static_cast<std::uint64_t>(r);
      Controller ctl = make_controller(cfg, model ? &*model : nullptr, s);
      const World w = build_scenario(name, agents_for(cfg, name), s, agent_params(cfg));
      const Metrics m = compute_metrics(run(w, ctl, limit));
      completed += m.completed ? 1 : 0;
      const std::pair<const char*, double> fields[] = {{"total_travel_time", m.totalTravelTime},
                                                       {"total_distance", m.totalDistance},
                                                       {"safety_margin_min", m.safetyMarginMin},
                                                       {"safety_margin_avg", m.safetyMarginAvg},
                                                       {"max_penetration", m.maxPenetration}};
      for (const auto& [k, v] : fields) {
        if (!std::isfinite(v)) continue;
        sum[k] += v;
        ++finite[k];
      }
      runs.push_back(to_json(m));
    }
    nlohmann::json mean;
    for (const char* k : {"total_travel_time", "total_distance", "safety_margin_min", "safety_margin_avg",
                          "max_penetration"}) {
      mean[k] = finite[k] > 0 ? nlohmann::json(sum[k] / finite[k]) : nlohmann::json(nullptr);
    }
    mean["completion_rate"] = static_cast<double>(completed) / static_cast<double>(reps);
    nlohmann::json report;
    report["scenario"] = name;
    report["controller"] = cfg.str("controller");
    report["protect_radius"] = cfg.real("protect-radius");
    report["repetitions"] = reps;
    report["mean"] = mean;
    report["runs"] = runs;
    write_text(dir / ("metrics_" + name + ".json"), report.dump(2) + "\n");
    log << name << ": completion " << completed << "/" << reps << ", min margin " << mean["safety_margin_min"].dump()
        << ", avg margin " << mean["safety_margin_avg"].dump() << '\n';
  }
  write_manifest(cfg);
  return kExitOk;
}

inline int cmd_stress(const RunConfig& cfg, std::ostream& log) {
  const long long inits = cfg.integer("inits");
  const long long agents = cfg.integer("agents");
  const double limit = cfg.real("time-limit");
  if (inits < 1 || agents < 1 || !(limit > 0.0)) throw UsageError("inits, agents and time-limit must be positive");
  const std::uint64_t seed = cfg.u64("seed");
  const std::optional<CANetModel> model = load_model_if_needed(cfg);
  const Controller ctl = make_controller(cfg, model ? &*model : nullptr, seed);
  const StressReport r = run_stress(ctl, static_cast<int>(inits), static_cast<int>(agents), seed, agent_params(cfg), limit);
  nlohmann::json j;
  j["controller"] = cfg.str("controller");
  j["initializations"] = r.initializations;
  j["failures"] = r.failures;
  j["incomplete"] = r.incomplete;
  j["severe_collisions"] = r.severeCollisions;
  j["failure_rate"] = r.failure_rate();
  j["severe_penetration_threshold"] = kSevereCollision;
  const auto dir = out_dir(cfg);
  write_text(dir / "stress.json", j.dump(2) + "\n");
  write_manifest(cfg);
  log << "l-shape stress (" << cfg.str("controller") << "): " << r.failures << "/" << r.initializations
      << " failed\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point

/// Parses argv and runs one subcommand. Exit codes: 0 ok, 1 usage, 2 runtime.
inline int dispatch(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Learned multi-agent collision avoidance toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  struct Sub {
    CLI::App* app;
    std::string config;
    std::map<std::string, std::string> flags;
  };
  std::map<std::string, Sub> subs;
  for (const std::string& name : subcommands()) {
    Sub& s = subs[name];
    s.app = app.add_subcommand(name);
    s.app->add_option("--config", s.config, "flat key = value config file");
    for (const KeyDef& k : schema(name)) {
      std::string help = k.help;
      if (!k.fallback.empty()) help += " [" + k.fallback + "]";
      s.app->add_option("--" + k.name, s.flags[k.name], help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, log, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, log, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, err);
    return kExitUsage;
  }

  try {
    for (auto& [name, s] : subs) {
      if (!s.app->parsed()) continue;
      RunConfig cfg(name, schema(name));
      if (!s.config.empty()) cfg.load_file(s.config);
      for (const KeyDef& k : cfg.keys()) {
        if (s.app->count("--" + k.name) > 0) cfg.set(k.name, s.flags[k.name]);
      }
      if (!cfg.has("seed")) cfg.set("seed", std::to_string(std::random_device{}()));
      cfg.u64("seed");
      if (name == "gen-data") return cmd_gen_data(cfg, log);
      if (name == "partition") return cmd_partition(cfg, log);
      if (name == "train") return cmd_train(cfg, log);
      if (name == "simulate") return cmd_simulate(cfg, log);
      if (name == "evaluate") return cmd_evaluate(cfg, log);
      if (name == "stress") return cmd_stress(cfg, log);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace maca::cli

#endif  // MACA_CLI_HPP_
