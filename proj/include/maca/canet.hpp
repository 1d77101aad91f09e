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

#ifndef MACA_CANET_HPP_
#define MACA_CANET_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "maca/binary_io.hpp"
#include "maca/dataset.hpp"
#include "maca/error.hpp"
#include "maca/partition.hpp"
#include "maca/random.hpp"

namespace maca {

inline constexpr std::array<int, 5> kMainWidths{static_cast<int>(kObservationDim), 1024, 1024, 512, 256};
inline constexpr int kAuxIn = 2;
inline constexpr int kAuxWidth = 256;
inline constexpr int kClasses = VelocityPartition::kClasses;

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;

  DenseLayer() = default;
  DenseLayer(int in, int out) : weight(Eigen::MatrixXd::Zero(out, in)), bias(Eigen::VectorXd::Zero(out)) {}

  Eigen::Index size() const { return weight.size() + bias.size(); }
};

/// Two-branch classifier: observation -> 1024-1024-512-256 ReLU stack with
/// dropout, preferred velocity -> 256 ReLU, concatenation -> softmax over classes.
struct CANetModel {
  std::array<DenseLayer, 4> main;
  DenseLayer aux;
  DenseLayer head;
  Standardizer standardizer;
  double dropout = 0.2;
  std::uint64_t seed = 0;

  CANetModel() {
    for (std::size_t l = 0; l < main.size(); ++l) main[l] = DenseLayer(kMainWidths[l], kMainWidths[l + 1]);
    aux = DenseLayer(kAuxIn, kAuxWidth);
    head = DenseLayer(kMainWidths.back() + kAuxWidth, kClasses);
  }

  /// He-uniform weights, zero biases.
  static CANetModel initialized(std::uint64_t seed) {
    CANetModel m;
    m.seed = seed;
    Rng rng = make_stream(seed, {0x1417});
    auto he = [&](DenseLayer& layer) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = u(rng);
      }
    };
    for (DenseLayer& l : m.main) he(l);
    he(m.aux);
    he(m.head);
    return m;
  }

  template <class F>
  void for_each_layer(F&& f) {
    for (DenseLayer& l : main) f(l);
    f(aux);
    f(head);
  }
  template <class F>
  void for_each_layer(F&& f) const {
    for (const DenseLayer& l : main) f(l);
    f(aux);
    f(head);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_layer([&](const DenseLayer& l) { n += static_cast<std::size_t>(l.size()); });
    return n;
  }

  /// Flat parameter access: per layer, weights row-major then biases.
  double& parameter(std::size_t k) {
    double* out = nullptr;
    for_each_layer([&](DenseLayer& l) {
      if (out) return;
      const auto w = static_cast<std::size_t>(l.weight.size());
      if (k < w) {
        const auto cols = static_cast<std::size_t>(l.weight.cols());
        out = &l.weight(static_cast<Eigen::Index>(k / cols), static_cast<Eigen::Index>(k % cols));
        return;
      }
      k -= w;
      if (k < static_cast<std::size_t>(l.bias.size())) {
        out = &l.bias(static_cast<Eigen::Index>(k));
        return;
      }
      k -= static_cast<std::size_t>(l.bias.size());
    });
    if (!out) throw InvalidArgument("CANetModel: parameter index out of range");
    return *out;
  }

  double parameter(std::size_t k) const { return const_cast<CANetModel*>(this)->parameter(k); }

  bool all_finite() const {
    bool ok = true;
    for_each_layer([&](const DenseLayer& l) { ok = ok && l.weight.allFinite() && l.bias.allFinite(); });
    return ok;
  }
};

/// Same layout as the model's layers.
struct Gradients {
  std::array<DenseLayer, 4> main;
  DenseLayer aux;
  DenseLayer head;

  explicit Gradients(const CANetModel& m) {
    for (std::size_t l = 0; l < main.size(); ++l) main[l] = DenseLayer(static_cast<int>(m.main[l].weight.cols()), static_cast<int>(m.main[l].weight.rows()));
    aux = DenseLayer(static_cast<int>(m.aux.weight.cols()), static_cast<int>(m.aux.weight.rows()));
    head = DenseLayer(static_cast<int>(m.head.weight.cols()), static_cast<int>(m.head.weight.rows()));
  }

  double parameter(std::size_t k) const {
    for (const DenseLayer* l : {&main[0], &main[1], &main[2], &main[3], &aux, &head}) {
      const auto w = static_cast<std::size_t>(l->weight.size());
      if (k < w) {
        const auto cols = static_cast<std::size_t>(l->weight.cols());
        return l->weight(static_cast<Eigen::Index>(k / cols), static_cast<Eigen::Index>(k % cols));
      }
      k -= w;
      if (k < static_cast<std::size_t>(l->bias.size())) return l->bias(static_cast<Eigen::Index>(k));
      k -= static_cast<std::size_t>(l->bias.size());
    }
    throw InvalidArgument("Gradients: parameter index out of range");
  }
};

enum class Mode { Train, Eval };

/// Activations kept for the backward pass. Columns are samples.
struct ForwardCache {
  Eigen::MatrixXd input;                 // kInputDim x B, standardized
  std::array<Eigen::MatrixXd, 4> pre;    // main-branch pre-activations
  std::array<Eigen::MatrixXd, 4> post;   // after ReLU and dropout
  std::array<Eigen::MatrixXd, 4> mask;   // dropout scale per unit (empty in eval mode)
  Eigen::MatrixXd auxPre;
  Eigen::MatrixXd auxPost;
  Eigen::MatrixXd probs;                 // kClasses x B
};

namespace detail {

/// Inverted dropout: keep with probability 1-p, scale kept units by 1/(1-p).
template <class RngT>
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, RngT& rng) {
  Eigen::MatrixXd m(rows, cols);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng) < p ? 0.0 : scale;
  }
  return m;
}

inline void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double mx = z.col(c).maxCoeff();
    z.col(c) = (z.col(c).array() - mx).exp().matrix();
    z.col(c) /= z.col(c).sum();
  }
}

}  // namespace detail

/// Batched forward pass over standardized inputs (kInputDim x B).
template <class RngT>
ForwardCache forward_batch(const CANetModel& model, const Eigen::MatrixXd& input, Mode mode, RngT& rng) {
  if (input.rows() != static_cast<Eigen::Index>(kInputDim)) throw InvalidArgument("forward: input has wrong length");
  ForwardCache c;
  c.input = input;
  const Eigen::Index b = input.cols();
  Eigen::MatrixXd h = input.topRows(static_cast<Eigen::Index>(kObservationDim));
  for (std::size_t l = 0; l < 4; ++l) {
    c.pre[l].noalias() = model.main[l].weight * h;
    c.pre[l].colwise() += model.main[l].bias;
    c.post[l] = c.pre[l].cwiseMax(0.0);
    if (mode == Mode::Train && model.dropout > 0.0) {
      c.mask[l] = detail::dropout_mask(c.pre[l].rows(), b, model.dropout, rng);
      c.post[l].array() *= c.mask[l].array();
    }
    h = c.post[l];
  }
  c.auxPre.noalias() = model.aux.weight * input.bottomRows(kAuxIn);
  c.auxPre.colwise() += model.aux.bias;
  c.auxPost = c.auxPre.cwiseMax(0.0);

  const Eigen::Index top = model.head.weight.cols() - kAuxWidth;
  c.probs.noalias() = model.head.weight.leftCols(top) * c.post[3];
  c.probs.noalias() += model.head.weight.rightCols(kAuxWidth) * c.auxPost;
  c.probs.colwise() += model.head.bias;
  detail::softmax_columns(c.probs);
  return c;
}

struct ForwardResult {
  std::vector<double> probs;
  ForwardCache cache;
};

/// Single standardized input of length kInputDim.
template <class RngT>
ForwardResult forward(const CANetModel& model, std::span<const double> input, Mode mode, RngT& rng) {
  if (input.size() != kInputDim) throw InvalidArgument("forward: input has wrong length");
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  ForwardResult r{{}, forward_batch(model, x, mode, rng)};
  r.probs.assign(r.cache.probs.data(), r.cache.probs.data() + r.cache.probs.size());
  return r;
}

/// Mean cross-entropy of a cached forward pass.
inline double cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  double loss = 0.0;
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    loss -= std::log(std::max(probs(labels[static_cast<std::size_t>(c)], c), std::numeric_limits<double>::min()));
  }
  return loss / static_cast<double>(probs.cols());
}

/// Reverse-mode gradients of the mean cross-entropy for a cached forward pass.
inline void backward(const CANetModel& model, const ForwardCache& c, std::span<const int> labels, Gradients& g) {
  const Eigen::Index b = c.probs.cols();
  Eigen::MatrixXd dz = c.probs;
  for (Eigen::Index k = 0; k < b; ++k) dz(labels[static_cast<std::size_t>(k)], k) -= 1.0;
  dz /= static_cast<double>(b);

  const Eigen::Index top = model.head.weight.cols() - kAuxWidth;
  g.head.weight.leftCols(top).noalias() = dz * c.post[3].transpose();
  g.head.weight.rightCols(kAuxWidth).noalias() = dz * c.auxPost.transpose();
  g.head.bias = dz.rowwise().sum();

  Eigen::MatrixXd daux = model.head.weight.rightCols(kAuxWidth).transpose() * dz;
  daux.array() *= (c.auxPre.array() > 0.0).cast<double>();
  g.aux.weight.noalias() = daux * c.input.bottomRows(kAuxIn).transpose();
  g.aux.bias = daux.rowwise().sum();

  Eigen::MatrixXd dh = model.head.weight.leftCols(top).transpose() * dz;
  for (int l = 3; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    if (c.mask[li].size() > 0) dh.array() *= c.mask[li].array();
    dh.array() *= (c.pre[li].array() > 0.0).cast<double>();
    if (l > 0) {
      g.main[li].weight.noalias() = dh * c.post[li - 1].transpose();
    } else {
      g.main[li].weight.noalias() = dh * c.input.topRows(static_cast<Eigen::Index>(kObservationDim)).transpose();
    }
    g.main[li].bias = dh.rowwise().sum();
    if (l > 0) dh = model.main[li].weight.transpose() * dh;
  }
}

inline Gradients backward(const CANetModel& model, const ForwardCache& c, std::span<const int> labels) {
  Gradients g(model);
  backward(model, c, labels, g);
  return g;
}

namespace detail {

// v <- m*v - lr*(g + wd*p); p <- p + v, in one pass.
inline void momentum_step(Eigen::Ref<Eigen::MatrixXd> p, Eigen::Ref<Eigen::MatrixXd> v, const Eigen::Ref<const Eigen::MatrixXd>& g,
                          double momentum, double lr, double wd) {
  double* pp = p.data();
  double* vp = v.data();
  const double* gp = g.data();
  const Eigen::Index n = p.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    vp[k] = momentum * vp[k] - lr * (gp[k] + wd * pp[k]);
    pp[k] += vp[k];
  }
}

}  // namespace detail

struct LossAndGrad {
  double loss;
  Gradients grad;
};

/// Mean cross-entropy and its gradient over a batch of standardized inputs.
/// The L2 term is applied by the optimiser, not included here.
template <class RngT>
LossAndGrad loss_and_grad(const CANetModel& model, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                          RngT& rng, Mode mode = Mode::Train) {
  if (static_cast<Eigen::Index>(labels.size()) != inputs.cols()) throw InvalidArgument("loss_and_grad: label count mismatch");
  for (int y : labels) {
    if (y < 0 || y >= kClasses) throw InvalidArgument("loss_and_grad: label out of range");
  }
  const ForwardCache c = forward_batch(model, inputs, mode, rng);
  return {cross_entropy(c.probs, labels), backward(model, c, labels)};
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learningRate = 0.1;
  double weightDecay = 0.0002;
  double momentum = 0.9;
  int batchSize = 64;
  int maxEpochs = 300;
  int earlyStopPatience = 20;
  std::uint64_t seed = 0;
  double lrDecay = 1.0;  // per-epoch multiplicative factor; 1 disables

  void validate() const {
    if (!(learningRate > 0.0) || !(weightDecay >= 0.0) || !(momentum >= 0.0) || batchSize < 1 || maxEpochs < 1 ||
        earlyStopPatience < 1 || !(lrDecay > 0.0)) {
      throw InvalidArgument("TrainConfig: invalid hyperparameters");
    }
  }
};

struct EpochStats {
  int epoch = 0;
  double trainLoss = 0.0;  // running mean over the epoch's mini-batches (dropout on)
  double trainAcc = 0.0;
  double valLoss = std::numeric_limits<double>::quiet_NaN();
  double valAcc = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  CANetModel model;
  std::vector<EpochStats> history;
  int bestEpoch = 0;
};

/// Standardized inputs as a kInputDim x N matrix and their labels.
struct Batch {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
};

inline Batch make_batch(std::span<const Frame> frames, const Standardizer& s) {
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(kInputDim), static_cast<Eigen::Index>(frames.size()));
  b.labels.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const std::vector<double> x = s.apply(frames[k].input());
    b.inputs.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    b.labels.push_back(frames[k].label);
  }
  return b;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Eval-mode loss and accuracy; argmax ties go to the lowest class id.
inline Evaluation evaluate(const CANetModel& model, const Batch& data, int chunk = 256) {
  Evaluation e;
  const Eigen::Index n = data.inputs.cols();
  if (n == 0) return e;
  Rng unused(0);
  std::size_t correct = 0;
  double loss = 0.0;
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min<Eigen::Index>(chunk, n - start);
    const ForwardCache c = forward_batch(model, data.inputs.middleCols(start, len), Mode::Eval, unused);
    const std::span<const int> labels(data.labels.data() + start, static_cast<std::size_t>(len));
    loss += cross_entropy(c.probs, labels) * static_cast<double>(len);
    for (Eigen::Index k = 0; k < len; ++k) {
      Eigen::Index arg = 0;
      c.probs.col(k).maxCoeff(&arg);
      correct += arg == labels[static_cast<std::size_t>(k)] ? 1 : 0;
    }
  }
  e.loss = loss / static_cast<double>(n);
  e.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return e;
}

inline Evaluation evaluate(const CANetModel& model, std::span<const Frame> frames) {
  return evaluate(model, make_batch(frames, model.standardizer));
}

/// Mini-batch SGD with velocity-form momentum and coupled L2 decay. Fits the
/// standardizer on the training frames. Early stopping watches validation
/// loss and restores the best weights.
inline TrainResult train(const CANetModel& initial, std::span<const Frame> train_frames,
                         std::span<const Frame> val_frames, const TrainConfig& cfg,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
  cfg.validate();
  if (train_frames.empty()) throw InvalidArgument("train: empty training set");

  TrainResult r{initial, {}, 0};
  CANetModel& model = r.model;
  model.standardizer = train_frames.size() >= 2 ? fit_standardizer(train_frames) : Standardizer{};
  const Batch data = make_batch(train_frames, model.standardizer);
  const Batch val = make_batch(val_frames, model.standardizer);

  Gradients velocity(model);
  Gradients grad(model);
  Rng rng = make_stream(cfg.seed, {0x7a1});
  std::vector<std::size_t> order(train_frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  CANetModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  double lr = cfg.learningRate;
  const auto bs = static_cast<std::size_t>(cfg.batchSize);

  Eigen::MatrixXd xb;
  std::vector<int> yb;
  for (int epoch = 1; epoch <= cfg.maxEpochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      xb.resize(static_cast<Eigen::Index>(kInputDim), static_cast<Eigen::Index>(len));
      yb.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        xb.col(static_cast<Eigen::Index>(k)) = data.inputs.col(static_cast<Eigen::Index>(order[start + k]));
        yb[k] = data.labels[order[start + k]];
      }
      const ForwardCache c = forward_batch(model, xb, Mode::Train, rng);
      loss_sum += cross_entropy(c.probs, yb) * static_cast<double>(len);
      for (std::size_t k = 0; k < len; ++k) {
        Eigen::Index arg = 0;
        c.probs.col(static_cast<Eigen::Index>(k)).maxCoeff(&arg);
        correct += arg == yb[k] ? 1 : 0;
      }
      backward(model, c, yb, grad);

      auto step = [&](DenseLayer& p, DenseLayer& v, const DenseLayer& d) {
        detail::momentum_step(p.weight, v.weight, d.weight, cfg.momentum, lr, cfg.weightDecay);
        detail::momentum_step(p.bias, v.bias, d.bias, cfg.momentum, lr, cfg.weightDecay);
      };
      for (std::size_t l = 0; l < 4; ++l) step(model.main[l], velocity.main[l], grad.main[l]);
      step(model.aux, velocity.aux, grad.aux);
      step(model.head, velocity.head, grad.head);
    }

    EpochStats st;
    st.epoch = epoch;
    st.trainLoss = loss_sum / static_cast<double>(order.size());
    st.trainAcc = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!val.labels.empty()) {
      const Evaluation ev = evaluate(model, val);
      st.valLoss = ev.loss;
      st.valAcc = ev.accuracy;
    }
    r.history.push_back(st);
    if (on_epoch) on_epoch(st);
    if (!model.all_finite()) throw Error("train: parameters diverged to non-finite values");

    if (!val.labels.empty()) {
      if (st.valLoss < best_val) {
        best_val = st.valLoss;
        best = model;
        r.bestEpoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.earlyStopPatience) {
        break;
      }
    } else {
      r.bestEpoch = epoch;
    }
    lr *= cfg.lrDecay;
  }
  if (!val.labels.empty()) model = std::move(best);
  return r;
}

/// k disjoint folds; within every class the per-fold counts differ by at most one.
inline std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("stratified_folds: k must be >= 2");
  int max_label = -1;
  for (int y : labels) max_label = std::max(max_label, y);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  Rng rng = make_stream(seed, {0xf01d});
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  std::size_t next = 0;  // carried across classes to balance fold sizes
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) {
      folds[next].push_back(idx);
      next = (next + 1) % folds.size();
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

inline std::vector<std::vector<std::size_t>> stratified_folds(std::span<const Frame> frames, int k, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(frames.size());
  for (const Frame& f : frames) labels.push_back(f.label);
  return stratified_folds(labels, k, seed);
}

/// Stratified hold-out: about `fraction` of each class goes to the second set.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const int> labels,
                                                                                      double fraction,
                                                                                      std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("stratified_holdout: fraction must be in (0, 1)");
  const int k = std::max(2, static_cast<int>(std::lround(1.0 / fraction)));
  auto folds = stratified_folds(labels, k, seed);
  std::vector<std::size_t> rest;
  for (std::size_t f = 1; f < folds.size(); ++f) rest.insert(rest.end(), folds[f].begin(), folds[f].end());
  std::sort(rest.begin(), rest.end());
  return {std::move(rest), std::move(folds[0])};
}

inline std::vector<Frame> gather(std::span<const Frame> frames, std::span<const std::size_t> idx) {
  std::vector<Frame> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(frames[i]);
  return out;
}

struct FoldResult {
  int fold = 0;
  double trainAcc = 0.0;  // eval mode on the fold's training portion
  double testAcc = 0.0;
  double testLoss = 0.0;
  int epochs = 0;
  int bestEpoch = 0;
};

struct CrossValidation {
  std::vector<FoldResult> folds;
  double meanTrainAcc = 0.0;
  double meanTestAcc = 0.0;
};

/// k-fold stratified evaluation. Each fold trains on the other folds minus a
/// stratified validation hold-out used for early stopping.
inline CrossValidation cross_validate(std::span<const Frame> frames, int k, const TrainConfig& cfg,
                                      double val_fraction, std::uint64_t seed,
                                      const std::function<void(const FoldResult&, const TrainResult&)>& on_fold = {}) {
  const auto folds = stratified_folds(frames, k, seed);
  CrossValidation cv;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> rest;
    for (int g = 0; g < k; ++g) {
      if (g != f) rest.insert(rest.end(), folds[static_cast<std::size_t>(g)].begin(), folds[static_cast<std::size_t>(g)].end());
    }
    std::sort(rest.begin(), rest.end());
    const std::vector<Frame> pool = gather(frames, rest);
    std::vector<int> labels;
    for (const Frame& fr : pool) labels.push_back(fr.label);
    const auto [tr, va] = stratified_holdout(labels, val_fraction, seed + static_cast<std::uint64_t>(f) + 1);
    const std::vector<Frame> train_set = gather(pool, tr);
    const std::vector<Frame> val_set = gather(pool, va);
    const std::vector<Frame> test_set = gather(frames, folds[static_cast<std::size_t>(f)]);

    TrainConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(f);
    TrainResult r = train(CANetModel::initialized(c.seed), train_set, val_set, c);
    FoldResult fr;
    fr.fold = f;
    fr.trainAcc = evaluate(r.model, train_set).accuracy;
    const Evaluation te = evaluate(r.model, test_set);
    fr.testAcc = te.accuracy;
    fr.testLoss = te.loss;
    fr.epochs = static_cast<int>(r.history.size());
    fr.bestEpoch = r.bestEpoch;
    cv.folds.push_back(fr);
    if (on_fold) on_fold(fr, r);
  }
  for (const FoldResult& fr : cv.folds) {
    cv.meanTrainAcc += fr.trainAcc / static_cast<double>(cv.folds.size());
    cv.meanTestAcc += fr.testAcc / static_cast<double>(cv.folds.size());
  }
  return cv;
}

// ---------------------------------------------------------------------------
// Checkpoint: text header, then little-endian f32 blocks.

inline constexpr const char* kCheckpointMagic = "MACA-CANET";
inline constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(std::ostream& os, const CANetModel& m) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << "main";
  for (int w : kMainWidths) os << ' ' << w;
  os << "\naux " << kAuxIn << ' ' << kAuxWidth << '\n';
  os << "head " << m.head.weight.cols() << ' ' << m.head.weight.rows() << '\n';
  os << "classes " << kClasses << '\n';
  os << "dropout " << m.dropout << '\n';
  os << "seed " << m.seed << '\n';
  os << "standardizer " << m.standardizer.mean.size() << '\n';
  os << "data\n";
  m.for_each_layer([&](const DenseLayer& l) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) io::put_f32(os, static_cast<float>(l.weight(r, c)));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) io::put_f32(os, static_cast<float>(l.bias(r)));
  });
  for (double v : m.standardizer.mean) io::put_f32(os, static_cast<float>(v));
  for (double v : m.standardizer.std) io::put_f32(os, static_cast<float>(v));
  if (!os) throw FormatError("save_checkpoint: stream error");
}

inline CANetModel load_checkpoint(std::istream& is) {
  auto expect_line = [&](const std::string& want) {
    std::string line;
    if (!std::getline(is, line) || line != want) throw FormatError("checkpoint: expected '" + want + "', got '" + line + "'");
  };
  CANetModel m;
  {
    std::ostringstream main;
    main << "main";
    for (int w : kMainWidths) main << ' ' << w;
    expect_line(std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion));
    expect_line(main.str());
    expect_line("aux " + std::to_string(kAuxIn) + " " + std::to_string(kAuxWidth));
    expect_line("head " + std::to_string(m.head.weight.cols()) + " " + std::to_string(kClasses));
    expect_line("classes " + std::to_string(kClasses));
  }
  std::string key;
  std::string line;
  while (std::getline(is, line) && line != "data") {
    std::istringstream ls(line);
    ls >> key;
    if (key == "dropout") {
      ls >> m.dropout;
    } else if (key == "seed") {
      ls >> m.seed;
    } else if (key == "standardizer") {
      std::size_t n = 0;
      ls >> n;
      if (n != kInputDim) throw FormatError("checkpoint: unexpected standardizer size");
    } else {
      throw FormatError("checkpoint: unknown header key '" + key + "'");
    }
  }
  if (line != "data") throw FormatError("checkpoint: missing data section");
  m.for_each_layer([&](DenseLayer& l) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = io::get_f32(is);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = io::get_f32(is);
  });
  for (double& v : m.standardizer.mean) v = io::get_f32(is);
  for (double& v : m.standardizer.std) v = io::get_f32(is);
  return m;
}

inline void save_checkpoint(const std::string& path, const CANetModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  save_checkpoint(os, m);
}

inline CANetModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return load_checkpoint(is);
}

inline void write_history_csv(std::ostream& os, std::span<const EpochStats> history) {
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (const EpochStats& e : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.trainLoss, e.trainAcc, e.valLoss, e.valAcc);
    os << buf;
  }
}

}  // namespace maca

#endif  // MACA_CANET_HPP_
