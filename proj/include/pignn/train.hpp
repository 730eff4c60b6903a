// Copyright 2026 The PI-GNN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The continual loop. Snapshot 1 trains a fresh model; every later snapshot
// runs
//
//   decompose -> rectify -> freeze -> expand -> isolate -> evaluate
//
// Rectification fine-tunes the previous model on
//   L(memory) - beta * L(unstable)
// and the result is frozen as the stable parameters. Isolation trains only
// the freshly expanded block on
//   L(total logits on changed nodes at t) + lambda * L(new-part logits on the
//   stable memory subset).

#ifndef PIGNN_TRAIN_HPP_
#define PIGNN_TRAIN_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pignn/adam.hpp"
#include "pignn/error.hpp"
#include "pignn/graph.hpp"
#include "pignn/metrics.hpp"
#include "pignn/model.hpp"
#include "pignn/rng.hpp"

namespace pignn {

enum class RectifyScope { kAll, kNewest };
enum class MemoryStructure { kOld, kNew };
enum class EvalStructure { kTask, kCurrent };

struct TrainConfig {
  double beta = 0.01;
  double lambda = 0.1;
  int initial_units = 12;
  int expand_units = 12;
  int memory_size = 256;
  int k = 2;  // hop radius and number of message-passing layers
  int epochs_initial = 400;
  int epochs_rectify = 10;
  int epochs_isolate = 100;
  int epochs_distill = 400;
  int student_hidden = 32;
  double lr = 0.001;
  int batch_size = 8;  // rectification, isolation and online fine-tuning; 0 = full batch
  Fanout fanout = Fanout::uniform(10);
  std::uint64_t seed = 0;
  Backbone backbone = Backbone::kSageMean;
  bool laterals = true;
  RectifyScope rectify_scope = RectifyScope::kAll;
  MemoryStructure memory_structure = MemoryStructure::kOld;
  EvalStructure eval_structure = EvalStructure::kTask;
  bool auto_balance = false;
  double deletion_distill_threshold = 0.5;

  void validate() const {
    auto bad = [](const std::string& what) { fail(ErrorCode::kConfigInvalid, what); };
    if (!(beta >= 0.0)) bad("beta must be >= 0");
    if (!(lambda >= 0.0)) bad("lambda must be >= 0");
    if (initial_units < 1) bad("initial_units must be >= 1");
    if (expand_units < 0) bad("expand_units must be >= 0");
    if (memory_size < 0) bad("memory_size must be >= 0");
    if (k < 1) bad("k must be >= 1");
    if (epochs_initial < 0 || epochs_rectify < 0 || epochs_isolate < 0 || epochs_distill < 0) {
      bad("epoch counts must be >= 0");
    }
    if (student_hidden < 1) bad("student_hidden must be >= 1");
    if (batch_size < 0) bad("batch_size must be >= 0");
    if (!(lr > 0.0)) bad("lr must be > 0");
    for (int f : fanout.per_layer) {
      if (f != kAllNeighbors && f < 1) bad("fanout entries must be >= 1 or all");
    }
  }

  ForwardOptions train_options(std::uint64_t stage, std::uint64_t t, std::uint64_t epoch) const {
    return {fanout, derive_seed(seed, {stage, t, epoch})};
  }

  ForwardOptions eval_options() const { return {Fanout::all(), derive_seed(seed, {seed_tag::kEval})}; }
};

/// The three right-hand terms of the retraining-loss bound at one snapshot,
/// plus its left-hand side.
struct BoundTerms {
  double lhs = 0.0;           // L(total) over changed and stable centers at t
  double changed_term = 0.0;  // L(total) over changed centers at t
  double half_stable = 0.0;   // 0.5 L(stable_part) over stable centers
  double half_new = 0.0;      // 0.5 L(new_part) over stable centers
  double preconditions_met = 1.0;
  double equality_residual = 0.0;  // ||new_part - stable_part||_F on stable centers

  double rhs() const { return changed_term + half_stable + half_new; }
  double gap() const { return rhs() - lhs; }
};

struct SnapshotRecord {
  int t = 0;
  std::size_t num_unstable = 0;
  std::size_t num_stable = 0;
  std::size_t num_changed = 0;
  std::size_t num_deleted = 0;
  bool skipped = false;  // empty change set: rectify and isolate were not run
  double beta_used = 0.0;
  double rectify_loss = 0.0;
  double isolate_loss = 0.0;
  BoundTerms bound;
  NodeList memory;
  NodeList stable_memory;
  double deletion_ratio = 0.0;
  bool distill_recommended = false;
  double seconds_rectify = 0.0;
  double seconds_isolate = 0.0;
  int width = 0;
};

struct RunResult {
  std::string method = "pi-gnn";
  TrainConfig config;
  AccuracyMatrix accuracy;
  std::vector<SnapshotRecord> records;  // one per t >= 2
  ExpandableGNN model;
  std::vector<int> widths;  // hidden width after each snapshot
  double initial_loss = 0.0;
  double seconds_initial = 0.0;
  std::vector<ExpandableGNN> rectified;  // [t-2]: stable parameters of snapshot t
  std::vector<ExpandableGNN> isolated;   // [t-2]: model after isolation at t
  MemoryBuffer distill_memory;           // memory from the second-to-last snapshot
  NodeList distill_changed;              // changed centers of the last snapshot
};

// ---------------------------------------------------------------------------
// Shared helpers.

inline NodeList filter_split(const Snapshot& s, const NodeList& nodes, Split split) {
  NodeList out;
  for (NodeId v : nodes) {
    if (s.contains(v) && s.splits[v] == split) out.push_back(v);
  }
  return out;
}

inline NodeList sorted_union(const NodeList& a, const NodeList& b) {
  NodeList out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

/// Splits one epoch's objective into mini-batches: the first term's nodes fix
/// the batch count ceil(|nodes| / batch_size), and every term's nodes are
/// shuffled and dealt into that many near-equal chunks. Coefficients are kept,
/// so the batch losses sum to the epoch objective. batch_size 0 (or a first
/// term no larger than batch_size) yields the spec unchanged.
inline std::vector<LossSpec> split_batches(const LossSpec& spec, int batch_size, std::uint64_t seed) {
  if (batch_size <= 0 || spec.empty() || spec.front().nodes.size() <= static_cast<std::size_t>(batch_size)) {
    return {spec};
  }
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  const std::size_t batches = (spec.front().nodes.size() + bs - 1) / bs;
  std::vector<LossSpec> out(batches);
  for (std::size_t ti = 0; ti < spec.size(); ++ti) {
    const LossTerm& term = spec[ti];
    std::vector<std::size_t> order(term.nodes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {ti}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = order.size() * b / batches;
      const std::size_t hi = order.size() * (b + 1) / batches;
      if (lo == hi) continue;
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                    order.begin() + static_cast<std::ptrdiff_t>(hi));
      std::sort(rows.begin(), rows.end());
      LossTerm part = term;
      part.nodes.clear();
      for (std::size_t r : rows) part.nodes.push_back(term.nodes[r]);
      if (term.soft_targets) {
        Matrix targets(static_cast<Eigen::Index>(rows.size()), term.soft_targets->cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          targets.row(static_cast<Eigen::Index>(i)) = term.soft_targets->row(static_cast<Eigen::Index>(rows[i]));
        }
        part.soft_targets = std::move(targets);
      }
      out[b].push_back(std::move(part));
    }
  }
  return out;
}

/// Runs `epochs` epochs of Adam; each epoch's objective comes from
/// `make_spec` and is split by split_batches, one Adam step per batch.
/// Returns the summed batch objectives of the last epoch (0 when epochs = 0).
inline double optimize(ExpandableGNN& model, int epochs, double lr,
                       const std::function<LossSpec(int)>& make_spec, int batch_size = 0,
                       std::uint64_t shuffle_seed = 0) {
  AdamState state = AdamState::for_model(model, lr);
  double last = 0.0;
  for (int e = 0; e < epochs; ++e) {
    last = 0.0;
    for (const LossSpec& batch :
         split_batches(make_spec(e), batch_size, derive_seed(shuffle_seed, {static_cast<std::uint64_t>(e)}))) {
      const LossAndGrad lg = backward(model, batch);
      adam_step(state, model, lg.grads);
      last += lg.loss;
    }
  }
  return last;
}

/// Accuracy on task i after training through snapshot t, per the configured
/// evaluation structure. Empty when the task has no test nodes.
inline std::optional<double> task_accuracy(const ExpandableGNN& model, const DynamicGraph& data,
                                           int t, int task, const TrainConfig& cfg) {
  const int structure = cfg.eval_structure == EvalStructure::kTask ? task : t;
  const NodeList nodes = data.task_nodes(task, Split::kTest, structure);
  if (nodes.empty()) return std::nullopt;
  return accuracy(model, data.at(structure), nodes, cfg.eval_options());
}

inline void evaluate_row(const ExpandableGNN& model, const DynamicGraph& data, int t,
                         const TrainConfig& cfg, AccuracyMatrix& m) {
  for (int i = 1; i <= t; ++i) m.set(t, i, task_accuracy(model, data, t, i, cfg));
}

/// Mean accuracy over all tasks with the model as it stands after the last
/// snapshot.
inline double final_mean_accuracy(const ExpandableGNN& model, const DynamicGraph& data,
                                  const TrainConfig& cfg) {
  const int T = data.num_snapshots();
  double sum = 0.0;
  int n = 0;
  for (int i = 1; i <= T; ++i) {
    if (auto a = task_accuracy(model, data, T, i, cfg)) {
      sum += *a;
      ++n;
    }
  }
  return n == 0 ? std::nan("") : sum / n;
}

inline ExpandableGNN fresh_model(const TrainConfig& cfg, const DynamicGraph& data, int hidden) {
  return ExpandableGNN::create(cfg.backbone, data.feature_dim, data.num_classes, hidden, cfg.k,
                               cfg.seed, cfg.laterals);
}

// ---------------------------------------------------------------------------
// Stages.

/// L(memory) - beta * L(unstable) on total logits of `prev`.
inline LossSpec rectification_objective(const Snapshot& prev, const NodeList& memory, const NodeList& unstable,
                                        double beta, const ForwardOptions& opts) {
  LossSpec spec;
  spec.push_back({&prev, memory, 1.0, LogitSelector::kTotal, std::nullopt, opts});
  if (!unstable.empty()) spec.push_back({&prev, unstable, -beta, LogitSelector::kTotal, std::nullopt, opts});
  return spec;
}

/// L(total on changed at cur) + lambda * L(new_part on stable memory).
inline LossSpec isolation_objective(const Snapshot& cur, const NodeList& changed, const Snapshot& memory_graph,
                                    const NodeList& stable_memory, double lambda, const ForwardOptions& opts) {
  LossSpec spec;
  if (!changed.empty()) spec.push_back({&cur, changed, 1.0, LogitSelector::kTotal, std::nullopt, opts});
  if (!stable_memory.empty()) {
    spec.push_back({&memory_graph, stable_memory, lambda, LogitSelector::kNew, std::nullopt, opts});
  }
  return spec;
}

/// Full-batch training on the train split of `g`.
inline ExpandableGNN train_initial(ExpandableGNN model, const Snapshot& g, const TrainConfig& cfg,
                                   double* final_loss = nullptr) {
  const NodeList train = g.nodes_with_split(Split::kTrain);
  const double loss = optimize(model, cfg.epochs_initial, cfg.lr, [&](int e) {
    LossSpec spec;
    spec.push_back({&g, train, 1.0, LogitSelector::kTotal, std::nullopt,
                    cfg.train_options(seed_tag::kInitialEpoch, static_cast<std::uint64_t>(g.index),
                                      static_cast<std::uint64_t>(e))});
    return spec;
  });
  if (final_loss) *final_loss = loss;
  return model;
}

/// Minimises L(memory) - beta * L(unstable) on snapshot `prev` using total
/// logits. Trainable scope follows cfg.rectify_scope; the caller freezes the
/// result.
inline ExpandableGNN rectify(ExpandableGNN model, const Snapshot& prev, const MemoryBuffer& memory,
                             const NodeList& unstable, double beta, int epochs,
                             const TrainConfig& cfg, double* final_loss = nullptr) {
  if (memory.empty()) fail(ErrorCode::kEmptyMemory, "rectification needs a non-empty memory buffer");
  if (memory.source_snapshot != prev.index) {
    fail(ErrorCode::kSnapshotMismatch, "memory was drawn from snapshot " +
                                           std::to_string(memory.source_snapshot));
  }
  model = cfg.rectify_scope == RectifyScope::kAll ? unfreeze_all(model) : unfreeze_newest(model);
  const NodeList unstable_train = filter_split(prev, unstable, Split::kTrain);
  const double loss = optimize(model, epochs, cfg.lr, [&](int e) {
    const auto opts = cfg.train_options(seed_tag::kRectifyEpoch, static_cast<std::uint64_t>(prev.index),
                                        static_cast<std::uint64_t>(e));
    return rectification_objective(prev, memory.center_nodes, unstable_train, beta, opts);
  }, cfg.batch_size, derive_seed(cfg.seed, {seed_tag::kRectifyEpoch, static_cast<std::uint64_t>(prev.index)}));
  if (final_loss) *final_loss = loss;
  return model;
}

/// Trains the unfrozen (new) parameters on
///   L(total on changed at cur) + lambda * L(new_part on stable memory).
/// `memory_graph` is the snapshot the memory neighborhoods are taken from.
inline ExpandableGNN isolate_train(ExpandableGNN model, const Snapshot& cur, const NodeList& changed,
                                   const Snapshot& memory_graph, const MemoryBuffer& stable_memory,
                                   double lambda, int epochs, const TrainConfig& cfg,
                                   double* final_loss = nullptr) {
  if (!model.any_trainable() || !model.has_new_blocks()) {
    fail(ErrorCode::kNotExpanded, "isolation requires an expanded model with trainable blocks");
  }
  const NodeList changed_train = filter_split(cur, changed, Split::kTrain);
  const double loss = optimize(model, epochs, cfg.lr, [&](int e) {
    const auto opts = cfg.train_options(seed_tag::kIsolateEpoch, static_cast<std::uint64_t>(cur.index),
                                        static_cast<std::uint64_t>(e));
    return isolation_objective(cur, changed_train, memory_graph, stable_memory.center_nodes, lambda, opts);
  }, cfg.batch_size, derive_seed(cfg.seed, {seed_tag::kIsolateEpoch, static_cast<std::uint64_t>(cur.index)}));
  if (final_loss) *final_loss = loss;
  return model;
}

/// Bound terms of `model` at snapshot `cur` for the given decomposition.
inline BoundTerms compute_bound_terms(const ExpandableGNN& model, const Snapshot& cur,
                                      const Decomposition& d, const ForwardOptions& opts) {
  BoundTerms b;
  const NodeList all = sorted_union(d.changed_centers, d.stable_centers);
  if (!all.empty()) b.lhs = loss_ce(forward(model, cur, all, opts).total, cur.labels_of(all));
  if (!d.changed_centers.empty()) {
    b.changed_term = loss_ce(forward(model, cur, d.changed_centers, opts).total,
                             cur.labels_of(d.changed_centers));
  }
  if (!d.stable_centers.empty()) {
    const LogitPair p = forward(model, cur, d.stable_centers, opts);
    const auto labels = cur.labels_of(d.stable_centers);
    b.half_stable = 0.5 * loss_ce(p.stable_part, labels);
    b.half_new = 0.5 * loss_ce(p.new_part, labels);
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < p.total.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      if (p.stable_part(i, y) >= p.stable_part.row(i).maxCoeff() &&
          p.new_part(i, y) >= p.new_part.row(i).maxCoeff()) {
        ++ok;
      }
    }
    b.preconditions_met = static_cast<double>(ok) / static_cast<double>(labels.size());
    b.equality_residual = (p.new_part - p.stable_part).norm();
  }
  return b;
}

/// Runs the full continual loop over `data`.
inline RunResult continual_run(const DynamicGraph& data, const TrainConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a) {
    return std::chrono::duration<double>(Clock::now() - a).count();
  };
  cfg.validate();
  const int T = data.num_snapshots();
  if (T < 1) fail(ErrorCode::kConfigInvalid, "continual_run needs at least one snapshot");
  RunResult run;
  run.config = cfg;
  run.accuracy = AccuracyMatrix(T);

  auto t0 = Clock::now();
  ExpandableGNN model = fresh_model(cfg, data, cfg.initial_units);
  model = train_initial(std::move(model), data.at(1), cfg, &run.initial_loss);
  run.seconds_initial = seconds(t0);
  evaluate_row(model, data, 1, cfg, run.accuracy);
  run.widths.push_back(model.hidden_width());
  const auto mem_size = static_cast<std::size_t>(cfg.memory_size);
  run.distill_memory = sample_memory(data.at(1), mem_size,
                                     derive_seed(cfg.seed, {seed_tag::kMemory, 1}), Split::kTrain, cfg.k);
  run.distill_changed = data.at(1).nodes_with_split(Split::kTrain);

  for (int t = 2; t <= T; ++t) {
    const Snapshot& prev = data.at(t - 1);
    const Snapshot& cur = data.at(t);
    const Decomposition d = decompose(prev, data.delta_into(t), cfg.k);
    SnapshotRecord rec;
    rec.t = t;
    rec.num_unstable = d.unstable_centers.size();
    rec.num_stable = d.stable_centers.size();
    rec.num_changed = d.changed_centers.size();
    rec.num_deleted = d.deleted_centers.size();
    rec.deletion_ratio = prev.num_nodes() == 0
                             ? 0.0
                             : static_cast<double>(d.deleted_centers.size()) /
                                   static_cast<double>(prev.num_nodes());
    rec.distill_recommended = rec.deletion_ratio > cfg.deletion_distill_threshold;
    rec.skipped = d.changed_centers.empty();

    const MemoryBuffer memory = sample_memory(
        prev, mem_size, derive_seed(cfg.seed, {seed_tag::kMemory, static_cast<std::uint64_t>(t - 1)}),
        Split::kTrain, cfg.k);
    const MemoryBuffer stable_mem = stable_memory_subset(memory, d);
    rec.memory = memory.center_nodes;
    rec.stable_memory = stable_mem.center_nodes;
    rec.beta_used = cfg.auto_balance && prev.num_nodes() > 0
                        ? static_cast<double>(memory.size()) / static_cast<double>(prev.num_nodes())
                        : cfg.beta;

    t0 = Clock::now();
    if (!rec.skipped) {
      model = rectify(std::move(model), prev, memory, d.unstable_centers, rec.beta_used,
                      cfg.epochs_rectify, cfg, &rec.rectify_loss);
    }
    model = freeze_stable(model);
    rec.seconds_rectify = seconds(t0);
    run.rectified.push_back(model);

    model = expand(model, cfg.expand_units,
                   derive_seed(cfg.seed, {seed_tag::kExpand, static_cast<std::uint64_t>(t)}));
    t0 = Clock::now();
    if (!rec.skipped && model.has_new_blocks()) {
      const Snapshot& mem_graph = cfg.memory_structure == MemoryStructure::kOld ? prev : cur;
      model = isolate_train(std::move(model), cur, d.changed_centers, mem_graph, stable_mem,
                            cfg.lambda, cfg.epochs_isolate, cfg, &rec.isolate_loss);
    }
    rec.seconds_isolate = seconds(t0);
    run.isolated.push_back(model);
    rec.bound = compute_bound_terms(model, cur, d, cfg.eval_options());
    rec.width = model.hidden_width();
    run.widths.push_back(rec.width);

    evaluate_row(model, data, t, cfg, run.accuracy);
    run.distill_memory = memory;
    run.distill_changed = d.changed_centers;
    run.records.push_back(std::move(rec));
  }
  run.model = std::move(model);
  return run;
}

// ---------------------------------------------------------------------------
// Distillation.

/// Sum over nodes of CE(softmax(teacher), softmax(student)).
inline double distillation_loss(const ExpandableGNN& teacher, const ExpandableGNN& student,
                                const Snapshot& s, const NodeList& nodes, const ForwardOptions& opts) {
  const Matrix targets = softmax(forward(teacher, s, nodes, opts).total);
  return soft_cross_entropy(forward(student, s, nodes, opts).total, targets);
}

/// Trains a fresh single-block student of width `student_hidden` on the
/// teacher's soft targets over the memory centers (on `memory_graph`) and the
/// changed centers (on `changed_graph`). Only train-split nodes are used.
inline ExpandableGNN distill(const ExpandableGNN& teacher, const Snapshot& memory_graph,
                             const MemoryBuffer& memory, const Snapshot& changed_graph,
                             const NodeList& changed, int student_hidden, int epochs,
                             const TrainConfig& cfg, double* final_loss = nullptr) {
  if (student_hidden < 1) fail(ErrorCode::kConfigInvalid, "student_hidden must be >= 1");
  ExpandableGNN student = ExpandableGNN::create(teacher.backbone, teacher.input_dim, teacher.num_classes,
                                                student_hidden, teacher.depth,
                                                derive_seed(cfg.seed, {seed_tag::kDistill}),
                                                teacher.laterals);
  struct Part {
    const Snapshot* graph;
    NodeList nodes;
    Matrix targets;
  };
  std::vector<Part> parts;
  const auto eval = cfg.eval_options();
  auto add = [&](const Snapshot& g, const NodeList& nodes) {
    NodeList train = filter_split(g, nodes, Split::kTrain);
    if (train.empty()) return;
    Matrix targets = softmax(forward(teacher, g, train, eval).total);
    parts.push_back({&g, std::move(train), std::move(targets)});
  };
  add(memory_graph, memory.center_nodes);
  add(changed_graph, changed);
  const double loss = optimize(student, epochs, cfg.lr, [&](int e) {
    LossSpec spec;
    for (const auto& p : parts) {
      spec.push_back({p.graph, p.nodes, 1.0, LogitSelector::kTotal, p.targets,
                      cfg.train_options(seed_tag::kDistill, static_cast<std::uint64_t>(p.graph->index),
                                        static_cast<std::uint64_t>(e))});
    }
    return spec;
  });
  if (final_loss) *final_loss = loss;
  return student;
}

/// Distils the final model of a completed run with its recorded memory and
/// change sets.
inline ExpandableGNN distill_run(const RunResult& run, const DynamicGraph& data, int student_hidden,
                                 int epochs, double* final_loss = nullptr) {
  const int T = data.num_snapshots();
  return distill(run.model, data.at(run.distill_memory.source_snapshot), run.distill_memory, data.at(T),
                 run.distill_changed, student_hidden, epochs, run.config, final_loss);
}

}  // namespace pignn

#endif  // PIGNN_TRAIN_HPP_
