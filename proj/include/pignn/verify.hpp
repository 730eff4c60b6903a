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

// Numerical checks of the additive-logit loss inequality
//
//   2 L(z1 + z2) <= L(z1) + L(z2)
//
// (which holds per node whenever both z1 and z2 rank the true class first)
// and the resulting bound on the retraining loss after isolation. Also loss
// partition identities, finite-difference gradient checks, a brute-force
// decomposition cross-check and hidden-activation dumps.

#ifndef PIGNN_VERIFY_HPP_
#define PIGNN_VERIFY_HPP_

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pignn/error.hpp"
#include "pignn/graph.hpp"
#include "pignn/model.hpp"
#include "pignn/rng.hpp"
#include "pignn/tensor.hpp"
#include "pignn/train.hpp"

namespace pignn {

inline constexpr double kLemmaTolerance = 1e-12;
inline constexpr double kBoundTolerance = 1e-9;

/// True when the label's logit is at least every other logit.
inline bool ranks_label_first(const Eigen::Ref<const RowVector>& z, int label) {
  return z(label) >= z.maxCoeff();
}

struct LemmaNode {
  double lhs = 0.0;  // 2 CE(z1 + z2)
  double rhs = 0.0;  // CE(z1) + CE(z2)
  bool precondition = false;
  bool holds = false;
};

struct LemmaReport {
  double lhs = 0.0;
  double rhs = 0.0;
  std::vector<LemmaNode> nodes;
  std::size_t precondition_nodes = 0;
  std::size_t conditional_violations = 0;    // precondition met, inequality fails
  std::size_t unconditional_violations = 0;  // informational
  bool holds = true;                         // over precondition-satisfying nodes

  double slack() const { return rhs - lhs; }
};

inline LemmaReport verify_lemma(const Matrix& z1, const Matrix& z2, std::span<const int> labels) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols() ||
      static_cast<std::size_t>(z1.rows()) != labels.size()) {
    fail(ErrorCode::kShapeMismatch, "verify_lemma: logit blocks and labels must align");
  }
  LemmaReport r;
  const Matrix sum = z1 + z2;
  for (Eigen::Index i = 0; i < z1.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    check_label(y, z1.cols());
    LemmaNode n;
    n.lhs = 2.0 * (log_sum_exp(sum.row(i)) - sum(i, y));
    n.rhs = (log_sum_exp(z1.row(i)) - z1(i, y)) + (log_sum_exp(z2.row(i)) - z2(i, y));
    n.precondition = ranks_label_first(z1.row(i), y) && ranks_label_first(z2.row(i), y);
    n.holds = n.lhs <= n.rhs + kLemmaTolerance;
    r.lhs += n.lhs;
    r.rhs += n.rhs;
    if (!n.holds) ++r.unconditional_violations;
    if (n.precondition) {
      ++r.precondition_nodes;
      if (!n.holds) ++r.conditional_violations;
    }
    r.nodes.push_back(n);
  }
  r.holds = r.conditional_violations == 0;
  return r;
}

struct BoundRow {
  int t = 0;
  BoundTerms terms;           // lhs recomputed over every node of G^t
  double recorded_lhs = 0.0;  // as logged by the trainer
  bool asserted = false;      // preconditions_met == 1
  bool ok = true;
};

struct BoundReport {
  std::vector<BoundRow> rows;
  bool holds = true;
};

/// Recomputes the bound at every t >= 2 from the run's checkpoints. The
/// inequality is asserted only where every stable center satisfies the
/// ranking precondition for both logit parts.
inline BoundReport verify_theorem(const RunResult& run, const DynamicGraph& data) {
  const int T = data.num_snapshots();
  if (static_cast<int>(run.isolated.size()) != T - 1 ||
      static_cast<int>(run.records.size()) != T - 1) {
    fail(ErrorCode::kMissingCheckpoints, "run has " + std::to_string(run.isolated.size()) +
                                             " isolation checkpoints for " + std::to_string(T) +
                                             " snapshots");
  }
  BoundReport rep;
  const auto opts = run.config.eval_options();
  for (int t = 2; t <= T; ++t) {
    const Snapshot& cur = data.at(t);
    const ExpandableGNN& model = run.isolated[static_cast<std::size_t>(t - 2)];
    const Decomposition d = decompose(data.at(t - 1), data.delta_into(t), run.config.k);
    BoundRow row;
    row.t = t;
    row.terms = compute_bound_terms(model, cur, d, opts);
    row.terms.lhs = cur.nodes.empty() ? 0.0
                                      : loss_ce(forward(model, cur, cur.nodes, opts).total,
                                                cur.labels_of(cur.nodes));
    row.recorded_lhs = run.records[static_cast<std::size_t>(t - 2)].bound.lhs;
    row.asserted = row.terms.preconditions_met == 1.0;
    row.ok = !row.asserted || row.terms.gap() >= -kBoundTolerance;
    rep.holds = rep.holds && row.ok;
    rep.rows.push_back(row);
  }
  return rep;
}

struct PartitionCheck {
  double whole = 0.0;
  double parts = 0.0;
  double residual() const { return std::abs(whole - parts); }
};

namespace detail {
inline double set_loss(const ExpandableGNN& m, const Snapshot& s, const NodeList& nodes,
                       const ForwardOptions& opts) {
  if (nodes.empty()) return 0.0;
  return loss_ce(forward(m, s, nodes, opts).total, s.labels_of(nodes));
}
}  // namespace detail

/// L(G^{t-1}) against L(stable) + L(unstable) (+ L(deleted) when the delta
/// removes nodes), all on G^{t-1}.
inline PartitionCheck check_previous_partition(const ExpandableGNN& m, const Snapshot& prev,
                                               const Decomposition& d, const ForwardOptions& opts) {
  PartitionCheck c;
  c.whole = detail::set_loss(m, prev, prev.nodes, opts);
  c.parts = detail::set_loss(m, prev, d.stable_centers, opts) +
            detail::set_loss(m, prev, d.unstable_centers, opts) +
            detail::set_loss(m, prev, d.deleted_centers, opts);
  return c;
}

/// L(G^t) against L(stable centers evaluated on G^{t-1}) + L(changed on G^t).
/// Holds only if stable ego-networks really are untouched by the delta.
inline PartitionCheck check_current_partition(const ExpandableGNN& m, const Snapshot& prev,
                                              const Snapshot& cur, const Decomposition& d,
                                              const ForwardOptions& opts) {
  PartitionCheck c;
  c.whole = detail::set_loss(m, cur, cur.nodes, opts);
  c.parts = detail::set_loss(m, prev, d.stable_centers, opts) +
            detail::set_loss(m, cur, d.changed_centers, opts);
  return c;
}

// ---------------------------------------------------------------------------
// Gradient checks.

struct GradCheckReport {
  std::size_t entries = 0;  // parameters compared
  std::size_t skipped = 0;  // both values below the noise floor
  std::size_t kinks = 0;    // a probe flipped a ReLU, difference quotient undefined
  double max_rel_error = 0.0;
  std::string worst;  // segment holding the largest error
  bool frozen_clean = true;  // no gradient reported for a frozen block
};

inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckFloor = 1e-7;

namespace detail {

/// Sign pattern of every hidden pre-activation the objective can reach.
inline std::vector<bool> relu_pattern(const ExpandableGNN& m, const LossSpec& spec) {
  std::vector<bool> out;
  for (const auto& term : spec) {
    if (term.coefficient == 0.0 || term.nodes.empty()) continue;
    for (int layer = 1; layer <= m.depth; ++layer) {
      const Matrix h = hidden_activations(m, *term.snapshot, term.snapshot->nodes, layer, term.options);
      for (Eigen::Index i = 0; i < h.size(); ++i) out.push_back(h.data()[i] > 0.0);
    }
  }
  return out;
}

}  // namespace detail

/// Compares backward() with the five-point central difference over every
/// trainable entry. Relative error is |a - n| / max(|a|, |n|); entries where
/// both are below kGradCheckFloor and differ by less than 1e-9 count as
/// skipped. Entries whose probes change any ReLU sign pattern are counted as
/// kinks and not compared.
inline GradCheckReport gradient_check(const ExpandableGNN& model, const LossSpec& spec,
                                      double step = kGradCheckStep) {
  GradCheckReport r;
  const LossAndGrad analytic = backward(model, spec);
  const std::vector<bool> base_pattern = detail::relu_pattern(model, spec);
  ExpandableGNN probe = model;
  auto segs = segments(probe);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const bool trainable = model.frozen[static_cast<std::size_t>(segs[i].block)] == 0;
    const auto it = analytic.grads.by_segment.find(i);
    if (!trainable) {
      if (it != analytic.grads.by_segment.end()) r.frozen_clean = false;
      continue;
    }
    if (it == analytic.grads.by_segment.end()) {
      r.max_rel_error = std::max(r.max_rel_error, 1.0);
      r.worst = segs[i].name + " (missing)";
      continue;
    }
    Matrix& w = *segs[i].value;
    for (Eigen::Index e = 0; e < w.size(); ++e) {
      const double saved = w.data()[e];
      double f[4];
      bool kink = false;
      const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
      for (int k = 0; k < 4; ++k) {
        w.data()[e] = saved + offsets[k] * step;
        f[k] = evaluate_loss(probe, spec);
        kink = kink || detail::relu_pattern(probe, spec) != base_pattern;
      }
      w.data()[e] = saved;
      if (kink) {
        ++r.kinks;
        continue;
      }
      const double numeric = (-f[0] + 8.0 * f[1] - 8.0 * f[2] + f[3]) / (12.0 * step);
      const double a = it->second.data()[e];
      const double diff = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      if (scale < kGradCheckFloor && diff < 1e-9) {
        ++r.skipped;
        continue;
      }
      ++r.entries;
      const double rel = diff / scale;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = segs[i].name;
      }
    }
  }
  return r;
}

namespace detail {

inline void randomize_parameters(ExpandableGNN& m, Rng& rng, bool trainable_only) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& seg : segments(m)) {
    if (trainable_only && m.frozen[static_cast<std::size_t>(seg.block)] != 0) continue;
    for (Eigen::Index e = 0; e < seg.value->size(); ++e) seg.value->data()[e] = u(rng);
  }
}

inline NodeList random_subset(const NodeList& from, Rng& rng, std::size_t min_size = 1) {
  NodeList out;
  std::bernoulli_distribution coin(0.5);
  for (NodeId v : from) {
    if (coin(rng)) out.push_back(v);
  }
  for (std::size_t i = 0; out.size() < std::min(min_size, from.size()); ++i) {
    if (!std::binary_search(out.begin(), out.end(), from[i])) {
      out.insert(std::upper_bound(out.begin(), out.end(), from[i]), from[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Random labelled graph with ids 0..n-1 and edge probability p.
inline Snapshot random_snapshot(Rng& rng, int n, int d, int num_classes, double p, int index = 1) {
  std::normal_distribution<double> feat(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, num_classes - 1);
  std::bernoulli_distribution edge(p);
  std::vector<NodeRecord> records;
  for (int i = 0; i < n; ++i) {
    NodeRecord r;
    r.id = static_cast<NodeId>(i);
    for (int j = 0; j < d; ++j) r.features.push_back(feat(rng));
    r.label = label(rng);
    records.push_back(std::move(r));
  }
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (edge(rng)) edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
    }
  }
  return Snapshot::from_parts(index, d, records, edges);
}

struct GradCheckCase {
  std::string description;
  GradCheckReport rectify;  // memory - beta * unstable, all blocks trainable
  GradCheckReport isolate;  // changed + lambda * new part, stable blocks frozen
};

struct GradCheckSuite {
  std::vector<GradCheckCase> cases;
  double max_rel_error = 0.0;
  bool frozen_clean = true;

  bool passed(double tolerance) const { return frozen_clean && max_rel_error < tolerance; }
};

/// Random small models (both backbones, total width <= 16, graphs <= 12
/// nodes) checked on the rectification and isolation objectives.
inline GradCheckSuite gradcheck_suite(int num_cases, std::uint64_t seed) {
  GradCheckSuite suite;
  for (int c = 0; c < num_cases; ++c) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const Backbone backbone = c % 2 == 0 ? Backbone::kSageMean : Backbone::kGcn;
    const int n = pick(4, 12);
    const int d = pick(2, 5);
    const int classes = pick(2, 4);
    const int w0 = pick(2, 8);
    const int w1 = pick(2, 8);
    const int depth = pick(1, 2);
    const bool laterals = pick(0, 3) != 0;
    const Snapshot prev = random_snapshot(rng, n, d, classes, 0.3, 1);
    const Snapshot cur = random_snapshot(rng, pick(4, 12), d, classes, 0.3, 2);

    ForwardOptions opts;
    opts.fanout = pick(0, 1) == 0 ? Fanout::all() : Fanout::uniform(pick(1, 3));
    opts.seed = derive_seed(seed, {static_cast<std::uint64_t>(c), 7});

    ExpandableGNN m = ExpandableGNN::create(backbone, d, classes, w0, depth, opts.seed, laterals);
    detail::randomize_parameters(m, rng, false);
    const double beta = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    const LossSpec rect = rectification_objective(prev, detail::random_subset(prev.nodes, rng),
                                                  detail::random_subset(prev.nodes, rng), beta, opts);

    ExpandableGNN grown = expand(freeze_stable(m), w1, opts.seed);
    detail::randomize_parameters(grown, rng, true);
    const double lambda = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const LossSpec iso = isolation_objective(cur, detail::random_subset(cur.nodes, rng), prev,
                                             detail::random_subset(prev.nodes, rng), lambda, opts);

    GradCheckCase gc;
    gc.description = std::string(to_string(backbone)) + " n=" + std::to_string(n) + " widths=" +
                     std::to_string(w0) + "+" + std::to_string(w1) + " depth=" + std::to_string(depth) +
                     (laterals ? "" : " no-laterals");
    gc.rectify = gradient_check(m, rect);
    gc.isolate = gradient_check(grown, iso);
    suite.max_rel_error = std::max({suite.max_rel_error, gc.rectify.max_rel_error, gc.isolate.max_rel_error});
    suite.frozen_clean = suite.frozen_clean && gc.rectify.frozen_clean && gc.isolate.frozen_clean;
    suite.cases.push_back(std::move(gc));
  }
  return suite;
}

// ---------------------------------------------------------------------------
// Random lemma suite.

struct LemmaSuite {
  std::size_t pairs = 0;
  std::size_t attempts = 0;           // draws until `pairs` premise-satisfying pairs were found
  std::size_t violations = 0;         // premise met, inequality fails
  double min_slack = INFINITY;        // min over accepted pairs of rhs - lhs
  double max_equal_case_gap = 0.0;    // max |rhs - lhs| over z1 == z2 pairs
  double max_equal_case_gap_tied = 0.0;  // same, restricted to all-equal logit rows

  bool inequality_holds() const { return violations == 0; }
};

/// Rejection-samples single-node logit pairs (2..6 classes, logits in
/// [-5, 5]) until both rank the label first; also evaluates z1 == z2 pairs.
inline LemmaSuite lemma_suite(std::size_t pairs, std::uint64_t seed) {
  LemmaSuite s;
  Rng rng(seed);
  std::uniform_int_distribution<int> classes(2, 6);
  std::uniform_real_distribution<double> logit(-5.0, 5.0);
  while (s.pairs < pairs) {
    ++s.attempts;
    const int C = classes(rng);
    Matrix z1(1, C);
    Matrix z2(1, C);
    for (int j = 0; j < C; ++j) {
      z1(0, j) = logit(rng);
      z2(0, j) = logit(rng);
    }
    const int y = std::uniform_int_distribution<int>(0, C - 1)(rng);
    if (!ranks_label_first(z1.row(0), y) || !ranks_label_first(z2.row(0), y)) continue;
    ++s.pairs;
    const int labels[] = {y};
    const LemmaReport r = verify_lemma(z1, z2, labels);
    if (!r.holds) ++s.violations;
    s.min_slack = std::min(s.min_slack, r.slack());

    const LemmaReport same = verify_lemma(z1, z1, labels);
    s.max_equal_case_gap = std::max(s.max_equal_case_gap, std::abs(same.slack()));
    const Matrix tied = Matrix::Constant(1, C, z1(0, 0));
    const LemmaReport flat = verify_lemma(tied, tied, labels);
    s.max_equal_case_gap_tied = std::max(s.max_equal_case_gap_tied, std::abs(flat.slack()));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Decomposition cross-check.

/// Brute-force decomposition: touched nodes are survivors whose neighbor set
/// differs between the two snapshots; a survivor is unstable when a
/// breadth-first search from it reaches a touched node within k hops on prev.
inline Decomposition decompose_reference(const Snapshot& prev, const SnapshotDelta& delta, int k) {
  const Snapshot next = apply_delta(prev, delta);
  Decomposition d;
  d.source_index = prev.index;
  d.k = k;
  std::set<NodeId> touched;
  for (NodeId v : prev.nodes) {
    if (next.contains(v) && prev.adjacency[v] != next.adjacency[v]) touched.insert(v);
  }
  d.touched.assign(touched.begin(), touched.end());
  for (NodeId v : prev.nodes) {
    if (!next.contains(v)) {
      d.deleted_centers.push_back(v);
      continue;
    }
    std::vector<int> dist(prev.capacity(), -1);
    std::vector<NodeId> frontier = {v};
    dist[v] = 0;
    bool near = touched.count(v) != 0;
    for (int hop = 1; hop <= k && !near && !frontier.empty(); ++hop) {
      std::vector<NodeId> next_frontier;
      for (NodeId x : frontier) {
        for (NodeId y : prev.adjacency[x]) {
          if (dist[y] >= 0) continue;
          dist[y] = hop;
          if (touched.count(y)) near = true;
          next_frontier.push_back(y);
        }
      }
      frontier = std::move(next_frontier);
    }
    (near ? d.unstable_centers : d.stable_centers).push_back(v);
  }
  d.changed_centers = d.unstable_centers;
  for (NodeId v : next.nodes) {
    if (!prev.contains(v)) d.changed_centers.push_back(v);
  }
  std::sort(d.changed_centers.begin(), d.changed_centers.end());
  return d;
}

/// Random delta on `prev`: node and edge additions and deletions, each with
/// the given per-item probability.
inline SnapshotDelta random_delta(const Snapshot& prev, Rng& rng, double p, int max_new_nodes,
                                  int num_classes) {
  std::bernoulli_distribution coin(p);
  std::normal_distribution<double> feat(0.0, 1.0);
  SnapshotDelta delta;
  std::set<NodeId> removed;
  for (NodeId v : prev.nodes) {
    if (coin(rng)) {
      delta.deleted_nodes.push_back(v);
      removed.insert(v);
    }
  }
  for (const Edge& e : prev.edges()) {
    if (!removed.count(e.u) && !removed.count(e.v) && coin(rng)) delta.deleted_edges.push_back(e);
  }
  const int added = std::uniform_int_distribution<int>(0, max_new_nodes)(rng);
  NodeId next_id = static_cast<NodeId>(prev.capacity());
  std::vector<NodeId> fresh;
  for (int i = 0; i < added; ++i) {
    NodeRecord r;
    r.id = next_id++;
    for (int j = 0; j < prev.feature_dim; ++j) r.features.push_back(feat(rng));
    r.label = std::uniform_int_distribution<int>(0, num_classes - 1)(rng);
    fresh.push_back(r.id);
    delta.added_nodes.push_back(std::move(r));
  }
  std::vector<NodeId> alive;
  for (NodeId v : prev.nodes) {
    if (!removed.count(v)) alive.push_back(v);
  }
  alive.insert(alive.end(), fresh.begin(), fresh.end());
  std::set<Edge> dropped(delta.deleted_edges.begin(), delta.deleted_edges.end());
  for (std::size_t a = 0; a < alive.size(); ++a) {
    for (std::size_t b = a + 1; b < alive.size(); ++b) {
      const Edge e = Edge::make(alive[a], alive[b]);
      if (prev.has_edge(e.u, e.v) || dropped.count(e)) continue;
      if (std::bernoulli_distribution(p / 4.0)(rng)) delta.added_edges.push_back(e);
    }
  }
  return delta;
}

struct DecomposeSuite {
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  std::string first_mismatch;
};

/// decompose() against decompose_reference() on random graphs (<= 60 nodes)
/// and deltas with additions and deletions, k in {1, 2}.
inline DecomposeSuite decompose_suite(std::size_t cases, std::uint64_t seed) {
  DecomposeSuite s;
  for (std::size_t c = 0; c < cases; ++c) {
    Rng rng(derive_seed(seed, {c}));
    const int n = std::uniform_int_distribution<int>(1, 60)(rng);
    const double p = std::uniform_real_distribution<double>(0.01, 0.15)(rng);
    const Snapshot prev = random_snapshot(rng, n, 2, 3, p);
    const SnapshotDelta delta = random_delta(prev, rng, std::uniform_real_distribution<double>(0.0, 0.1)(rng), 5, 3);
    const int k = 1 + static_cast<int>(c % 2);
    ++s.cases;
    if (!(decompose(prev, delta, k) == decompose_reference(prev, delta, k))) {
      if (s.mismatches++ == 0) s.first_mismatch = "case " + std::to_string(c);
    }
  }
  return s;
}

struct ActivationDump {
  int layer = 1;
  NodeList nodes;
  Matrix values;                   // |nodes| x width, stable units first
  std::vector<int> block_offsets;  // column where each block starts
  std::vector<int> block_widths;

  /// Mean over nodes of the summed activations in one block.
  double block_mass(int block) const {
    if (values.rows() == 0) return 0.0;
    const auto b = static_cast<std::size_t>(block);
    return values.middleCols(block_offsets.at(b), block_widths.at(b)).sum() /
           static_cast<double>(values.rows());
  }
};

inline ActivationDump dump_activations(const ExpandableGNN& model, const Snapshot& s,
                                       const NodeList& nodes, int layer,
                                       const ForwardOptions& opts = {}) {
  ActivationDump d;
  d.layer = layer;
  d.nodes = nodes;
  d.values = hidden_activations(model, s, nodes, layer, opts);
  d.block_offsets = model.block_offsets();
  d.block_widths = model.block_widths;
  return d;
}

}  // namespace pignn

#endif  // PIGNN_VERIFY_HPP_
