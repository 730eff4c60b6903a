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

// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pignn/pignn.hpp"

namespace {

using namespace pignn;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kGradBudget = 60.0;
constexpr std::size_t kLemmaPairs = 10000;
constexpr double kLemmaTol = 1e-12;
constexpr double kBoundTol = 1e-9;
constexpr double kBoundBudget = 300.0;
constexpr std::size_t kDecomposeCases = 1000;
constexpr double kPartitionTol = 1e-9;
constexpr double kMetricTol = 1e-12;
constexpr double kFmMargin = 0.02;
constexpr double kOrderingBudget = 600.0;
constexpr double kStudentParamRatio = 0.5;
constexpr double kStudentPmDrop = 0.03;
constexpr int kStudentWidth = 32;
constexpr int kExpandModels = 100;
constexpr double kDeletionRate = 0.1;
constexpr int kStreamLength = 6;
const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

DynamicGraph stream(std::uint64_t seed, int T = kStreamLength, double p_del_node = 0.0) {
  GenConfig g;
  g.T = T;
  g.seed = seed;
  g.p_del_node = p_del_node;
  return to_dynamic_graph(generate_stream(g));
}

TrainConfig config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  return c;
}

RunResult run_method(const std::string& method, const DynamicGraph& data, const TrainConfig& cfg) {
  if (method == "pi-gnn") return continual_run(data, cfg);
  BaselineMethod m;
  m.kind = method == "retrain" ? BaselineKind::kRetrain
           : method == "pretrain" ? BaselineKind::kPretrain
                                  : BaselineKind::kOnline;
  return run_baseline(m, data, cfg);
}

// ---------------------------------------------------------------------------
// Independent oracles.

/// Brute-force decomposition: BFS from every surviving center separately.
struct OracleSplit {
  NodeList unstable, stable, changed, deleted;
};

OracleSplit oracle_split(const Snapshot& prev, const Snapshot& next, int k) {
  std::set<NodeId> touched;
  for (NodeId v : prev.nodes) {
    if (next.contains(v) && prev.adjacency[v] != next.adjacency[v]) touched.insert(v);
  }
  OracleSplit o;
  for (NodeId c : prev.nodes) {
    if (!next.contains(c)) {
      o.deleted.push_back(c);
      continue;
    }
    std::map<NodeId, int> dist = {{c, 0}};
    std::deque<NodeId> queue = {c};
    bool near = false;
    while (!queue.empty() && !near) {
      const NodeId u = queue.front();
      queue.pop_front();
      if (touched.count(u)) near = true;
      if (dist[u] == k) continue;
      for (NodeId w : prev.adjacency[u]) {
        if (dist.emplace(w, dist[u] + 1).second) queue.push_back(w);
      }
    }
    (near ? o.unstable : o.stable).push_back(c);
  }
  for (NodeId v : next.nodes) {
    if (!prev.contains(v) || std::binary_search(o.unstable.begin(), o.unstable.end(), v)) o.changed.push_back(v);
  }
  return o;
}

bool matches_oracle(const Decomposition& d, const OracleSplit& o) {
  return d.unstable_centers == o.unstable && d.stable_centers == o.stable && d.changed_centers == o.changed &&
         d.deleted_centers == o.deleted;
}

double reference_pm(const std::vector<std::vector<double>>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i][i];
  return s / static_cast<double>(a.size());
}

double reference_fm(const std::vector<std::vector<double>>& a) {
  const std::size_t T = a.size();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < T; ++i) s += a[T - 1][i] - a[i][i];
  return s / static_cast<double>(T - 1);
}

// ---------------------------------------------------------------------------
// Shared runs.

struct Shared {
  DynamicGraph data;  // seed-0 stream, T = 6
  RunResult pignn;    // seed-0 PI-GNN run on it
  double pignn_seconds = 0.0;
  std::map<std::string, std::vector<RunResult>> by_method;
  double ordering_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Criteria.

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const auto s = gradcheck_suite(20, 1);
  const double secs = since(t0);
  return {s.passed(kGradTol) && secs < kGradBudget,
          fmt("20 models, max rel err %.3g (< %.0e), frozen blocks clean %s, %.1fs", s.max_rel_error, kGradTol,
              s.frozen_clean ? "yes" : "no", secs)};
}

Outcome lemma() {
  const auto s = lemma_suite(kLemmaPairs, 2);
  const bool ineq = s.violations == 0 && s.min_slack >= -kLemmaTol;
  const bool eq = s.max_equal_case_gap <= kLemmaTol;
  return {ineq && eq, fmt("%zu premise pairs: %zu violations, min slack %.3g; z1 == z2 max |gap| %.3g "
                          "(tied logits only: %.3g), equality clause %s",
                          s.pairs, s.violations, s.min_slack, s.max_equal_case_gap, s.max_equal_case_gap_tied,
                          eq ? "holds" : "does not hold")};
}

Outcome theorem_bound(const Shared& sh) {
  const auto t0 = Clock::now();
  const auto rep = verify_theorem(sh.pignn, sh.data);
  std::size_t asserted = 0;
  double worst = INFINITY;
  for (const auto& r : rep.rows) {
    if (!r.asserted) continue;
    ++asserted;
    worst = std::min(worst, r.terms.gap());
  }
  const bool gap_ok = rep.holds && (asserted == 0 || worst >= -kBoundTol);
  std::vector<double> residual;
  for (int epochs : {0, 50, 100}) {
    TrainConfig cfg = config(0);
    cfg.epochs_isolate = epochs;
    const RunResult run = continual_run(sh.data, cfg);
    double total = 0.0;
    for (const auto& rec : run.records) total += rec.bound.equality_residual;
    residual.push_back(total);
  }
  const bool monotone = residual[1] <= residual[0] && residual[2] <= residual[1] && residual[2] < residual[0];
  const double secs = since(t0) + sh.pignn_seconds;
  return {gap_ok && monotone && secs < kBoundBudget,
          fmt("preconditions met on %zu/%zu snapshots, min gap there %.4g (>= -1e-9); equality residual over "
              "{0,50,100} isolation epochs = %.4g, %.4g, %.4g (%s); %.1fs",
              asserted, rep.rows.size(), asserted ? worst : 0.0, residual[0], residual[1], residual[2],
              monotone ? "shrinking" : "not monotone", secs)};
}

Outcome freeze_invariance(const Shared& sh) {
  const auto opts = sh.pignn.config.eval_options();
  std::size_t checked = 0;
  std::size_t segments_checked = 0;
  bool ok = true;
  for (int t = 2; t <= sh.data.num_snapshots(); ++t) {
    const Decomposition d = decompose(sh.data.at(t - 1), sh.data.delta_into(t), sh.pignn.config.k);
    const auto& rect = sh.pignn.rectified[static_cast<std::size_t>(t - 2)];
    const auto& iso = sh.pignn.isolated[static_cast<std::size_t>(t - 2)];
    if (!d.stable_centers.empty()) {
      for (const Snapshot* g : {&sh.data.at(t - 1), &sh.data.at(t)}) {
        ok = ok && same_bits(forward(rect, *g, d.stable_centers, opts).total,
                             forward(iso, *g, d.stable_centers, opts).stable_part);
      }
      checked += d.stable_centers.size();
    }
    std::map<std::string, const Matrix*> after;
    for (const auto& seg : segments(iso)) after[seg.name] = seg.value;
    for (const auto& seg : segments(rect)) {
      const auto it = after.find(seg.name);
      ok = ok && it != after.end() && same_bits(*seg.value, *it->second);
      ++segments_checked;
    }
  }
  return {ok && checked > 0, fmt("%zu stable centers over %d snapshots, %zu frozen segments byte-compared",
                                 checked, sh.data.num_snapshots() - 1, segments_checked)};
}

Outcome decomposition_oracle() {
  std::size_t mismatches = 0;
  std::size_t with_add = 0;
  std::size_t with_del = 0;
  for (std::size_t c = 0; c < kDecomposeCases; ++c) {
    Rng rng(derive_seed(77, {c}));
    const int n = std::uniform_int_distribution<int>(1, 60)(rng);
    const double p = std::uniform_real_distribution<double>(0.01, 0.15)(rng);
    const Snapshot prev = random_snapshot(rng, n, 2, 3, p);
    const SnapshotDelta delta = random_delta(prev, rng, std::uniform_real_distribution<double>(0.0, 0.1)(rng), 5, 3);
    with_add += !delta.added_nodes.empty() || !delta.added_edges.empty();
    with_del += !delta.deleted_nodes.empty() || !delta.deleted_edges.empty();
    const int k = 1 + static_cast<int>(c % 2);
    if (!matches_oracle(decompose(prev, delta, k), oracle_split(prev, apply_delta(prev, delta), k))) ++mismatches;
  }
  return {mismatches == 0, fmt("%zu cases (n <= 60, k in {1,2}; %zu with additions, %zu with deletions): "
                               "%zu mismatches",
                               kDecomposeCases, with_add, with_del, mismatches)};
}

Outcome loss_partitions(const Shared& sh) {
  const auto opts = sh.pignn.config.eval_options();
  double worst = 0.0;
  for (int t = 2; t <= sh.data.num_snapshots(); ++t) {
    const Decomposition d = decompose(sh.data.at(t - 1), sh.data.delta_into(t), sh.pignn.config.k);
    for (const ExpandableGNN* m : {&sh.pignn.rectified[static_cast<std::size_t>(t - 2)],
                                   &sh.pignn.isolated[static_cast<std::size_t>(t - 2)]}) {
      worst = std::max(worst, check_previous_partition(*m, sh.data.at(t - 1), d, opts).residual());
      worst = std::max(worst, check_current_partition(*m, sh.data.at(t - 1), sh.data.at(t), d, opts).residual());
    }
  }
  return {worst <= kPartitionTol,
          fmt("max |whole - parts| %.3g over %d snapshots, previous and current graph", worst,
              sh.data.num_snapshots() - 1)};
}

Outcome metrics(const Shared& sh, const std::vector<RunResult>& extra_pretrain) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 2 + rep % 9;
    std::vector<std::vector<double>> a(static_cast<std::size_t>(T), std::vector<double>(static_cast<std::size_t>(T)));
    AccuracyMatrix m(T);
    for (int i = 0; i < T; ++i) {
      for (int j = 0; j <= i; ++j) {
        a[i][j] = u(rng);
        m.set(i + 1, j + 1, a[i][j]);
      }
    }
    worst = std::max({worst, std::abs(pm(m) - reference_pm(a)), std::abs(*fm(m) - reference_fm(a))});
  }
  bool pretrain_zero = true;
  std::size_t streams = 0;
  std::vector<const RunResult*> runs;
  for (const auto& r : sh.by_method.at("pretrain")) runs.push_back(&r);
  for (const auto& r : extra_pretrain) runs.push_back(&r);
  for (const RunResult* r : runs) {
    const auto f = fm(r->accuracy);
    pretrain_zero = pretrain_zero && f.has_value() && *f == 0.0;
    ++streams;
  }
  return {worst <= kMetricTol && pretrain_zero,
          fmt("PM/FM vs reference on 100 matrices: max |diff| %.3g; Pretrain FM exactly 0 on %zu/%zu streams",
              worst, pretrain_zero ? streams : std::size_t{0}, streams)};
}

Outcome qualitative_ordering(const Shared& sh) {
  std::map<std::string, double> pm_mean;
  std::map<std::string, double> fm_mean;
  for (const auto& [method, runs] : sh.by_method) {
    for (const auto& r : runs) {
      pm_mean[method] += pm(r.accuracy) / static_cast<double>(runs.size());
      fm_mean[method] += fm(r.accuracy).value_or(0.0) / static_cast<double>(runs.size());
    }
  }
  const bool pm_order = pm_mean["retrain"] >= pm_mean["pi-gnn"] && pm_mean["pi-gnn"] >= pm_mean["online"] &&
                        pm_mean["online"] >= pm_mean["pretrain"];
  const bool fm_order = fm_mean["pi-gnn"] - fm_mean["online"] >= kFmMargin;
  const bool fast = sh.ordering_seconds < kOrderingBudget;
  return {pm_order && fm_order && fast,
          fmt("T=6, 3 seeds; PM retrain %.4f, pi-gnn %.4f, online %.4f, pretrain %.4f (%s); "
              "FM pi-gnn %+.4f vs online %+.4f (margin %+.4f, need >= %.2f); %.0fs",
              pm_mean["retrain"], pm_mean["pi-gnn"], pm_mean["online"], pm_mean["pretrain"],
              pm_order ? "ordered" : "out of order", fm_mean["pi-gnn"], fm_mean["online"],
              fm_mean["pi-gnn"] - fm_mean["online"], kFmMargin, sh.ordering_seconds)};
}

Outcome distillation(const Shared& sh) {
  const ExpandableGNN& teacher = sh.pignn.model;
  const ExpandableGNN student =
      distill_run(sh.pignn, sh.data, kStudentWidth, sh.pignn.config.epochs_distill);
  const double ratio = static_cast<double>(student.parameter_count()) / static_cast<double>(teacher.parameter_count());
  const double teacher_pm = final_mean_accuracy(teacher, sh.data, sh.pignn.config);
  const double student_pm = final_mean_accuracy(student, sh.data, sh.pignn.config);
  const double drop = teacher_pm - student_pm;
  return {teacher.num_expansions() == 5 && teacher.hidden_width() == 72 && ratio <= kStudentParamRatio &&
              drop <= kStudentPmDrop,
          fmt("teacher width %d (%d expansions, %zu params) -> student width %d (%zu params, ratio %.3f); "
              "final-model mean accuracy %.4f -> %.4f (drop %+.4f, limit %.2f)",
              teacher.hidden_width(), teacher.num_expansions(), teacher.parameter_count(), kStudentWidth,
              student.parameter_count(), ratio, teacher_pm, student_pm, drop, kStudentPmDrop)};
}

Outcome function_preserving_expansion() {
  int identical = 0;
  for (int rep = 0; rep < kExpandModels; ++rep) {
    Rng rng(derive_seed(31, {static_cast<std::uint64_t>(rep)}));
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const int d = pick(2, 6);
    const int C = pick(2, 5);
    const Snapshot s = random_snapshot(rng, pick(3, 30), d, C, 0.2);
    ExpandableGNN m = ExpandableGNN::create(rep % 2 ? Backbone::kGcn : Backbone::kSageMean, d, C, pick(1, 12),
                                            pick(1, 3), static_cast<std::uint64_t>(rep), rep % 5 != 0);
    detail::randomize_parameters(m, rng, false);
    for (int e = 0; e < rep % 3; ++e) m = expand(freeze_stable(m), pick(1, 8), static_cast<std::uint64_t>(rep + e));
    const ExpandableGNN grown = expand(m, pick(1, 12), static_cast<std::uint64_t>(1000 + rep));
    if (same_bits(forward(m, s, s.nodes).total, forward(grown, s, s.nodes).total)) ++identical;
  }
  return {identical == kExpandModels, fmt("%d/%d models give bit-identical total logits", identical, kExpandModels)};
}

Outcome deletion_path(const DynamicGraph& data, const RunResult& run) {
  bool ok = true;
  std::size_t deleted = 0;
  for (int t = 2; t <= data.num_snapshots(); ++t) {
    const Decomposition d = decompose(data.at(t - 1), data.delta_into(t), run.config.k);
    ok = ok && matches_oracle(d, oracle_split(data.at(t - 1), data.at(t), run.config.k));
    deleted += d.deleted_centers.size();
  }
  const bool complete = run.accuracy.at(data.num_snapshots(), data.num_snapshots()).has_value();
  return {ok && complete && deleted > 0,
          fmt("p_del_node=%.1f, T=%d: %zu nodes deleted, run completed (PM %.4f), decomposition %s oracle",
              kDeletionRate, data.num_snapshots(), deleted, pm(run.accuracy), ok ? "matches" : "differs from")};
}

Outcome activation_specialization() {
  const DynamicGraph data = stream(0, 2);
  const RunResult run = continual_run(data, config(0));
  const NodeList nodes = data.task_nodes(1, Split::kTest, 2);
  std::string per_layer;
  double ratio_last = 0.0;
  for (int layer = 1; layer <= run.model.depth; ++layer) {
    const auto dump = dump_activations(run.model, data.at(2), nodes, layer, run.config.eval_options());
    const double m0 = dump.block_mass(0);
    const double m1 = dump.block_mass(1);
    ratio_last = m1 > 0.0 ? m0 / m1 : INFINITY;
    per_layer += fmt("%slayer %d: initial %.3f, expansion %.3f, ratio %.3f", layer > 1 ? "; " : "", layer, m0, m1,
                     ratio_last);
  }
  return {ratio_last > 1.0, fmt("%zu task-1 test nodes; %s (criterion on the last layer)", nodes.size(),
                                per_layer.c_str())};
}

}  // namespace

int main() {
  using namespace pignn;
  const auto start = Clock::now();
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  Shared sh;
  {
    const auto t0 = Clock::now();
    sh.data = stream(0);
    sh.pignn = continual_run(sh.data, config(0));
    sh.pignn_seconds = since(t0);
  }
  {
    const auto t0 = Clock::now();
    for (std::uint64_t seed : kSeeds) {
      const DynamicGraph data = seed == 0 ? sh.data : stream(seed);
      for (const char* method : {"pi-gnn", "retrain", "online", "pretrain"}) {
        if (seed == 0 && std::string(method) == "pi-gnn") {
          sh.by_method[method].push_back(sh.pignn);
        } else {
          sh.by_method[method].push_back(run_method(method, data, config(seed)));
        }
      }
    }
    sh.ordering_seconds = since(t0) + sh.pignn_seconds;
  }
  const DynamicGraph deleting = stream(0, kStreamLength, kDeletionRate);
  std::vector<RunResult> deleting_runs;

  report(1, "gradient correctness", gradient_correctness);
  report(2, "lemma suite", lemma);
  report(3, "retraining-loss bound", [&] { return theorem_bound(sh); });
  report(4, "freeze invariance", [&] { return freeze_invariance(sh); });
  report(5, "decomposition oracle", decomposition_oracle);
  report(6, "loss-partition identities", [&] { return loss_partitions(sh); });
  report(7, "metrics", [&] {
    deleting_runs.push_back(run_method("pretrain", deleting, config(0)));
    return metrics(sh, deleting_runs);
  });
  report(8, "qualitative ordering", [&] { return qualitative_ordering(sh); });
  report(9, "distillation", [&] { return distillation(sh); });
  report(10, "function-preserving expansion", function_preserving_expansion);
  report(11, "deletion path", [&] { return deletion_path(deleting, continual_run(deleting, config(0))); });
  report(12, "activation specialization", activation_specialization);

  std::printf("%d/12 criteria passed in %.0fs\n", 12 - failures, since(start));
  return failures == 0 ? 0 : 1;
}
