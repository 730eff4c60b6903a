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

#include <gtest/gtest.h>

#include <map>
#include <numeric>

#include "test_util.hpp"

namespace pignn {
namespace {

using testing::kA;
using testing::kB;
using testing::kC;
using testing::kD;
using testing::kE;
using testing::kF;

TEST(ApplyDelta, FigureExample) {
  const Snapshot prev = testing::figure_prev();
  const Snapshot next = apply_delta(prev, testing::figure_delta());
  EXPECT_EQ(next.index, 2);
  EXPECT_EQ(next.nodes, (NodeList{kA, kB, kE, kF, kD}));
  const std::vector<Edge> expected = {{kA, kB}, {kA, kD}, {kE, kF}};
  EXPECT_EQ(next.edges(), expected);
  EXPECT_FALSE(next.contains(kC));
  EXPECT_EQ(next.neighbors(kB), (NodeList{kA}));
  next.validate();
}

TEST(Decompose, FigureExampleOneHop) {
  const Decomposition d = decompose(testing::figure_prev(), testing::figure_delta(), 1);
  EXPECT_EQ(d.touched, (NodeList{kA, kB}));
  EXPECT_EQ(d.unstable_centers, (NodeList{kA, kB}));
  EXPECT_EQ(d.stable_centers, (NodeList{kE, kF}));
  EXPECT_EQ(d.changed_centers, (NodeList{kA, kB, kD}));
  EXPECT_EQ(d.deleted_centers, (NodeList{kC}));
  EXPECT_EQ(d.source_index, 1);
}

TEST(Decompose, StableAndUnstablePartitionSurvivors) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const Snapshot prev = testing::erdos_renyi(rng, 30, 0.08);
    const SnapshotDelta delta = testing::random_delta_for(prev, rng, 0.05, 0.05, 3, 0.01);
    const Decomposition d = decompose(prev, delta, 2);
    NodeList all;
    std::set_union(d.unstable_centers.begin(), d.unstable_centers.end(), d.stable_centers.begin(),
                   d.stable_centers.end(), std::back_inserter(all));
    EXPECT_EQ(all.size(), d.unstable_centers.size() + d.stable_centers.size());
    NodeList with_deleted;
    std::set_union(all.begin(), all.end(), d.deleted_centers.begin(), d.deleted_centers.end(),
                   std::back_inserter(with_deleted));
    EXPECT_EQ(with_deleted, prev.nodes);
  }
}

TEST(Decompose, MatchesAllPairsOracle) {
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> size(1, 60);
  std::uniform_real_distribution<double> density(0.01, 0.15);
  std::uniform_real_distribution<double> churn(0.0, 0.1);
  std::uniform_int_distribution<int> fresh(0, 5);
  for (int c = 0; c < 1000; ++c) {
    const Snapshot prev = testing::erdos_renyi(rng, size(rng), density(rng));
    const SnapshotDelta delta =
        testing::random_delta_for(prev, rng, churn(rng), churn(rng), fresh(rng), 0.02);
    const int k = 1 + c % 2;
    const Decomposition d = decompose(prev, delta, k);
    const auto o = testing::oracle_decompose(prev, apply_delta(prev, delta), k);
    ASSERT_EQ(d.touched, o.touched) << "case " << c;
    ASSERT_EQ(d.unstable_centers, o.unstable) << "case " << c;
    ASSERT_EQ(d.stable_centers, o.stable) << "case " << c;
    ASSERT_EQ(d.changed_centers, o.changed) << "case " << c;
    ASSERT_EQ(d.deleted_centers, o.deleted) << "case " << c;
  }
}

TEST(Decompose, EmptyDeltaLeavesEverythingStable) {
  std::mt19937_64 rng(3);
  const Snapshot prev = testing::erdos_renyi(rng, 20, 0.2);
  const Decomposition d = decompose(prev, SnapshotDelta{}, 2);
  EXPECT_TRUE(d.touched.empty());
  EXPECT_TRUE(d.unstable_centers.empty());
  EXPECT_TRUE(d.changed_centers.empty());
  EXPECT_EQ(d.stable_centers, prev.nodes);
}

TEST(Decompose, InvariantUnderRelabeling) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 25;
    const Snapshot prev = testing::erdos_renyi(rng, n, 0.1);
    const SnapshotDelta delta = testing::random_delta_for(prev, rng, 0.05, 0.1, 2, 0.02);
    const Snapshot next = apply_delta(prev, delta);

    std::vector<NodeId> perm(next.capacity());
    std::iota(perm.begin(), perm.end(), NodeId{0});
    std::shuffle(perm.begin(), perm.begin() + n, rng);
    auto relabel = [&](const Snapshot& s, int index) {
      std::vector<NodeRecord> recs;
      for (NodeId v : s.nodes) {
        NodeRecord r = s.record(v);
        r.id = perm[v];
        recs.push_back(r);
      }
      std::vector<Edge> es;
      for (const Edge& e : s.edges()) es.push_back(Edge::make(perm[e.u], perm[e.v]));
      return Snapshot::from_parts(index, s.feature_dim, recs, es);
    };
    const Snapshot p2 = relabel(prev, 1);
    const Snapshot n2 = relabel(next, 2);
    const Decomposition d1 = decompose(prev, delta, 2);
    const Decomposition d2 = decompose(p2, diff_snapshots(p2, n2), 2);
    auto mapped = [&](const NodeList& xs) {
      NodeList out;
      for (NodeId v : xs) out.push_back(perm[v]);
      std::sort(out.begin(), out.end());
      return out;
    };
    EXPECT_EQ(mapped(d1.unstable_centers), d2.unstable_centers);
    EXPECT_EQ(mapped(d1.stable_centers), d2.stable_centers);
    EXPECT_EQ(mapped(d1.changed_centers), d2.changed_centers);
    EXPECT_EQ(mapped(d1.deleted_centers), d2.deleted_centers);
  }
}

TEST(Decompose, RejectsNonPositiveK) {
  EXPECT_EQ(testing::error_of([] { decompose(testing::figure_prev(), testing::figure_delta(), 0); }),
            ErrorCode::kInvalidDelta);
}

TEST(KHopEgo, SmallCases) {
  std::vector<NodeRecord> recs = {testing::make_record(0), testing::make_record(1), testing::make_record(2),
                                  testing::make_record(3)};
  const std::vector<Edge> path = {{0, 1}, {1, 2}};
  const Snapshot s = Snapshot::from_parts(1, 2, recs, path);
  EXPECT_EQ(k_hop_ego(s, 3, 2), (NodeList{3}));
  EXPECT_EQ(k_hop_ego(s, 0, 1), (NodeList{0, 1}));
  EXPECT_EQ(k_hop_ego(s, 0, 2), (NodeList{0, 1, 2}));
  EXPECT_EQ(k_hop_ego(s, 1, 0), (NodeList{1}));
}

TEST(KHopEgo, MatchesAllPairsDistances) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 50);
  std::uniform_real_distribution<double> density(0.0, 0.12);
  for (int rep = 0; rep < 1000; ++rep) {
    const Snapshot s = testing::erdos_renyi(rng, size(rng), density(rng));
    const auto dist = testing::floyd_warshall(s);
    const int k = rep % 4;
    const NodeId c = s.nodes[static_cast<std::size_t>(rep) % s.nodes.size()];
    NodeList expected;
    for (NodeId v : s.nodes) {
      if (dist[c][v] <= k) expected.push_back(v);
    }
    ASSERT_EQ(k_hop_ego(s, c, k), expected) << "graph " << rep;
  }
}

TEST(DiffSnapshots, ReplaysToTheSameSnapshot) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const Snapshot prev = testing::erdos_renyi(rng, 20, 0.15);
    const Snapshot next = apply_delta(prev, testing::random_delta_for(prev, rng, 0.1, 0.1, 3, 0.05));
    EXPECT_EQ(apply_delta(prev, diff_snapshots(prev, next)), next);
  }
}

TEST(DiffSnapshots, SmallCases) {
  const Snapshot prev = testing::figure_prev();
  Snapshot same = prev;
  same.index = 2;
  EXPECT_TRUE(diff_snapshots(prev, same).empty());

  const std::vector<NodeRecord> one = {testing::make_record(kA)};
  const std::vector<NodeRecord> two = {testing::make_record(kA), testing::make_record(kB)};
  const std::vector<Edge> ab = {{kA, kB}};
  const Snapshot a = Snapshot::from_parts(1, 2, one, {});
  const Snapshot b = Snapshot::from_parts(2, 2, two, ab);
  const SnapshotDelta d = diff_snapshots(a, b);
  ASSERT_EQ(d.added_nodes.size(), 1u);
  EXPECT_EQ(d.added_nodes[0].id, kB);
  EXPECT_EQ(d.added_edges, ab);
  EXPECT_TRUE(d.deleted_nodes.empty());
  EXPECT_TRUE(d.deleted_edges.empty());
}

TEST(ApplyDelta, EmptyDeltaAdvancesIndexOnly) {
  const Snapshot prev = testing::figure_prev();
  const Snapshot next = apply_delta(prev, SnapshotDelta{});
  EXPECT_EQ(next.index, prev.index + 1);
  Snapshot expected = prev;
  expected.index = next.index;
  EXPECT_EQ(next, expected);
}

TEST(ApplyDelta, RejectsInvalidDeltas) {
  const Snapshot prev = testing::figure_prev();
  auto code = [&](SnapshotDelta d) { return testing::error_of([&] { apply_delta(prev, d); }); };

  SnapshotDelta absent;
  absent.deleted_nodes = {kD};
  EXPECT_EQ(code(absent), ErrorCode::kInvalidDelta);

  SnapshotDelta existing;
  existing.added_nodes.push_back(testing::make_record(kA));
  EXPECT_EQ(code(existing), ErrorCode::kInvalidDelta);

  SnapshotDelta dangling;
  dangling.added_edges.push_back({kA, 42});
  EXPECT_EQ(code(dangling), ErrorCode::kInvalidDelta);

  SnapshotDelta duplicate;
  duplicate.added_edges.push_back({kA, kB});
  EXPECT_EQ(code(duplicate), ErrorCode::kInvalidDelta);

  SnapshotDelta to_deleted;
  to_deleted.deleted_nodes = {kC};
  to_deleted.added_edges.push_back({kA, kC});
  EXPECT_EQ(code(to_deleted), ErrorCode::kInvalidDelta);

  SnapshotDelta self_loop;
  self_loop.added_edges.push_back({kE, kE});
  EXPECT_EQ(code(self_loop), ErrorCode::kInvalidDelta);

  SnapshotDelta missing_edge;
  missing_edge.deleted_edges.push_back({kA, kF});
  EXPECT_EQ(code(missing_edge), ErrorCode::kInvalidDelta);

  SnapshotDelta wide;
  wide.added_nodes.push_back(testing::make_record(kD, 0, Split::kTrain, 3));
  EXPECT_EQ(code(wide), ErrorCode::kDimensionMismatch);
}

TEST(Snapshot, UnknownNodeLookups) {
  const Snapshot s = testing::figure_prev();
  EXPECT_EQ(testing::error_of([&] { s.neighbors(kD); }), ErrorCode::kUnknownNode);
  const NodeList ids = {kA, 17};
  EXPECT_EQ(testing::error_of([&] { s.labels_of(ids); }), ErrorCode::kUnknownNode);
}

TEST(DynamicGraph, RejectsIdReuse) {
  const Snapshot s1 = testing::figure_prev();
  SnapshotDelta remove;
  remove.deleted_nodes = {kC};
  const Snapshot s2 = apply_delta(s1, remove);
  SnapshotDelta readd;
  readd.added_nodes.push_back(testing::make_record(kC));
  const Snapshot s3 = apply_delta(s2, readd);
  const DynamicGraph g = DynamicGraph::from_snapshots({s1, s2, s3}, 1);
  EXPECT_EQ(testing::error_of([&] { g.validate(); }), ErrorCode::kInvalidDelta);
}

TEST(DynamicGraph, TaskNodesFollowArrival) {
  const Snapshot s1 = testing::figure_prev();
  const Snapshot s2 = apply_delta(s1, testing::figure_delta());
  const DynamicGraph g = DynamicGraph::from_snapshots({s1, s2}, 1);
  g.validate();
  EXPECT_EQ(g.task_nodes(1, Split::kTrain), (NodeList{kA, kB, kC, kE, kF}));
  EXPECT_EQ(g.task_nodes(1, Split::kTrain, 2), (NodeList{kA, kB, kE, kF}));
  EXPECT_EQ(g.task_nodes(2, Split::kTrain), (NodeList{kD}));
}

// Chi-square statistic of observed counts against a uniform expectation.
double chi_square(const std::vector<int>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double expected = total / static_cast<double>(counts.size());
  double x = 0.0;
  for (int c : counts) x += (c - expected) * (c - expected) / expected;
  return x;
}

TEST(SampleMemory, SizeUniquenessAndSplit) {
  std::mt19937_64 rng(1);
  const Snapshot s = testing::erdos_renyi(rng, 30, 0.1);
  const MemoryBuffer m = sample_memory(s, 8, 77);
  EXPECT_EQ(m.size(), 8u);
  EXPECT_TRUE(std::is_sorted(m.center_nodes.begin(), m.center_nodes.end()));
  EXPECT_EQ(std::adjacent_find(m.center_nodes.begin(), m.center_nodes.end()), m.center_nodes.end());
  EXPECT_EQ(m, sample_memory(s, 8, 77));
  EXPECT_EQ(sample_memory(s, 100, 1).center_nodes, s.nodes);

  const MemoryBuffer train = sample_memory(s, 100, 2, Split::kTrain);
  EXPECT_EQ(train.center_nodes, s.nodes_with_split(Split::kTrain));
}

TEST(SampleMemory, UniformOverCandidates) {
  std::mt19937_64 rng(4);
  const Snapshot s = testing::erdos_renyi(rng, 10, 0.2);
  std::vector<int> counts(10, 0);
  for (std::uint64_t seed = 0; seed < 100000; ++seed) ++counts[sample_memory(s, 1, seed).center_nodes.at(0)];
  // 9 degrees of freedom; 27.88 is the 0.999 quantile.
  EXPECT_LT(chi_square(counts), 27.88);
  const double sigma = std::sqrt(100000 * 0.1 * 0.9);
  for (int c : counts) EXPECT_LT(std::abs(c - 10000), 3.0 * sigma + 1.0);
}

TEST(SampleNeighbors, UniformAndDeterministic) {
  std::vector<NodeRecord> recs;
  for (NodeId v = 0; v < 7; ++v) recs.push_back(testing::make_record(v));
  std::vector<Edge> es;
  for (NodeId v = 1; v < 7; ++v) es.push_back({0, v});
  const Snapshot s = Snapshot::from_parts(1, 2, recs, es);
  std::vector<int> counts(7, 0);
  for (std::uint64_t seed = 0; seed < 100000; ++seed) {
    const NodeList n = sample_neighbors(s, 0, 2, seed);
    ASSERT_EQ(n.size(), 2u);
    ASSERT_TRUE(std::is_sorted(n.begin(), n.end()));
    EXPECT_EQ(n, sample_neighbors(s, 0, 2, seed));
    for (NodeId v : n) ++counts[v];
  }
  EXPECT_EQ(counts[0], 0);
  // 5 degrees of freedom; 20.52 is the 0.999 quantile.
  EXPECT_LT(chi_square(std::vector<int>(counts.begin() + 1, counts.end())), 20.52);
  EXPECT_EQ(sample_neighbors(s, 0, kAllNeighbors, 0), s.neighbors(0));
  EXPECT_EQ(sample_neighbors(s, 0, 10, 0), s.neighbors(0));
}

TEST(StableMemorySubset, IntersectsWithStableCenters) {
  const Snapshot prev = testing::figure_prev();
  const Decomposition d = decompose(prev, testing::figure_delta(), 1);
  MemoryBuffer mem;
  mem.source_snapshot = 1;
  mem.center_nodes = {kA, kE};
  EXPECT_EQ(stable_memory_subset(mem, d).center_nodes, (NodeList{kE}));
  const Decomposition quiet = decompose(prev, SnapshotDelta{}, 1);
  EXPECT_EQ(stable_memory_subset(mem, quiet), mem);
  mem.source_snapshot = 2;
  EXPECT_EQ(testing::error_of([&] { stable_memory_subset(mem, d); }), ErrorCode::kSnapshotMismatch);
}

TEST(StableMemorySubset, MatchesSetIntersection) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    const Snapshot prev = testing::erdos_renyi(rng, 25, 0.1);
    const Decomposition d = decompose(prev, testing::random_delta_for(prev, rng, 0.05, 0.1, 2, 0.02), 1 + rep % 2);
    const MemoryBuffer mem = sample_memory(prev, 10, static_cast<std::uint64_t>(rep));
    std::set<NodeId> stable(d.stable_centers.begin(), d.stable_centers.end());
    NodeList expected;
    for (NodeId v : mem.center_nodes) {
      if (stable.count(v)) expected.push_back(v);
    }
    EXPECT_EQ(stable_memory_subset(mem, d).center_nodes, expected);
  }
}

}  // namespace
}  // namespace pignn
