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

// Dynamic graphs as a sequence of immutable snapshots linked by deltas, plus
// the stable / unstable / changed decomposition of a snapshot transition and
// the uniform memory buffer drawn from the previous snapshot.
//
// Node ids are dense non-negative integers that are never reused once a node
// is deleted. Per-node storage in a Snapshot is indexed directly by id; slots
// of absent ids are ignored by every comparison.

#ifndef PIGNN_GRAPH_HPP_
#define PIGNN_GRAPH_HPP_

#include <algorithm>
#include <cstdint>
#include <deque>
#include <iterator>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pignn/error.hpp"
#include "pignn/rng.hpp"
#include "pignn/tensor.hpp"

namespace pignn {

using NodeId = std::uint32_t;
using NodeList = std::vector<NodeId>;

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

/// Undirected edge stored with first < second.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  static Edge make(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct NodeRecord {
  NodeId id = 0;
  std::vector<double> features;
  int label = 0;
  Split split = Split::kTrain;

  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct Snapshot {
  int index = 1;
  int feature_dim = 0;
  NodeList nodes;                       // sorted ids of present nodes
  std::vector<std::uint8_t> present;    // by id
  std::vector<NodeList> adjacency;      // by id; sorted, duplicate free
  Matrix features;                      // capacity x feature_dim
  std::vector<int> labels;              // by id
  std::vector<Split> splits;            // by id

  std::size_t capacity() const { return present.size(); }
  std::size_t num_nodes() const { return nodes.size(); }

  bool contains(NodeId v) const { return v < present.size() && present[v] != 0; }

  void require(NodeId v) const {
    if (!contains(v)) {
      fail(ErrorCode::kUnknownNode, "node " + std::to_string(v) + " not in snapshot " +
                                        std::to_string(index));
    }
  }

  const NodeList& neighbors(NodeId v) const {
    require(v);
    return adjacency[v];
  }

  std::size_t degree(NodeId v) const { return neighbors(v).size(); }

  bool has_edge(NodeId a, NodeId b) const {
    if (!contains(a) || !contains(b)) return false;
    const auto& n = adjacency[a];
    return std::binary_search(n.begin(), n.end(), b);
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (NodeId v : nodes) {
      for (NodeId u : adjacency[v]) {
        if (v < u) out.push_back({v, u});
      }
    }
    return out;
  }

  std::size_t num_edges() const {
    std::size_t deg = 0;
    for (NodeId v : nodes) deg += adjacency[v].size();
    return deg / 2;
  }

  NodeRecord record(NodeId v) const {
    require(v);
    NodeRecord r;
    r.id = v;
    r.features.assign(features.row(v).data(), features.row(v).data() + feature_dim);
    r.label = labels[v];
    r.split = splits[v];
    return r;
  }

  NodeList nodes_with_split(Split s) const {
    NodeList out;
    for (NodeId v : nodes) {
      if (splits[v] == s) out.push_back(v);
    }
    return out;
  }

  std::vector<int> labels_of(std::span<const NodeId> ids) const {
    std::vector<int> out;
    out.reserve(ids.size());
    for (NodeId v : ids) {
      require(v);
      out.push_back(labels[v]);
    }
    return out;
  }

  /// Grows per-id storage so that id `v` is addressable.
  void reserve_id(NodeId v) {
    const std::size_t need = static_cast<std::size_t>(v) + 1;
    if (need <= present.size()) return;
    const Eigen::Index old_rows = features.rows();
    present.resize(need, 0);
    adjacency.resize(need);
    labels.resize(need, 0);
    splits.resize(need, Split::kTrain);
    features.conservativeResize(static_cast<Eigen::Index>(need), feature_dim);
    features.bottomRows(static_cast<Eigen::Index>(need) - old_rows).setZero();
  }

  /// Checks the structural invariants; throws InvalidDelta on violation.
  void validate() const {
    if (!std::is_sorted(nodes.begin(), nodes.end()) ||
        std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
      fail(ErrorCode::kInvalidDelta, "node list not sorted/unique");
    }
    for (NodeId v : nodes) {
      if (!contains(v)) fail(ErrorCode::kInvalidDelta, "node list entry not present");
    }
    std::size_t count = 0;
    for (std::size_t v = 0; v < present.size(); ++v) count += present[v] != 0;
    if (count != nodes.size()) fail(ErrorCode::kInvalidDelta, "presence flags disagree with node list");
    for (NodeId v : nodes) {
      const auto& n = adjacency[v];
      if (!std::is_sorted(n.begin(), n.end()) ||
          std::adjacent_find(n.begin(), n.end()) != n.end()) {
        fail(ErrorCode::kInvalidDelta, "neighbors of " + std::to_string(v) + " not sorted/unique");
      }
      for (NodeId u : n) {
        if (u == v) fail(ErrorCode::kInvalidDelta, "self loop at " + std::to_string(v));
        if (!contains(u)) fail(ErrorCode::kInvalidDelta, "edge endpoint " + std::to_string(u) + " absent");
        if (!has_edge(u, v)) fail(ErrorCode::kInvalidDelta, "asymmetric edge");
      }
    }
    if (features.cols() != feature_dim) fail(ErrorCode::kDimensionMismatch, "feature block width");
  }

  static Snapshot from_parts(int index, int feature_dim, std::span<const NodeRecord> records,
                             std::span<const Edge> edge_list) {
    Snapshot s;
    s.index = index;
    s.feature_dim = feature_dim;
    s.features.resize(0, feature_dim);
    for (const auto& r : records) {
      if (static_cast<int>(r.features.size()) != feature_dim) {
        fail(ErrorCode::kDimensionMismatch, "node " + std::to_string(r.id) + " has " +
                                                std::to_string(r.features.size()) + " features");
      }
      s.reserve_id(r.id);
      if (s.present[r.id]) fail(ErrorCode::kInvalidDelta, "duplicate node " + std::to_string(r.id));
      s.present[r.id] = 1;
      s.features.row(r.id) = Eigen::Map<const RowVector>(r.features.data(), feature_dim);
      s.labels[r.id] = r.label;
      s.splits[r.id] = r.split;
      s.nodes.push_back(r.id);
    }
    std::sort(s.nodes.begin(), s.nodes.end());
    for (const auto& e : edge_list) {
      if (e.u == e.v) fail(ErrorCode::kInvalidDelta, "self loop at " + std::to_string(e.u));
      if (!s.contains(e.u) || !s.contains(e.v)) {
        fail(ErrorCode::kInvalidDelta, "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                           ") references a missing node");
      }
      s.adjacency[e.u].push_back(e.v);
      s.adjacency[e.v].push_back(e.u);
    }
    for (NodeId v : s.nodes) {
      auto& n = s.adjacency[v];
      std::sort(n.begin(), n.end());
      if (std::adjacent_find(n.begin(), n.end()) != n.end()) {
        fail(ErrorCode::kInvalidDelta, "duplicate edge at node " + std::to_string(v));
      }
    }
    return s;
  }

  /// Equality over present nodes only; storage slots of absent ids are ignored.
  friend bool operator==(const Snapshot& a, const Snapshot& b) {
    if (a.index != b.index || a.feature_dim != b.feature_dim || a.nodes != b.nodes) return false;
    for (NodeId v : a.nodes) {
      if (a.adjacency[v] != b.adjacency[v] || a.labels[v] != b.labels[v] ||
          a.splits[v] != b.splits[v] || a.features.row(v) != b.features.row(v)) {
        return false;
      }
    }
    return true;
  }
};

struct SnapshotDelta {
  std::vector<NodeRecord> added_nodes;
  NodeList deleted_nodes;
  std::vector<Edge> added_edges;
  std::vector<Edge> deleted_edges;

  bool empty() const {
    return added_nodes.empty() && deleted_nodes.empty() && added_edges.empty() &&
           deleted_edges.empty();
  }
  friend bool operator==(const SnapshotDelta&, const SnapshotDelta&) = default;
};

namespace detail {

inline std::string edge_str(const Edge& e) {
  return "(" + std::to_string(e.u) + "," + std::to_string(e.v) + ")";
}

// Marks deleted ids; validates the whole delta against prev.
inline std::vector<std::uint8_t> check_delta(const Snapshot& prev, const SnapshotDelta& delta) {
  std::vector<std::uint8_t> deleted(prev.capacity(), 0);
  for (NodeId v : delta.deleted_nodes) {
    if (!prev.contains(v)) {
      fail(ErrorCode::kInvalidDelta, "deleted node " + std::to_string(v) + " absent");
    }
    if (deleted[v]) fail(ErrorCode::kInvalidDelta, "node " + std::to_string(v) + " deleted twice");
    deleted[v] = 1;
  }
  std::set<NodeId> added;
  for (const auto& r : delta.added_nodes) {
    if (prev.contains(r.id)) {
      fail(ErrorCode::kInvalidDelta, "added node " + std::to_string(r.id) + " already exists");
    }
    if (!added.insert(r.id).second) {
      fail(ErrorCode::kInvalidDelta, "node " + std::to_string(r.id) + " added twice");
    }
    if (static_cast<int>(r.features.size()) != prev.feature_dim) {
      fail(ErrorCode::kDimensionMismatch, "added node " + std::to_string(r.id) + " has " +
                                              std::to_string(r.features.size()) + " features");
    }
  }
  auto survives = [&](NodeId v) { return prev.contains(v) && !deleted[v]; };
  std::set<Edge> removed;
  for (const auto& raw : delta.deleted_edges) {
    const Edge e = Edge::make(raw.u, raw.v);
    if (!prev.has_edge(e.u, e.v)) fail(ErrorCode::kInvalidDelta, "deleted edge " + edge_str(e) + " absent");
    if (!removed.insert(e).second) fail(ErrorCode::kInvalidDelta, "edge " + edge_str(e) + " deleted twice");
  }
  std::set<Edge> inserted;
  for (const auto& raw : delta.added_edges) {
    const Edge e = Edge::make(raw.u, raw.v);
    if (e.u == e.v) fail(ErrorCode::kInvalidDelta, "self loop " + edge_str(e));
    for (NodeId x : {e.u, e.v}) {
      if (!survives(x) && !added.contains(x)) {
        fail(ErrorCode::kInvalidDelta, "added edge " + edge_str(e) + " touches missing node " +
                                           std::to_string(x));
      }
    }
    if (prev.has_edge(e.u, e.v) && !removed.contains(e)) {
      fail(ErrorCode::kInvalidDelta, "added edge " + edge_str(e) + " already exists");
    }
    if (!inserted.insert(e).second) fail(ErrorCode::kInvalidDelta, "edge " + edge_str(e) + " added twice");
  }
  return deleted;
}

inline void insert_sorted(NodeList& list, NodeId v) {
  list.insert(std::lower_bound(list.begin(), list.end(), v), v);
}

inline void erase_sorted(NodeList& list, NodeId v) {
  auto it = std::lower_bound(list.begin(), list.end(), v);
  if (it != list.end() && *it == v) list.erase(it);
}

}  // namespace detail

/// Applies `delta` to `prev`, producing the next snapshot (index + 1). Edges
/// incident to deleted nodes are removed with them.
inline Snapshot apply_delta(const Snapshot& prev, const SnapshotDelta& delta) {
  detail::check_delta(prev, delta);
  Snapshot next = prev;
  next.index = prev.index + 1;
  for (const auto& raw : delta.deleted_edges) {
    const Edge e = Edge::make(raw.u, raw.v);
    detail::erase_sorted(next.adjacency[e.u], e.v);
    detail::erase_sorted(next.adjacency[e.v], e.u);
  }
  for (NodeId v : delta.deleted_nodes) {
    for (NodeId u : next.adjacency[v]) detail::erase_sorted(next.adjacency[u], v);
    next.adjacency[v].clear();
    next.present[v] = 0;
    next.features.row(v).setZero();
    next.labels[v] = 0;
    next.splits[v] = Split::kTrain;
  }
  for (const auto& r : delta.added_nodes) {
    next.reserve_id(r.id);
    next.present[r.id] = 1;
    next.features.row(r.id) = Eigen::Map<const RowVector>(r.features.data(), prev.feature_dim);
    next.labels[r.id] = r.label;
    next.splits[r.id] = r.split;
  }
  for (const auto& raw : delta.added_edges) {
    const Edge e = Edge::make(raw.u, raw.v);
    detail::insert_sorted(next.adjacency[e.u], e.v);
    detail::insert_sorted(next.adjacency[e.v], e.u);
  }
  next.nodes.clear();
  for (std::size_t v = 0; v < next.present.size(); ++v) {
    if (next.present[v]) next.nodes.push_back(static_cast<NodeId>(v));
  }
  return next;
}

/// Minimal delta turning `prev` into `next`, sorted by id. Edges incident to
/// deleted nodes are implied by the node deletion and not listed.
inline SnapshotDelta diff_snapshots(const Snapshot& prev, const Snapshot& next) {
  if (prev.feature_dim != next.feature_dim) {
    fail(ErrorCode::kDimensionMismatch, "diff_snapshots: feature dimensions differ");
  }
  SnapshotDelta d;
  std::set_difference(prev.nodes.begin(), prev.nodes.end(), next.nodes.begin(), next.nodes.end(),
                      std::back_inserter(d.deleted_nodes));
  NodeList added;
  std::set_difference(next.nodes.begin(), next.nodes.end(), prev.nodes.begin(), prev.nodes.end(),
                      std::back_inserter(added));
  for (NodeId v : added) d.added_nodes.push_back(next.record(v));
  const auto pe = prev.edges();
  const auto ne = next.edges();
  std::set_difference(ne.begin(), ne.end(), pe.begin(), pe.end(), std::back_inserter(d.added_edges));
  std::vector<Edge> gone;
  std::set_difference(pe.begin(), pe.end(), ne.begin(), ne.end(), std::back_inserter(gone));
  for (const Edge& e : gone) {
    if (next.contains(e.u) && next.contains(e.v)) d.deleted_edges.push_back(e);
  }
  return d;
}

/// Hop distances from a set of sources, cut off at `max_hops`; nodes further
/// away (or unreachable) get -1. Indexed by id.
inline std::vector<int> bfs_distances(const Snapshot& s, std::span<const NodeId> sources,
                                      int max_hops) {
  std::vector<int> dist(s.capacity(), -1);
  std::deque<NodeId> queue;
  for (NodeId v : sources) {
    s.require(v);
    if (dist[v] != 0) {
      dist[v] = 0;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    if (dist[v] >= max_hops) continue;
    for (NodeId u : s.adjacency[v]) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

/// All nodes within `k` hops of `center`, including the center, sorted.
inline NodeList k_hop_ego(const Snapshot& s, NodeId center, int k) {
  s.require(center);
  if (k < 0) fail(ErrorCode::kInvalidDelta, "k_hop_ego: negative radius");
  const NodeId src[] = {center};
  const auto dist = bfs_distances(s, src, k);
  NodeList out;
  for (NodeId v : s.nodes) {
    if (dist[v] >= 0) out.push_back(v);
  }
  return out;
}

/// Partition of a snapshot transition t-1 -> t into center sets.
///
/// `touched` are surviving nodes whose neighbor set changes. Every surviving
/// node of t-1 within k hops of a touched node is unstable (the buffer zone
/// between the touched nodes and the k-hop frontier is folded into unstable so
/// that stable and unstable partition the surviving nodes). Deleted nodes are
/// kept in their own set.
struct Decomposition {
  int source_index = 0;  // snapshot index of t-1
  int k = 0;
  NodeList touched;
  NodeList unstable_centers;
  NodeList stable_centers;
  NodeList changed_centers;  // ids at t: unstable survivors plus added nodes
  NodeList deleted_centers;

  friend bool operator==(const Decomposition&, const Decomposition&) = default;
};

inline Decomposition decompose(const Snapshot& prev, const SnapshotDelta& delta, int k) {
  if (k < 1) fail(ErrorCode::kInvalidDelta, "decompose: k must be >= 1");
  const auto deleted = detail::check_delta(prev, delta);
  auto survives = [&](NodeId v) { return prev.contains(v) && !deleted[v]; };

  std::set<NodeId> touched;
  for (const auto& e : delta.added_edges) {
    for (NodeId x : {e.u, e.v}) {
      if (survives(x)) touched.insert(x);
    }
  }
  for (const auto& e : delta.deleted_edges) {
    for (NodeId x : {e.u, e.v}) {
      if (survives(x)) touched.insert(x);
    }
  }
  for (NodeId x : delta.deleted_nodes) {
    for (NodeId y : prev.adjacency[x]) {
      if (survives(y)) touched.insert(y);
    }
  }

  Decomposition d;
  d.source_index = prev.index;
  d.k = k;
  d.touched.assign(touched.begin(), touched.end());
  const auto dist = bfs_distances(prev, d.touched, k);
  for (NodeId v : prev.nodes) {
    if (!survives(v)) {
      d.deleted_centers.push_back(v);
    } else if (dist[v] >= 0) {
      d.unstable_centers.push_back(v);
    } else {
      d.stable_centers.push_back(v);
    }
  }
  d.changed_centers = d.unstable_centers;
  for (const auto& r : delta.added_nodes) d.changed_centers.push_back(r.id);
  std::sort(d.changed_centers.begin(), d.changed_centers.end());
  return d;
}

/// Sampled centers from a source snapshot; neighborhoods are recovered from
/// that snapshot on demand.
struct MemoryBuffer {
  NodeList center_nodes;  // sorted, unique
  int source_snapshot = 0;
  int k = 2;

  bool empty() const { return center_nodes.empty(); }
  std::size_t size() const { return center_nodes.size(); }
  friend bool operator==(const MemoryBuffer&, const MemoryBuffer&) = default;
};

/// Uniform sample without replacement of min(size, |candidates|) centers.
/// With `restrict_to` set, only nodes of that split are candidates.
inline MemoryBuffer sample_memory(const Snapshot& s, std::size_t size, std::uint64_t seed,
                                  std::optional<Split> restrict_to = std::nullopt, int k = 2) {
  NodeList candidates = restrict_to ? s.nodes_with_split(*restrict_to) : s.nodes;
  MemoryBuffer mem;
  mem.source_snapshot = s.index;
  mem.k = k;
  Rng rng(seed);
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(mem.center_nodes),
              std::min(size, candidates.size()), rng);
  std::sort(mem.center_nodes.begin(), mem.center_nodes.end());
  return mem;
}

/// Keeps the memory centers that are stable in `d`.
inline MemoryBuffer stable_memory_subset(const MemoryBuffer& mem, const Decomposition& d) {
  if (mem.source_snapshot != d.source_index) {
    fail(ErrorCode::kSnapshotMismatch, "memory from snapshot " + std::to_string(mem.source_snapshot) +
                                           " vs decomposition of snapshot " +
                                           std::to_string(d.source_index));
  }
  MemoryBuffer out;
  out.source_snapshot = mem.source_snapshot;
  out.k = mem.k;
  std::set_intersection(mem.center_nodes.begin(), mem.center_nodes.end(), d.stable_centers.begin(),
                        d.stable_centers.end(), std::back_inserter(out.center_nodes));
  return out;
}

/// Snapshots G^1..G^T with the deltas between them.
struct DynamicGraph {
  std::vector<Snapshot> snapshots;
  std::vector<SnapshotDelta> deltas;  // deltas[i] maps snapshots[i] -> snapshots[i+1]
  int num_classes = 0;
  int feature_dim = 0;

  int num_snapshots() const { return static_cast<int>(snapshots.size()); }

  /// Snapshot t (1-based).
  const Snapshot& at(int t) const { return snapshots.at(static_cast<std::size_t>(t - 1)); }

  /// Delta producing snapshot t from t-1 (t >= 2).
  const SnapshotDelta& delta_into(int t) const { return deltas.at(static_cast<std::size_t>(t - 2)); }

  /// Snapshot index in which each id first appears (0 if never), by id.
  std::vector<int> arrivals() const {
    std::size_t cap = 0;
    for (const auto& s : snapshots) cap = std::max(cap, s.capacity());
    std::vector<int> out(cap, 0);
    for (const auto& s : snapshots) {
      for (NodeId v : s.nodes) {
        if (out[v] == 0) out[v] = s.index;
      }
    }
    return out;
  }

  /// Nodes of the given split that first appear in snapshot `task`, restricted
  /// to those present in snapshot `present_in` (defaults to `task`).
  NodeList task_nodes(int task, Split split, std::optional<int> present_in = std::nullopt) const {
    const auto arr = arrivals();
    const Snapshot& s = at(present_in.value_or(task));
    NodeList out;
    for (NodeId v : s.nodes) {
      if (arr[v] == task && s.splits[v] == split) out.push_back(v);
    }
    return out;
  }

  /// Checks that replaying deltas reproduces the stored snapshots and that
  /// ids are never reused after deletion.
  void validate() const {
    if (snapshots.empty()) fail(ErrorCode::kInvalidDelta, "dynamic graph without snapshots");
    if (deltas.size() + 1 != snapshots.size()) {
      fail(ErrorCode::kInvalidDelta, "expected T-1 deltas");
    }
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
      snapshots[i].validate();
      if (snapshots[i].feature_dim != feature_dim) {
        fail(ErrorCode::kDimensionMismatch, "snapshot feature dimension differs");
      }
      for (NodeId v : snapshots[i].nodes) {
        if (snapshots[i].labels[v] < 0 || snapshots[i].labels[v] >= num_classes) {
          fail(ErrorCode::kLabelOutOfRange, "node " + std::to_string(v) + " label out of range");
        }
      }
    }
    std::vector<std::uint8_t> retired;
    for (std::size_t i = 0; i + 1 < snapshots.size(); ++i) {
      if (!(apply_delta(snapshots[i], deltas[i]) == snapshots[i + 1])) {
        fail(ErrorCode::kInvalidDelta, "delta " + std::to_string(i + 1) + " does not reproduce snapshot " +
                                           std::to_string(i + 2));
      }
      for (NodeId v : deltas[i].deleted_nodes) {
        if (retired.size() <= v) retired.resize(v + 1, 0);
        retired[v] = 1;
      }
      for (const auto& r : deltas[i].added_nodes) {
        if (r.id < retired.size() && retired[r.id]) {
          fail(ErrorCode::kInvalidDelta, "node id " + std::to_string(r.id) + " reused after deletion");
        }
      }
    }
  }

  static DynamicGraph from_snapshots(std::vector<Snapshot> snaps, int num_classes) {
    DynamicGraph g;
    g.num_classes = num_classes;
    g.feature_dim = snaps.empty() ? 0 : snaps.front().feature_dim;
    for (std::size_t i = 0; i + 1 < snaps.size(); ++i) {
      g.deltas.push_back(diff_snapshots(snaps[i], snaps[i + 1]));
    }
    g.snapshots = std::move(snaps);
    return g;
  }
};

}  // namespace pignn

#endif  // PIGNN_GRAPH_HPP_
