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

// Synthetic class-incremental streams and the in-memory dataset bundle
// (node table, feature block, event log) that the file format mirrors.

#ifndef PIGNN_DATAGEN_HPP_
#define PIGNN_DATAGEN_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pignn/error.hpp"
#include "pignn/graph.hpp"
#include "pignn/rng.hpp"
#include "pignn/tensor.hpp"

namespace pignn {

struct GenConfig {
  int T = 6;
  int classes_per_task = 2;
  int nodes_per_class_per_task = 50;
  int feature_dim = 8;
  double p_in = 0.12;
  double p_out = 0.005;
  double p_back = 0.0001;
  double p_del_node = 0.0;
  double p_del_edge = 0.0;
  double noise_sigma = 0.2;
  double mean_norm = 6.0;  // length of each class mean
  std::uint64_t seed = 0;

  int num_classes() const { return T * classes_per_task; }

  void validate() const {
    auto bad = [](const std::string& what) { fail(ErrorCode::kConfigInvalid, what); };
    if (T < 1) bad("T must be >= 1");
    if (classes_per_task < 1) bad("classes_per_task must be >= 1");
    if (nodes_per_class_per_task < 1) bad("nodes_per_class_per_task must be >= 1");
    if (feature_dim < 1) bad("feature_dim must be >= 1");
    auto prob = [&](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) bad(std::string(name) + " must lie in [0, 1]");
    };
    prob(p_in, "p_in");
    prob(p_out, "p_out");
    prob(p_back, "p_back");
    prob(p_del_node, "p_del_node");
    prob(p_del_edge, "p_del_edge");
    if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
    if (!(mean_norm > 0.0)) bad("mean_norm must be > 0");
  }
};

enum class EventOp { kAddNode, kDelNode, kAddEdge, kDelEdge };

inline std::string_view to_string(EventOp op) {
  switch (op) {
    case EventOp::kAddNode: return "add_node";
    case EventOp::kDelNode: return "del_node";
    case EventOp::kAddEdge: return "add_edge";
    case EventOp::kDelEdge: return "del_edge";
  }
  return "?";
}

inline std::optional<EventOp> parse_event_op(std::string_view s) {
  if (s == "add_node") return EventOp::kAddNode;
  if (s == "del_node") return EventOp::kDelNode;
  if (s == "add_edge") return EventOp::kAddEdge;
  if (s == "del_edge") return EventOp::kDelEdge;
  return std::nullopt;
}

struct Event {
  int snapshot = 1;
  EventOp op = EventOp::kAddNode;
  NodeId u = 0;
  NodeId v = 0;  // unused for node events

  friend bool operator==(const Event&, const Event&) = default;
};

struct NodeRow {
  NodeId id = 0;
  int arrival = 1;
  int label = 0;
  Split split = Split::kTrain;

  friend bool operator==(const NodeRow&, const NodeRow&) = default;
};

struct BundleMeta {
  int version = 1;
  int feature_dim = 0;
  int num_classes = 0;
  int num_snapshots = 0;

  friend bool operator==(const BundleMeta&, const BundleMeta&) = default;
};

/// Node ids are 0..N-1 and `nodes[i].id == i`; `features` row i belongs to
/// node i. Events are ordered by snapshot.
struct DatasetBundle {
  BundleMeta meta;
  std::vector<NodeRow> nodes;
  Matrix features;
  std::vector<Event> events;

  friend bool operator==(const DatasetBundle& a, const DatasetBundle& b) {
    return a.meta == b.meta && a.nodes == b.nodes && a.events == b.events &&
           a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
           a.features == b.features;
  }
};

/// Replays the event log. Throws InvalidDelta (or FormatError for structural
/// problems) when the log is inconsistent.
inline DynamicGraph to_dynamic_graph(const DatasetBundle& b) {
  const int d = b.meta.feature_dim;
  const int T = b.meta.num_snapshots;
  if (T < 1) fail(ErrorCode::kFormatError, "bundle declares no snapshots");
  if (b.features.rows() != static_cast<Eigen::Index>(b.nodes.size()) || b.features.cols() != d) {
    fail(ErrorCode::kDimensionMismatch, "feature block does not match node table");
  }
  for (std::size_t i = 0; i < b.nodes.size(); ++i) {
    if (b.nodes[i].id != i) fail(ErrorCode::kFormatError, "node table ids must be 0..N-1 in order");
  }
  std::vector<SnapshotDelta> deltas(static_cast<std::size_t>(T));
  int last = 1;
  for (std::size_t i = 0; i < b.events.size(); ++i) {
    const Event& e = b.events[i];
    if (e.snapshot < last || e.snapshot > T) {
      fail(ErrorCode::kFormatError, "event " + std::to_string(i) + ": snapshot " +
                                        std::to_string(e.snapshot) + " out of order or range");
    }
    last = e.snapshot;
    auto check_id = [&](NodeId v) {
      if (v >= b.nodes.size()) {
        fail(ErrorCode::kUnknownNode, "event " + std::to_string(i) + ": node " + std::to_string(v) +
                                          " missing from the node table");
      }
    };
    SnapshotDelta& delta = deltas[static_cast<std::size_t>(e.snapshot - 1)];
    check_id(e.u);
    switch (e.op) {
      case EventOp::kAddNode: {
        const NodeRow& r = b.nodes[e.u];
        NodeRecord rec{e.u, {}, r.label, r.split};
        rec.features.assign(b.features.row(e.u).data(), b.features.row(e.u).data() + d);
        delta.added_nodes.push_back(std::move(rec));
        break;
      }
      case EventOp::kDelNode: delta.deleted_nodes.push_back(e.u); break;
      case EventOp::kAddEdge: check_id(e.v); delta.added_edges.push_back(Edge::make(e.u, e.v)); break;
      case EventOp::kDelEdge: check_id(e.v); delta.deleted_edges.push_back(Edge::make(e.u, e.v)); break;
    }
  }
  DynamicGraph g;
  g.num_classes = b.meta.num_classes;
  g.feature_dim = d;
  Snapshot cur = Snapshot::from_parts(0, d, {}, {});
  for (int t = 1; t <= T; ++t) {
    cur = apply_delta(cur, deltas[static_cast<std::size_t>(t - 1)]);
    g.snapshots.push_back(cur);
    if (t >= 2) g.deltas.push_back(std::move(deltas[static_cast<std::size_t>(t - 1)]));
  }
  g.validate();
  return g;
}

namespace detail {
inline void append_delta_events(int t, const SnapshotDelta& delta, std::vector<Event>& out) {
  NodeList del = delta.deleted_nodes;
  std::sort(del.begin(), del.end());
  for (NodeId v : del) out.push_back({t, EventOp::kDelNode, v, 0});
  std::vector<Edge> de = delta.deleted_edges;
  for (auto& e : de) e = Edge::make(e.u, e.v);
  std::sort(de.begin(), de.end());
  for (const Edge& e : de) out.push_back({t, EventOp::kDelEdge, e.u, e.v});
  NodeList add;
  for (const auto& r : delta.added_nodes) add.push_back(r.id);
  std::sort(add.begin(), add.end());
  for (NodeId v : add) out.push_back({t, EventOp::kAddNode, v, 0});
  std::vector<Edge> ae = delta.added_edges;
  for (auto& e : ae) e = Edge::make(e.u, e.v);
  std::sort(ae.begin(), ae.end());
  for (const Edge& e : ae) out.push_back({t, EventOp::kAddEdge, e.u, e.v});
}
}  // namespace detail

/// Inverse of to_dynamic_graph. Ids must be dense (every id below the largest
/// appears in some snapshot). Per snapshot, events are written as del_node,
/// del_edge, add_node, add_edge, each sorted by id.
inline DatasetBundle to_bundle(const DynamicGraph& g) {
  g.validate();
  DatasetBundle b;
  b.meta.feature_dim = g.feature_dim;
  b.meta.num_classes = g.num_classes;
  b.meta.num_snapshots = g.num_snapshots();
  const auto arrivals = g.arrivals();
  b.nodes.resize(arrivals.size());
  b.features = Matrix::Zero(static_cast<Eigen::Index>(arrivals.size()), g.feature_dim);
  for (NodeId v = 0; v < arrivals.size(); ++v) {
    if (arrivals[v] == 0) fail(ErrorCode::kFormatError, "node id " + std::to_string(v) + " never appears");
    const Snapshot& s = g.at(arrivals[v]);
    b.nodes[v] = {v, arrivals[v], s.labels[v], s.splits[v]};
    b.features.row(v) = s.features.row(v);
  }
  const Snapshot empty = Snapshot::from_parts(0, g.feature_dim, {}, {});
  detail::append_delta_events(1, diff_snapshots(empty, g.at(1)), b.events);
  for (int t = 2; t <= g.num_snapshots(); ++t) detail::append_delta_events(t, g.delta_into(t), b.events);
  return b;
}

/// Builds a class-incremental stream: snapshot t introduces classes
/// (t-1)c .. tc-1 with m nodes each. Deletions hit only structure that existed
/// before snapshot t; back-edges join each new node to each surviving older
/// node with probability p_back, regardless of class.
inline DatasetBundle generate_stream(const GenConfig& gc) {
  gc.validate();
  const int T = gc.T;
  const int d = gc.feature_dim;
  const int C = gc.num_classes();
  const int cohort = gc.classes_per_task * gc.nodes_per_class_per_task;

  DatasetBundle b;
  b.meta = {1, d, C, T};
  const std::size_t N = static_cast<std::size_t>(T) * static_cast<std::size_t>(cohort);
  b.nodes.resize(N);
  b.features.resize(static_cast<Eigen::Index>(N), d);

  Rng mean_rng(derive_seed(gc.seed, {101}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix means(C, d);
  for (int c = 0; c < C; ++c) {
    for (int j = 0; j < d; ++j) means(c, j) = normal(mean_rng);
    const double n = means.row(c).norm();
    if (n > 0.0) {
      means.row(c) *= gc.mean_norm / n;
    } else {
      means(c, 0) = gc.mean_norm;
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::uint8_t> alive(N, 0);
  std::map<Edge, int> edges;  // live edges
  for (int t = 1; t <= T; ++t) {
    Rng rng(derive_seed(gc.seed, {102, static_cast<std::uint64_t>(t)}));
    const NodeId first = static_cast<NodeId>((t - 1) * cohort);
    if (t >= 2) {
      NodeList dead;
      for (NodeId v = 0; v < first; ++v) {
        if (alive[v] && unit(rng) < gc.p_del_node) dead.push_back(v);
      }
      for (NodeId v : dead) {
        alive[v] = 0;
        b.events.push_back({t, EventOp::kDelNode, v, 0});
      }
      std::vector<Edge> gone;
      for (auto it = edges.begin(); it != edges.end();) {
        if (!alive[it->first.u] || !alive[it->first.v]) {
          it = edges.erase(it);
        } else {
          ++it;
        }
      }
      for (const auto& [e, unused] : edges) {
        if (unit(rng) < gc.p_del_edge) gone.push_back(e);
      }
      for (const Edge& e : gone) {
        edges.erase(e);
        b.events.push_back({t, EventOp::kDelEdge, e.u, e.v});
      }
    }
    for (int i = 0; i < cohort; ++i) {
      const NodeId v = first + static_cast<NodeId>(i);
      const int label = (t - 1) * gc.classes_per_task + i / gc.nodes_per_class_per_task;
      b.nodes[v] = {v, t, label, Split::kTrain};
      for (int j = 0; j < d; ++j) b.features(v, j) = means(label, j) + gc.noise_sigma * normal(rng);
      b.events.push_back({t, EventOp::kAddNode, v, 0});
    }
    std::vector<Edge> added;
    for (int i = 0; i < cohort; ++i) {
      for (int j = i + 1; j < cohort; ++j) {
        const NodeId u = first + static_cast<NodeId>(i);
        const NodeId v = first + static_cast<NodeId>(j);
        const double p = b.nodes[u].label == b.nodes[v].label ? gc.p_in : gc.p_out;
        if (unit(rng) < p) added.push_back(Edge::make(u, v));
      }
    }
    for (int i = 0; i < cohort; ++i) {
      const NodeId v = first + static_cast<NodeId>(i);
      for (NodeId u = 0; u < first; ++u) {
        if (alive[u] && unit(rng) < gc.p_back) added.push_back(Edge::make(u, v));
      }
    }
    std::sort(added.begin(), added.end());
    for (const Edge& e : added) {
      edges.emplace(e, 0);
      b.events.push_back({t, EventOp::kAddEdge, e.u, e.v});
    }
    for (int i = 0; i < cohort; ++i) alive[first + static_cast<NodeId>(i)] = 1;
  }

  // Splits: nodes alive at T, shuffled within each cohort and concatenated,
  // take the pattern train/val/train/test/train by position; deleted nodes
  // get the same treatment on their own.
  Rng split_rng(derive_seed(gc.seed, {103}));
  constexpr Split kPattern[5] = {Split::kTrain, Split::kVal, Split::kTrain, Split::kTest, Split::kTrain};
  for (int pass = 0; pass < 2; ++pass) {
    std::size_t pos = 0;
    for (int t = 1; t <= T; ++t) {
      NodeList members;
      for (int i = 0; i < cohort; ++i) {
        const NodeId v = static_cast<NodeId>((t - 1) * cohort + i);
        if ((alive[v] != 0) == (pass == 0)) members.push_back(v);
      }
      std::shuffle(members.begin(), members.end(), split_rng);
      for (NodeId v : members) b.nodes[v].split = kPattern[pos++ % 5];
    }
  }
  return b;
}

}  // namespace pignn

#endif  // PIGNN_DATAGEN_HPP_
