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

// Block-expandable GNN (GraphSAGE-mean or GCN backbone) with manual forward
// and backward passes.
//
// Hidden units are grouped into blocks; block 0 is the initial width and each
// expansion appends one block to every hidden layer. Within a layer, block b
// reads the previous layer's blocks 0..b (lower block-triangular wiring,
// "laterals") or only block b when laterals are off. Older blocks never read
// newer ones, so the logits split exactly into
//
//   stable_part = c + sum_{b < new_begin} H_b U_b
//   new_part    =     sum_{b >= new_begin} H_b U_b
//
// where U_b are the classifier rows owned by block b and c is the classifier
// bias (owned by block 0). Classifier rows of a freshly expanded block are
// zero, so expansion preserves the function.

#ifndef PIGNN_MODEL_HPP_
#define PIGNN_MODEL_HPP_

#include <Eigen/Sparse>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pignn/error.hpp"
#include "pignn/graph.hpp"
#include "pignn/rng.hpp"
#include "pignn/tensor.hpp"

namespace pignn {

enum class Backbone { kSageMean, kGcn };

inline std::string_view to_string(Backbone b) {
  return b == Backbone::kSageMean ? "sage-mean" : "gcn";
}

inline Backbone parse_backbone(std::string_view s) {
  if (s == "sage-mean" || s == "sage") return Backbone::kSageMean;
  if (s == "gcn") return Backbone::kGcn;
  fail(ErrorCode::kConfigInvalid, "unknown backbone '" + std::string(s) + "'");
}

inline constexpr int kAllNeighbors = -1;

/// Per-layer neighbor fanout. A single entry applies to every layer;
/// kAllNeighbors disables sampling.
struct Fanout {
  std::vector<int> per_layer{kAllNeighbors};

  static Fanout all() { return {}; }
  static Fanout uniform(int n) { return Fanout{{n}}; }

  int at(int layer) const {
    if (per_layer.empty()) return kAllNeighbors;
    return per_layer[std::min<std::size_t>(static_cast<std::size_t>(layer), per_layer.size() - 1)];
  }
  friend bool operator==(const Fanout&, const Fanout&) = default;
};

struct ForwardOptions {
  Fanout fanout;
  std::uint64_t seed = 0;
};

/// Uniform sample without replacement of min(fanout, deg(v)) neighbors of v,
/// deterministic per (seed, v, layer). Returned in ascending id order.
inline NodeList sample_neighbors(const Snapshot& s, NodeId v, int fanout, std::uint64_t seed,
                                 int layer = 0) {
  const NodeList& n = s.neighbors(v);
  if (fanout == kAllNeighbors || fanout >= static_cast<int>(n.size())) return n;
  if (fanout < 1) fail(ErrorCode::kConfigInvalid, "fanout must be >= 1 or all");
  Rng rng(derive_seed(seed, {seed_tag::kNeighbors, v, static_cast<std::uint64_t>(layer)}));
  NodeList out;
  out.reserve(static_cast<std::size_t>(fanout));
  std::sample(n.begin(), n.end(), std::back_inserter(out), fanout, rng);
  return out;
}

/// Weights of one block in one layer.
struct BlockLayer {
  std::vector<Matrix> weights;  // one per input block; SAGE stacks [self; neighbor-mean] rows
  Matrix bias;                  // 1 x width
};

class ExpandableGNN {
 public:
  Backbone backbone = Backbone::kSageMean;
  bool laterals = true;
  int input_dim = 0;
  int num_classes = 0;
  int depth = 2;
  std::vector<int> block_widths;
  std::vector<std::uint8_t> frozen;  // per block
  int new_block_begin = 1;           // blocks >= this form theta_new
  std::vector<std::vector<BlockLayer>> layers;  // [layer][block]
  std::vector<Matrix> classifier;               // per block: width x C
  Matrix classifier_bias;                       // 1 x C, owned by block 0
  std::vector<int> width_history;

  static ExpandableGNN create(Backbone backbone, int input_dim, int num_classes, int hidden,
                              int depth, std::uint64_t seed, bool laterals = true) {
    if (input_dim < 1 || num_classes < 1 || hidden < 1 || depth < 1) {
      fail(ErrorCode::kConfigInvalid, "model dimensions must be positive");
    }
    ExpandableGNN m;
    m.backbone = backbone;
    m.laterals = laterals;
    m.input_dim = input_dim;
    m.num_classes = num_classes;
    m.depth = depth;
    m.layers.resize(static_cast<std::size_t>(depth));
    m.classifier_bias = Matrix::Zero(1, num_classes);
    Rng rng(derive_seed(seed, {seed_tag::kInit}));
    m.append_block(hidden, rng);
    m.classifier.back() = glorot_uniform(hidden, num_classes, hidden, num_classes, rng);
    m.new_block_begin = 1;
    m.width_history = {hidden};
    return m;
  }

  int num_blocks() const { return static_cast<int>(block_widths.size()); }
  int hidden_width() const {
    int w = 0;
    for (int b : block_widths) w += b;
    return w;
  }
  int num_expansions() const { return static_cast<int>(width_history.size()) - 1; }
  bool has_new_blocks() const { return new_block_begin < num_blocks(); }
  bool is_new_block(int b) const { return b >= new_block_begin; }
  int weight_factor() const { return backbone == Backbone::kSageMean ? 2 : 1; }

  std::vector<int> input_blocks(int layer, int block) const {
    if (layer == 0) return {0};
    if (!laterals) return {block};
    std::vector<int> out(static_cast<std::size_t>(block) + 1);
    for (int a = 0; a <= block; ++a) out[static_cast<std::size_t>(a)] = a;
    return out;
  }

  int input_width(int layer, int input_block) const {
    return layer == 0 ? input_dim : block_widths[static_cast<std::size_t>(input_block)];
  }

  /// Column offset of each block in the concatenated hidden vector.
  std::vector<int> block_offsets() const {
    std::vector<int> out;
    int off = 0;
    for (int w : block_widths) {
      out.push_back(off);
      off += w;
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = static_cast<std::size_t>(classifier_bias.size());
    for (const auto& layer : layers) {
      for (const auto& blk : layer) {
        for (const auto& w : blk.weights) n += static_cast<std::size_t>(w.size());
        n += static_cast<std::size_t>(blk.bias.size());
      }
    }
    for (const auto& u : classifier) n += static_cast<std::size_t>(u.size());
    return n;
  }

  bool any_trainable() const {
    return std::any_of(frozen.begin(), frozen.end(), [](std::uint8_t f) { return f == 0; });
  }

  /// Appends one block of `units` Glorot-initialised hidden units to every
  /// layer with a zero classifier block.
  void append_block(int units, Rng& rng) {
    const int b = num_blocks();
    block_widths.push_back(units);
    frozen.push_back(0);
    for (int l = 0; l < depth; ++l) {
      BlockLayer blk;
      const auto inputs = input_blocks(l, b);
      int fan_in = 0;
      for (int a : inputs) fan_in += weight_factor() * input_width(l, a);
      for (int a : inputs) {
        const int rows = weight_factor() * input_width(l, a);
        blk.weights.push_back(glorot_uniform(rows, units, fan_in, units, rng));
      }
      blk.bias = Matrix::Zero(1, units);
      layers[static_cast<std::size_t>(l)].push_back(std::move(blk));
    }
    classifier.push_back(Matrix::Zero(units, num_classes));
  }

  friend bool operator==(const ExpandableGNN& a, const ExpandableGNN& b) {
    if (a.backbone != b.backbone || a.laterals != b.laterals || a.input_dim != b.input_dim ||
        a.num_classes != b.num_classes || a.depth != b.depth || a.block_widths != b.block_widths ||
        a.frozen != b.frozen || a.new_block_begin != b.new_block_begin ||
        a.width_history != b.width_history || a.classifier_bias != b.classifier_bias ||
        a.classifier != b.classifier) {
      return false;
    }
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      for (std::size_t k = 0; k < a.layers[l].size(); ++k) {
        if (a.layers[l][k].weights != b.layers[l][k].weights ||
            a.layers[l][k].bias != b.layers[l][k].bias) {
          return false;
        }
      }
    }
    return true;
  }
};

/// Adds `units` new hidden units per layer. Existing blocks become the stable
/// partition; freeze flags are untouched (see freeze_stable).
inline ExpandableGNN expand(const ExpandableGNN& model, int units, std::uint64_t seed) {
  if (units < 0) fail(ErrorCode::kConfigInvalid, "expand: negative unit count");
  ExpandableGNN out = model;
  if (units == 0) return out;
  Rng rng(derive_seed(seed, {seed_tag::kExpand, static_cast<std::uint64_t>(model.num_blocks())}));
  out.new_block_begin = out.num_blocks();
  out.append_block(units, rng);
  out.width_history.push_back(out.hidden_width());
  return out;
}

/// Marks every existing parameter frozen.
inline ExpandableGNN freeze_stable(const ExpandableGNN& model) {
  ExpandableGNN out = model;
  std::fill(out.frozen.begin(), out.frozen.end(), std::uint8_t{1});
  return out;
}

inline ExpandableGNN unfreeze_all(const ExpandableGNN& model) {
  ExpandableGNN out = model;
  std::fill(out.frozen.begin(), out.frozen.end(), std::uint8_t{0});
  return out;
}

/// Only the most recently added block is trainable.
inline ExpandableGNN unfreeze_newest(const ExpandableGNN& model) {
  ExpandableGNN out = freeze_stable(model);
  out.frozen.back() = 0;
  return out;
}

/// One parameter tensor of the model and the block that owns it.
struct Segment {
  Matrix* value = nullptr;
  int block = 0;
  std::string name;
};

struct ConstSegment {
  const Matrix* value = nullptr;
  int block = 0;
  std::string name;
};

namespace detail {

template <class Model, class Fn>
void visit_segments(Model& m, Fn&& fn) {
  for (int l = 0; l < m.depth; ++l) {
    auto& layer = m.layers[static_cast<std::size_t>(l)];
    for (int b = 0; b < static_cast<int>(layer.size()); ++b) {
      auto& blk = layer[static_cast<std::size_t>(b)];
      const auto inputs = m.input_blocks(l, b);
      for (std::size_t i = 0; i < blk.weights.size(); ++i) {
        fn(blk.weights[i], b,
           "layer" + std::to_string(l) + ".block" + std::to_string(b) + ".w_from" +
               std::to_string(inputs[i]));
      }
      fn(blk.bias, b, "layer" + std::to_string(l) + ".block" + std::to_string(b) + ".bias");
    }
  }
  for (int b = 0; b < static_cast<int>(m.classifier.size()); ++b) {
    fn(m.classifier[static_cast<std::size_t>(b)], b, "classifier.block" + std::to_string(b));
  }
  fn(m.classifier_bias, 0, std::string("classifier.bias"));
}

}  // namespace detail

inline std::vector<Segment> segments(ExpandableGNN& m) {
  std::vector<Segment> out;
  detail::visit_segments(m, [&](Matrix& x, int b, std::string name) {
    out.push_back({&x, b, std::move(name)});
  });
  return out;
}

inline std::vector<ConstSegment> segments(const ExpandableGNN& m) {
  std::vector<ConstSegment> out;
  detail::visit_segments(m, [&](const Matrix& x, int b, std::string name) {
    out.push_back({&x, b, std::move(name)});
  });
  return out;
}

/// Gradients keyed by segment index; only trainable segments appear.
struct Gradients {
  std::map<std::size_t, Matrix> by_segment;

  bool empty() const { return by_segment.empty(); }
  std::size_t size() const { return by_segment.size(); }
};

struct LogitPair {
  Matrix total;
  Matrix stable_part;
  Matrix new_part;
};

// ---------------------------------------------------------------------------
// Computation plan: node sets per layer and the aggregation operators.

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct LayerPlan {
  std::vector<Eigen::Index> self_pos;  // row of each target in the input level
  SparseRows aggregate;                // targets x input level
};

struct ComputePlan {
  std::vector<NodeList> levels;  // levels[l]: nodes whose layer-l input is needed
  std::vector<LayerPlan> layers;
};

inline ComputePlan build_plan(const ExpandableGNN& model, const Snapshot& s, const NodeList& batch,
                              int num_layers, const ForwardOptions& opts) {
  ComputePlan plan;
  plan.levels.resize(static_cast<std::size_t>(num_layers) + 1);
  plan.layers.resize(static_cast<std::size_t>(num_layers));
  plan.levels[static_cast<std::size_t>(num_layers)] = batch;
  std::vector<Eigen::Index> pos(s.capacity(), -1);
  for (int l = num_layers - 1; l >= 0; --l) {
    const NodeList& targets = plan.levels[static_cast<std::size_t>(l) + 1];
    std::vector<NodeList> sampled(targets.size());
    NodeList level;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const NodeId v = targets[i];
      s.require(v);
      if (model.backbone == Backbone::kSageMean) {
        sampled[i] = sample_neighbors(s, v, opts.fanout.at(l), opts.seed, l);
      } else {
        sampled[i] = s.adjacency[v];
      }
      level.push_back(v);
      level.insert(level.end(), sampled[i].begin(), sampled[i].end());
    }
    std::sort(level.begin(), level.end());
    level.erase(std::unique(level.begin(), level.end()), level.end());
    for (std::size_t j = 0; j < level.size(); ++j) pos[level[j]] = static_cast<Eigen::Index>(j);

    LayerPlan& lp = plan.layers[static_cast<std::size_t>(l)];
    lp.self_pos.resize(targets.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const NodeId v = targets[i];
      const auto row = static_cast<Eigen::Index>(i);
      lp.self_pos[i] = pos[v];
      if (model.backbone == Backbone::kSageMean) {
        if (sampled[i].empty()) continue;
        const double w = 1.0 / static_cast<double>(sampled[i].size());
        for (NodeId u : sampled[i]) trips.emplace_back(row, pos[u], w);
      } else {
        const double dv = static_cast<double>(s.adjacency[v].size()) + 1.0;
        trips.emplace_back(row, pos[v], 1.0 / dv);
        for (NodeId u : sampled[i]) {
          const double du = static_cast<double>(s.adjacency[u].size()) + 1.0;
          trips.emplace_back(row, pos[u], 1.0 / std::sqrt(dv * du));
        }
      }
    }
    lp.aggregate.resize(static_cast<Eigen::Index>(targets.size()),
                        static_cast<Eigen::Index>(level.size()));
    lp.aggregate.setFromTriplets(trips.begin(), trips.end());
    for (NodeId v : level) pos[v] = -1;
    plan.levels[static_cast<std::size_t>(l)] = std::move(level);
  }
  return plan;
}

struct ForwardCache {
  ComputePlan plan;
  std::vector<std::vector<Matrix>> inputs;   // [l][a]: H^l_a on levels[l]; l = 0 holds features
  std::vector<std::vector<Matrix>> self_in;  // [l][a] (SAGE only)
  std::vector<std::vector<Matrix>> agg_in;   // [l][a]
  std::vector<std::vector<Matrix>> pre;      // [l][b]: pre-activation on levels[l+1]
};

namespace detail {

inline Matrix gather_rows(const Matrix& src, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
  return out;
}

inline void check_inputs(const ExpandableGNN& model, const Snapshot& s, const NodeList& batch) {
  if (model.input_dim != s.feature_dim) {
    fail(ErrorCode::kDimensionMismatch, "model expects " + std::to_string(model.input_dim) +
                                            " features, snapshot has " +
                                            std::to_string(s.feature_dim));
  }
  for (NodeId v : batch) s.require(v);
}

// Runs the first `num_layers` message-passing layers.
inline ForwardCache run_layers(const ExpandableGNN& model, const Snapshot& s, const NodeList& batch,
                               int num_layers, const ForwardOptions& opts) {
  check_inputs(model, s, batch);
  ForwardCache c;
  c.plan = build_plan(model, s, batch, num_layers, opts);
  const auto L = static_cast<std::size_t>(num_layers);
  c.inputs.resize(L + 1);
  c.self_in.resize(L);
  c.agg_in.resize(L);
  c.pre.resize(L);
  {
    const NodeList& lv = c.plan.levels[0];
    Matrix x(static_cast<Eigen::Index>(lv.size()), s.feature_dim);
    for (std::size_t i = 0; i < lv.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = s.features.row(lv[i]);
    c.inputs[0].push_back(std::move(x));
  }
  const bool sage = model.backbone == Backbone::kSageMean;
  const int nb = model.num_blocks();
  for (std::size_t l = 0; l < L; ++l) {
    const LayerPlan& lp = c.plan.layers[l];
    const auto n_out = static_cast<Eigen::Index>(c.plan.levels[l + 1].size());
    for (const Matrix& h : c.inputs[l]) {
      if (sage) c.self_in[l].push_back(gather_rows(h, lp.self_pos));
      c.agg_in[l].push_back(lp.aggregate * h);
    }
    for (int b = 0; b < nb; ++b) {
      const BlockLayer& blk = model.layers[l][static_cast<std::size_t>(b)];
      const auto inputs = model.input_blocks(static_cast<int>(l), b);
      Matrix z = blk.bias.replicate(n_out, 1);
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto a = static_cast<std::size_t>(inputs[i]);
        const Matrix& w = blk.weights[i];
        if (sage) {
          const Eigen::Index wa = c.self_in[l][a].cols();
          z.noalias() += c.self_in[l][a] * w.topRows(wa);
          z.noalias() += c.agg_in[l][a] * w.bottomRows(wa);
        } else {
          z.noalias() += c.agg_in[l][a] * w;
        }
      }
      c.inputs[l + 1].push_back(z.cwiseMax(0.0));
      c.pre[l].push_back(std::move(z));
    }
  }
  return c;
}

inline LogitPair logits_from_hidden(const ExpandableGNN& model, const std::vector<Matrix>& hidden) {
  const Eigen::Index n = hidden.empty() ? 0 : hidden.front().rows();
  LogitPair out;
  out.stable_part = model.classifier_bias.replicate(n, 1);
  for (int b = 0; b < model.new_block_begin && b < model.num_blocks(); ++b) {
    out.stable_part.noalias() +=
        hidden[static_cast<std::size_t>(b)] * model.classifier[static_cast<std::size_t>(b)];
  }
  if (!model.has_new_blocks()) {
    out.new_part = Matrix::Zero(n, model.num_classes);
    out.total = out.stable_part;
    return out;
  }
  for (int b = model.new_block_begin; b < model.num_blocks(); ++b) {
    Matrix contrib = hidden[static_cast<std::size_t>(b)] * model.classifier[static_cast<std::size_t>(b)];
    if (b == model.new_block_begin) {
      out.new_part = std::move(contrib);
    } else {
      out.new_part += contrib;
    }
  }
  out.total = out.stable_part + out.new_part;
  return out;
}

}  // namespace detail

/// Logits for `batch` (rows in batch order) with their exact stable/new split.
inline LogitPair forward(const ExpandableGNN& model, const Snapshot& s, const NodeList& batch,
                         const ForwardOptions& opts = {}) {
  const auto cache = detail::run_layers(model, s, batch, model.depth, opts);
  return detail::logits_from_hidden(model, cache.inputs.back());
}

/// Post-activation hidden vectors of `layer` (1-based) for `nodes`, blocks
/// concatenated in creation order.
inline Matrix hidden_activations(const ExpandableGNN& model, const Snapshot& s, const NodeList& nodes,
                                 int layer, const ForwardOptions& opts = {}) {
  if (layer < 1 || layer > model.depth) {
    fail(ErrorCode::kLayerOutOfRange, "layer " + std::to_string(layer) + " outside [1, " +
                                          std::to_string(model.depth) + "]");
  }
  const auto cache = detail::run_layers(model, s, nodes, layer, opts);
  const auto& blocks = cache.inputs.back();
  Matrix out(static_cast<Eigen::Index>(nodes.size()), model.hidden_width());
  Eigen::Index off = 0;
  for (const Matrix& h : blocks) {
    out.middleCols(off, h.cols()) = h;
    off += h.cols();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses and gradients.

enum class LogitSelector { kTotal, kStable, kNew };

/// One signed term of an objective: coefficient * CE(selected logits of
/// `nodes` on `snapshot`). Soft targets (rows aligned with nodes) replace the
/// snapshot labels when present.
struct LossTerm {
  const Snapshot* snapshot = nullptr;
  NodeList nodes;
  double coefficient = 1.0;
  LogitSelector selector = LogitSelector::kTotal;
  std::optional<Matrix> soft_targets;
  ForwardOptions options;
};

using LossSpec = std::vector<LossTerm>;

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

namespace detail {

inline const Matrix& select_logits(const LogitPair& p, LogitSelector sel) {
  switch (sel) {
    case LogitSelector::kTotal: return p.total;
    case LogitSelector::kStable: return p.stable_part;
    case LogitSelector::kNew: return p.new_part;
  }
  return p.total;
}

inline double term_loss(const LossTerm& term, const Matrix& z) {
  if (term.soft_targets) return soft_cross_entropy(z, *term.soft_targets);
  const auto labels = term.snapshot->labels_of(term.nodes);
  return loss_ce(z, labels);
}

inline Matrix term_grad(const LossTerm& term, const Matrix& z) {
  if (term.soft_targets) return soft_cross_entropy_grad(z, *term.soft_targets);
  const auto labels = term.snapshot->labels_of(term.nodes);
  return loss_ce_grad(z, labels);
}

inline bool selected(const ExpandableGNN& m, int block, LogitSelector sel) {
  switch (sel) {
    case LogitSelector::kTotal: return true;
    case LogitSelector::kStable: return !m.is_new_block(block);
    case LogitSelector::kNew: return m.is_new_block(block);
  }
  return true;
}

inline void accumulate(std::optional<Matrix>& slot, const Matrix& g) {
  if (slot) {
    *slot += g;
  } else {
    slot = g;
  }
}

// Gradient storage mirroring the model structure.
struct GradBuffers {
  std::vector<std::vector<std::vector<std::optional<Matrix>>>> weights;  // [l][b][i]
  std::vector<std::vector<std::optional<Matrix>>> bias;                  // [l][b]
  std::vector<std::optional<Matrix>> classifier;                         // [b]
  std::optional<Matrix> classifier_bias;

  explicit GradBuffers(const ExpandableGNN& m) {
    weights.resize(m.layers.size());
    bias.resize(m.layers.size());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      weights[l].resize(m.layers[l].size());
      bias[l].resize(m.layers[l].size());
      for (std::size_t b = 0; b < m.layers[l].size(); ++b) weights[l][b].resize(m.layers[l][b].weights.size());
    }
    classifier.resize(m.classifier.size());
  }
};

inline void backprop_term(const ExpandableGNN& m, const LossTerm& term, GradBuffers& gb,
                          double& loss_out) {
  if (term.snapshot == nullptr) fail(ErrorCode::kShapeMismatch, "loss term without snapshot");
  const auto cache = run_layers(m, *term.snapshot, term.nodes, m.depth, term.options);
  const LogitPair logits = logits_from_hidden(m, cache.inputs.back());
  const Matrix& z = select_logits(logits, term.selector);
  loss_out += term.coefficient * term_loss(term, z);
  const Matrix g = term.coefficient * term_grad(term, z);

  const int nb = m.num_blocks();
  auto trainable = [&](int b) { return m.frozen[static_cast<std::size_t>(b)] == 0; };
  // Whether any trainable parameter lies upstream of block a's activations.
  std::vector<bool> upstream(static_cast<std::size_t>(nb), false);
  for (int a = 0; a < nb; ++a) {
    if (m.laterals) {
      upstream[static_cast<std::size_t>(a)] = trainable(a) || (a > 0 && upstream[static_cast<std::size_t>(a) - 1]);
    } else {
      upstream[static_cast<std::size_t>(a)] = trainable(a);
    }
  }

  const auto L = static_cast<std::size_t>(m.depth);
  std::vector<std::optional<Matrix>> dh(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    if (!selected(m, b, term.selector)) continue;
    const auto bs = static_cast<std::size_t>(b);
    const Matrix& h = cache.inputs[L][bs];
    if (trainable(b)) accumulate(gb.classifier[bs], h.transpose() * g);
    if (upstream[bs]) dh[bs] = g * m.classifier[bs].transpose();
  }
  if (term.selector != LogitSelector::kNew && trainable(0)) {
    accumulate(gb.classifier_bias, g.colwise().sum());
  }

  const bool sage = m.backbone == Backbone::kSageMean;
  for (std::size_t li = L; li-- > 0;) {
    const LayerPlan& lp = cache.plan.layers[li];
    const auto n_in = static_cast<Eigen::Index>(cache.plan.levels[li].size());
    std::vector<std::optional<Matrix>> dh_in(li == 0 ? 0 : static_cast<std::size_t>(nb));
    for (int b = nb - 1; b >= 0; --b) {
      const auto bs = static_cast<std::size_t>(b);
      if (!dh[bs]) continue;
      const Matrix dz = dh[bs]->cwiseProduct((cache.pre[li][bs].array() > 0.0).cast<double>().matrix());
      const BlockLayer& blk = m.layers[li][bs];
      const auto inputs = m.input_blocks(static_cast<int>(li), b);
      if (trainable(b)) accumulate(gb.bias[li][bs], dz.colwise().sum());
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto a = static_cast<std::size_t>(inputs[i]);
        const Matrix& w = blk.weights[i];
        if (trainable(b)) {
          if (sage) {
            Matrix dw(w.rows(), w.cols());
            const Eigen::Index wa = cache.self_in[li][a].cols();
            dw.topRows(wa).noalias() = cache.self_in[li][a].transpose() * dz;
            dw.bottomRows(wa).noalias() = cache.agg_in[li][a].transpose() * dz;
            accumulate(gb.weights[li][bs][i], dw);
          } else {
            accumulate(gb.weights[li][bs][i], cache.agg_in[li][a].transpose() * dz);
          }
        }
        if (li == 0 || !upstream[a]) continue;
        Matrix& target = dh_in[a] ? *dh_in[a] : dh_in[a].emplace(Matrix::Zero(n_in, cache.inputs[li][a].cols()));
        if (sage) {
          const Eigen::Index wa = cache.self_in[li][a].cols();
          const Matrix dself = dz * w.topRows(wa).transpose();
          for (std::size_t r = 0; r < lp.self_pos.size(); ++r) {
            target.row(lp.self_pos[r]) += dself.row(static_cast<Eigen::Index>(r));
          }
          const Matrix dagg = dz * w.bottomRows(wa).transpose();
          target.noalias() += lp.aggregate.transpose() * dagg;
        } else {
          const Matrix dagg = dz * w.transpose();
          target.noalias() += lp.aggregate.transpose() * dagg;
        }
      }
    }
    dh = std::move(dh_in);
  }
}

}  // namespace detail

/// Value of a loss specification without gradients.
inline double evaluate_loss(const ExpandableGNN& model, const LossSpec& spec) {
  double total = 0.0;
  for (const auto& term : spec) {
    if (term.coefficient == 0.0) continue;
    const LogitPair p = forward(model, *term.snapshot, term.nodes, term.options);
    total += term.coefficient * detail::term_loss(term, detail::select_logits(p, term.selector));
  }
  return total;
}

/// Loss value and gradients with respect to every trainable segment. Terms
/// with coefficient 0 are skipped.
inline LossAndGrad backward(const ExpandableGNN& model, const LossSpec& spec) {
  LossAndGrad out;
  if (!model.any_trainable()) {
    out.loss = evaluate_loss(model, spec);
    return out;
  }
  detail::GradBuffers gb(model);
  for (const auto& term : spec) {
    if (term.coefficient == 0.0 || term.nodes.empty()) continue;
    detail::backprop_term(model, term, gb, out.loss);
  }
  std::size_t idx = 0;
  auto emit = [&](int block, const std::optional<Matrix>& g, const Matrix& shape) {
    if (model.frozen[static_cast<std::size_t>(block)] == 0) {
      out.grads.by_segment.emplace(idx, g ? *g : Matrix::Zero(shape.rows(), shape.cols()));
    }
    ++idx;
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    for (std::size_t b = 0; b < model.layers[l].size(); ++b) {
      for (std::size_t i = 0; i < model.layers[l][b].weights.size(); ++i) {
        emit(static_cast<int>(b), gb.weights[l][b][i], model.layers[l][b].weights[i]);
      }
      emit(static_cast<int>(b), gb.bias[l][b], model.layers[l][b].bias);
    }
  }
  for (std::size_t b = 0; b < model.classifier.size(); ++b) {
    emit(static_cast<int>(b), gb.classifier[b], model.classifier[b]);
  }
  emit(0, gb.classifier_bias, model.classifier_bias);
  return out;
}

}  // namespace pignn

#endif  // PIGNN_MODEL_HPP_
