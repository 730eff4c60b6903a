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

#ifndef PIGNN_METRICS_HPP_
#define PIGNN_METRICS_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pignn/error.hpp"
#include "pignn/graph.hpp"
#include "pignn/model.hpp"

namespace pignn {

/// Lower-triangular table: at(i, j) is the accuracy on task j after training
/// through task i (both 1-based, i >= j). Entries are empty when task j has no
/// evaluation nodes.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(int tasks) : rows_(static_cast<std::size_t>(tasks)) {
    for (int i = 0; i < tasks; ++i) rows_[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(i) + 1);
  }

  int tasks() const { return static_cast<int>(rows_.size()); }

  std::optional<double> at(int i, int j) const {
    check(i, j);
    return rows_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
  }

  void set(int i, int j, std::optional<double> value) {
    check(i, j);
    if (value && !(*value >= 0.0 && *value <= 1.0)) {
      fail(ErrorCode::kShapeMismatch, "accuracy outside [0, 1]");
    }
    rows_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] = value;
  }

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  void check(int i, int j) const {
    if (i < 1 || i > tasks() || j < 1 || j > i) {
      fail(ErrorCode::kShapeMismatch, "accuracy index (" + std::to_string(i) + "," +
                                          std::to_string(j) + ") outside the lower triangle");
    }
  }

  std::vector<std::vector<std::optional<double>>> rows_;
};

/// Mean of the diagonal; undefined entries are skipped.
inline double pm(const AccuracyMatrix& m) {
  double sum = 0.0;
  int n = 0;
  for (int i = 1; i <= m.tasks(); ++i) {
    if (auto a = m.at(i, i)) {
      sum += *a;
      ++n;
    }
  }
  return n == 0 ? std::nan("") : sum / n;
}

/// Mean of a_Ti - a_ii over i < T; empty for T = 1. Negative means
/// forgetting.
inline std::optional<double> fm(const AccuracyMatrix& m) {
  const int T = m.tasks();
  if (T <= 1) return std::nullopt;
  double sum = 0.0;
  int n = 0;
  for (int i = 1; i < T; ++i) {
    const auto last = m.at(T, i);
    const auto diag = m.at(i, i);
    if (last && diag) {
      sum += *last - *diag;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

/// Fraction of `nodes` whose argmax total logit (lowest index on ties)
/// equals the label.
inline double accuracy_from_logits(const Matrix& logits, std::span<const int> labels) {
  if (labels.empty()) fail(ErrorCode::kEmptyEvalSet, "accuracy over an empty node set");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    fail(ErrorCode::kShapeMismatch, "accuracy: logits/labels length mismatch");
  }
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (argmax_row(logits.row(i)) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline double accuracy(const ExpandableGNN& model, const Snapshot& s, const NodeList& nodes,
                       const ForwardOptions& opts = {}) {
  if (nodes.empty()) fail(ErrorCode::kEmptyEvalSet, "accuracy over an empty node set");
  const auto logits = forward(model, s, nodes, opts);
  const auto labels = s.labels_of(nodes);
  return accuracy_from_logits(logits.total, labels);
}

}  // namespace pignn

#endif  // PIGNN_METRICS_HPP_
