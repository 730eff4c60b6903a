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

// Dense math helpers: the row-major Matrix type, Glorot initialisation and
// the softmax cross-entropy family (hard labels and soft targets).

#ifndef PIGNN_TENSOR_HPP_
#define PIGNN_TENSOR_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "pignn/error.hpp"
#include "pignn/rng.hpp"

namespace pignn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols,
                             Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  Matrix out(rows, cols);
  if (rows == 0 || cols == 0) return out;
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = dist(rng);
  return out;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// log(sum(exp(row))) computed with the max-shift.
inline double log_sum_exp(const Eigen::Ref<const RowVector>& row) {
  const double mx = row.maxCoeff();
  return mx + std::log((row.array() - mx).exp().sum());
}

inline RowVector softmax_row(const Eigen::Ref<const RowVector>& row) {
  const double mx = row.maxCoeff();
  RowVector e = (row.array() - mx).exp().matrix();
  return e / e.sum();
}

inline Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) out.row(i) = softmax_row(logits.row(i));
  return out;
}

inline void check_label(int label, Eigen::Index num_classes) {
  if (label < 0 || label >= num_classes) {
    fail(ErrorCode::kLabelOutOfRange,
         "label " + std::to_string(label) + " outside [0, " + std::to_string(num_classes) + ")");
  }
}

/// Sum over rows of CrossEnt(softmax(logit), label). Sum reduction; an empty
/// set has loss 0.
inline double loss_ce(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    fail(ErrorCode::kShapeMismatch, "loss_ce: " + std::to_string(logits.rows()) +
                                        " logit rows vs " + std::to_string(labels.size()) +
                                        " labels");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    check_label(y, logits.cols());
    total += log_sum_exp(logits.row(i)) - logits(i, y);
  }
  return total;
}

/// d loss_ce / d logits = softmax - onehot.
inline Matrix loss_ce_grad(const Matrix& logits, std::span<const int> labels) {
  Matrix g = softmax(logits);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    check_label(y, logits.cols());
    g(i, y) -= 1.0;
  }
  return g;
}

/// Soft-target cross-entropy: sum_i -sum_c p_ic log softmax(z_i)_c.
inline double soft_cross_entropy(const Matrix& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    fail(ErrorCode::kShapeMismatch, "soft_cross_entropy: target shape differs from logits");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double lse = log_sum_exp(logits.row(i));
    total -= (targets.row(i).array() * (logits.row(i).array() - lse)).sum();
  }
  return total;
}

inline Matrix soft_cross_entropy_grad(const Matrix& logits, const Matrix& targets) {
  // Rows of targets are probability vectors, so the gradient is q - p.
  return softmax(logits) - targets;
}

/// Row-wise argmax; ties go to the lowest class index.
inline int argmax_row(const Eigen::Ref<const RowVector>& row) {
  int best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c) {
    if (row(c) > row(best)) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace pignn

#endif  // PIGNN_TENSOR_HPP_
