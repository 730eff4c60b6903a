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

#ifndef PIGNN_ADAM_HPP_
#define PIGNN_ADAM_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "pignn/error.hpp"
#include "pignn/model.hpp"
#include "pignn/tensor.hpp"

namespace pignn {

/// Adam without weight decay. Moments are kept for every segment of the model
/// the state was created for; entries of frozen segments stay zero.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamState for_model(const ExpandableGNN& model, double lr = 0.001) {
    AdamState s;
    s.lr = lr;
    for (const auto& seg : segments(model)) {
      s.m.push_back(Matrix::Zero(seg.value->rows(), seg.value->cols()));
      s.v.push_back(Matrix::Zero(seg.value->rows(), seg.value->cols()));
    }
    return s;
  }
};

/// One Adam update with bias correction. Segments without a gradient entry
/// (frozen ones) are left untouched, moments included.
inline void adam_step(AdamState& state, ExpandableGNN& model, const Gradients& grads) {
  auto segs = segments(model);
  if (segs.size() != state.m.size()) {
    fail(ErrorCode::kShapeMismatch, "AdamState was built for a different model structure");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& [idx, g] : grads.by_segment) {
    if (idx >= segs.size()) fail(ErrorCode::kShapeMismatch, "gradient for unknown segment");
    Matrix& p = *segs[idx].value;
    if (model.frozen[static_cast<std::size_t>(segs[idx].block)] != 0) continue;
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      fail(ErrorCode::kShapeMismatch, "gradient shape differs for " + segs[idx].name);
    }
    Matrix& m = state.m[idx];
    Matrix& v = state.v[idx];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

}  // namespace pignn

#endif  // PIGNN_ADAM_HPP_
