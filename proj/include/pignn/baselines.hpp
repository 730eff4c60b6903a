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

#ifndef PIGNN_BASELINES_HPP_
#define PIGNN_BASELINES_HPP_

#include <chrono>
#include <optional>
#include <string>

#include "pignn/graph.hpp"
#include "pignn/rng.hpp"
#include "pignn/train.hpp"

namespace pignn {

enum class BaselineKind { kRetrain, kPretrain, kOnline };

inline std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::kRetrain: return "retrain";
    case BaselineKind::kPretrain: return "pretrain";
    case BaselineKind::kOnline: return "online";
  }
  return "?";
}

struct BaselineMethod {
  BaselineKind kind = BaselineKind::kRetrain;
  std::optional<int> capacity;  // hidden width; defaults to PI-GNN's final width

  /// initial_units + expand_units * (T - 1).
  static int matched_capacity(const TrainConfig& cfg, int T) {
    return cfg.initial_units + cfg.expand_units * (T - 1);
  }
};

/// Retrain: fresh model trained on the train split of every G^t.
/// Pretrain: trained on G^1 only.
/// Online: trained on G^1, then all parameters fine-tuned on the changed
/// centers of each later snapshot for cfg.epochs_isolate epochs.
inline RunResult run_baseline(const BaselineMethod& method, const DynamicGraph& data,
                              const TrainConfig& cfg) {
  cfg.validate();
  const int T = data.num_snapshots();
  if (T < 1) fail(ErrorCode::kConfigInvalid, "baseline needs at least one snapshot");
  const int width = method.capacity.value_or(BaselineMethod::matched_capacity(cfg, T));
  RunResult run;
  run.method = std::string(to_string(method.kind));
  run.config = cfg;
  run.accuracy = AccuracyMatrix(T);

  const auto t0 = std::chrono::steady_clock::now();
  ExpandableGNN model = train_initial(fresh_model(cfg, data, width), data.at(1), cfg, &run.initial_loss);
  run.seconds_initial = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  evaluate_row(model, data, 1, cfg, run.accuracy);
  run.widths.push_back(model.hidden_width());

  for (int t = 2; t <= T; ++t) {
    const Snapshot& cur = data.at(t);
    SnapshotRecord rec;
    rec.t = t;
    switch (method.kind) {
      case BaselineKind::kRetrain:
        model = train_initial(fresh_model(cfg, data, width), cur, cfg, &rec.isolate_loss);
        break;
      case BaselineKind::kPretrain:
        rec.skipped = true;
        break;
      case BaselineKind::kOnline: {
        const Decomposition d = decompose(data.at(t - 1), data.delta_into(t), cfg.k);
        rec.num_unstable = d.unstable_centers.size();
        rec.num_stable = d.stable_centers.size();
        rec.num_changed = d.changed_centers.size();
        rec.num_deleted = d.deleted_centers.size();
        const NodeList changed_train = filter_split(cur, d.changed_centers, Split::kTrain);
        rec.skipped = changed_train.empty();
        if (!rec.skipped) {
          rec.isolate_loss = optimize(model, cfg.epochs_isolate, cfg.lr, [&](int e) {
            LossSpec spec;
            spec.push_back({&cur, changed_train, 1.0, LogitSelector::kTotal, std::nullopt,
                            cfg.train_options(seed_tag::kIsolateEpoch, static_cast<std::uint64_t>(t),
                                              static_cast<std::uint64_t>(e))});
            return spec;
          }, cfg.batch_size, derive_seed(cfg.seed, {seed_tag::kIsolateEpoch, static_cast<std::uint64_t>(t)}));
        }
        break;
      }
    }
    rec.width = model.hidden_width();
    run.widths.push_back(rec.width);
    evaluate_row(model, data, t, cfg, run.accuracy);
    run.records.push_back(std::move(rec));
  }
  run.model = std::move(model);
  return run;
}

}  // namespace pignn

#endif  // PIGNN_BASELINES_HPP_
