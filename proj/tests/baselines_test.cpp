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

#include "test_util.hpp"

namespace pignn {
namespace {

DynamicGraph stream(int T, std::uint64_t seed, double p_del = 0.0, double p_back = 0.0001) {
  GenConfig g = testing::small_stream(T, seed);
  g.p_del_node = p_del;
  g.p_back = p_back;
  return to_dynamic_graph(generate_stream(g));
}

TEST(Baselines, MatchedCapacity) {
  TrainConfig cfg;
  EXPECT_EQ(BaselineMethod::matched_capacity(cfg, 6), 72);
  cfg.initial_units = 8;
  cfg.expand_units = 4;
  EXPECT_EQ(BaselineMethod::matched_capacity(cfg, 3), 16);
  EXPECT_EQ(BaselineMethod::matched_capacity(cfg, 1), 8);
}

TEST(Baselines, PretrainNeverForgets) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const DynamicGraph data = stream(4, seed, seed == 2 ? 0.1 : 0.0, seed == 1 ? 0.01 : 0.0001);
    const RunResult run = run_baseline({BaselineKind::kPretrain, std::nullopt}, data, testing::fast_train(seed));
    ASSERT_TRUE(fm(run.accuracy).has_value());
    EXPECT_EQ(*fm(run.accuracy), 0.0) << "seed " << seed;
    for (const auto& rec : run.records) EXPECT_TRUE(rec.skipped);
  }
}

TEST(Baselines, RetrainOnOneSnapshotEqualsTrainInitial) {
  const DynamicGraph data = stream(1, 3);
  const TrainConfig cfg = testing::fast_train(2);
  const RunResult run = run_baseline({BaselineKind::kRetrain, 10}, data, cfg);
  const ExpandableGNN direct = train_initial(fresh_model(cfg, data, 10), data.at(1), cfg);
  EXPECT_EQ(run.model, direct);
  EXPECT_EQ(run.widths, (std::vector<int>{10}));
}

TEST(Baselines, WidthIsConstant) {
  const DynamicGraph data = stream(3, 1);
  const TrainConfig cfg = testing::fast_train();
  for (BaselineKind kind : {BaselineKind::kRetrain, BaselineKind::kPretrain, BaselineKind::kOnline}) {
    const RunResult run = run_baseline({kind, std::nullopt}, data, cfg);
    EXPECT_EQ(run.method, std::string(to_string(kind)));
    for (int w : run.widths) EXPECT_EQ(w, BaselineMethod::matched_capacity(cfg, 3));
    EXPECT_EQ(run.model.num_blocks(), 1);
    EXPECT_TRUE(run.isolated.empty());
  }
}

TEST(Baselines, OnlineRecordsDecomposition) {
  const DynamicGraph data = stream(3, 4, 0.1);
  const TrainConfig cfg = testing::fast_train();
  const RunResult run = run_baseline({BaselineKind::kOnline, std::nullopt}, data, cfg);
  ASSERT_EQ(run.records.size(), 2u);
  for (const auto& rec : run.records) {
    const Decomposition d = decompose(data.at(rec.t - 1), data.delta_into(rec.t), cfg.k);
    EXPECT_EQ(rec.num_changed, d.changed_centers.size());
    EXPECT_EQ(rec.num_deleted, d.deleted_centers.size());
    EXPECT_FALSE(rec.skipped);
  }
}

TEST(Baselines, QualitativeOrderingOnSmallStream) {
  const DynamicGraph data = stream(4, 11);
  TrainConfig cfg = testing::fast_train();
  cfg.epochs_isolate = 60;
  const RunResult retrain = run_baseline({BaselineKind::kRetrain, std::nullopt}, data, cfg);
  const RunResult online = run_baseline({BaselineKind::kOnline, std::nullopt}, data, cfg);
  const RunResult pi = continual_run(data, cfg);
  EXPECT_GE(pm(retrain.accuracy), pm(online.accuracy));
  EXPECT_LT(*fm(online.accuracy), *fm(retrain.accuracy));
  EXPECT_GT(*fm(pi.accuracy), *fm(online.accuracy));
  EXPECT_LE(pm(retrain.accuracy) - pm(pi.accuracy), 0.05);
}

}  // namespace
}  // namespace pignn
