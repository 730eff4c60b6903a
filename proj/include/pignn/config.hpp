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

// JSON configuration: one document with optional "generate", "train",
// "method" and "seeds" members. Unknown keys are rejected at every level.

#ifndef PIGNN_CONFIG_HPP_
#define PIGNN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pignn/datagen.hpp"
#include "pignn/error.hpp"
#include "pignn/train.hpp"

namespace pignn {

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"pi-gnn", "retrain", "pretrain", "online"};
  return names;
}

struct CliConfig {
  GenConfig generate;
  TrainConfig train;
  std::string method = "pi-gnn";
  std::vector<std::uint64_t> seeds = {0};
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kConfigInvalid, where + " must be a JSON object");
  for (const auto& [key, unused] : j.items()) {
    if (!allowed.count(key)) fail(ErrorCode::kConfigInvalid, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kConfigInvalid, where + "." + key + " has the wrong type");
  }
}

inline nlohmann::json fanout_to_json(const Fanout& f) {
  nlohmann::json arr = nlohmann::json::array();
  for (int n : f.per_layer) {
    if (n == kAllNeighbors) {
      arr.push_back("all");
    } else {
      arr.push_back(n);
    }
  }
  if (arr.size() == 1) return arr[0];
  return arr;
}

inline Fanout fanout_from_json(const nlohmann::json& j) {
  auto one = [](const nlohmann::json& v) {
    if (v.is_string() && v.get<std::string>() == "all") return kAllNeighbors;
    if (v.is_number_integer() && v.get<int>() >= 1) return v.get<int>();
    fail(ErrorCode::kConfigInvalid, "fanout entries must be positive integers or \"all\"");
  };
  Fanout f;
  f.per_layer.clear();
  if (j.is_array()) {
    if (j.empty()) fail(ErrorCode::kConfigInvalid, "fanout list is empty");
    for (const auto& v : j) f.per_layer.push_back(one(v));
  } else {
    f.per_layer.push_back(one(j));
  }
  return f;
}

template <typename E>
E enum_from(const nlohmann::json& j, const char* key, const std::vector<std::pair<std::string, E>>& names,
            E fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) fail(ErrorCode::kConfigInvalid, std::string(key) + " must be a string");
  const auto s = j.at(key).get<std::string>();
  for (const auto& [n, e] : names) {
    if (n == s) return e;
  }
  fail(ErrorCode::kConfigInvalid, "invalid value '" + s + "' for " + key);
}

inline const std::vector<std::pair<std::string, RectifyScope>> kRectifyNames = {
    {"all", RectifyScope::kAll}, {"newest", RectifyScope::kNewest}};
inline const std::vector<std::pair<std::string, MemoryStructure>> kMemoryNames = {
    {"old", MemoryStructure::kOld}, {"new", MemoryStructure::kNew}};
inline const std::vector<std::pair<std::string, EvalStructure>> kEvalNames = {
    {"task", EvalStructure::kTask}, {"current", EvalStructure::kCurrent}};

template <typename E>
std::string enum_name(E e, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, v] : names) {
    if (v == e) return n;
  }
  return "?";
}

}  // namespace detail

inline nlohmann::json to_json(const GenConfig& g) {
  return {{"T", g.T},
          {"classes_per_task", g.classes_per_task},
          {"nodes_per_class_per_task", g.nodes_per_class_per_task},
          {"feature_dim", g.feature_dim},
          {"p_in", g.p_in},
          {"p_out", g.p_out},
          {"p_back", g.p_back},
          {"p_del_node", g.p_del_node},
          {"p_del_edge", g.p_del_edge},
          {"noise_sigma", g.noise_sigma},
          {"mean_norm", g.mean_norm},
          {"seed", g.seed}};
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
  const std::string w = "generate";
  detail::reject_unknown(j, {"T", "classes_per_task", "nodes_per_class_per_task", "feature_dim", "p_in",
                             "p_out", "p_back", "p_del_node", "p_del_edge", "noise_sigma", "mean_norm", "seed"},
                         w);
  GenConfig g;
  detail::read_key(j, "T", g.T, w);
  detail::read_key(j, "classes_per_task", g.classes_per_task, w);
  detail::read_key(j, "nodes_per_class_per_task", g.nodes_per_class_per_task, w);
  detail::read_key(j, "feature_dim", g.feature_dim, w);
  detail::read_key(j, "p_in", g.p_in, w);
  detail::read_key(j, "p_out", g.p_out, w);
  detail::read_key(j, "p_back", g.p_back, w);
  detail::read_key(j, "p_del_node", g.p_del_node, w);
  detail::read_key(j, "p_del_edge", g.p_del_edge, w);
  detail::read_key(j, "noise_sigma", g.noise_sigma, w);
  detail::read_key(j, "mean_norm", g.mean_norm, w);
  detail::read_key(j, "seed", g.seed, w);
  g.validate();
  return g;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  using namespace detail;
  return {{"beta", c.beta},
          {"lambda", c.lambda},
          {"initial_units", c.initial_units},
          {"expand_units", c.expand_units},
          {"memory_size", c.memory_size},
          {"k", c.k},
          {"epochs_initial", c.epochs_initial},
          {"epochs_rectify", c.epochs_rectify},
          {"epochs_isolate", c.epochs_isolate},
          {"epochs_distill", c.epochs_distill},
          {"student_hidden", c.student_hidden},
          {"lr", c.lr},
          {"weight_decay", 0.0},
          {"batch_size", c.batch_size},
          {"fanout", fanout_to_json(c.fanout)},
          {"seed", c.seed},
          {"backbone", std::string(to_string(c.backbone))},
          {"laterals", c.laterals ? "on" : "off"},
          {"rectify_scope", enum_name(c.rectify_scope, kRectifyNames)},
          {"memory_structure", enum_name(c.memory_structure, kMemoryNames)},
          {"eval_structure", enum_name(c.eval_structure, kEvalNames)},
          {"auto_balance", c.auto_balance},
          {"deletion_distill_threshold", c.deletion_distill_threshold}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  using namespace detail;
  const std::string w = "train";
  reject_unknown(j, {"beta", "lambda", "initial_units", "expand_units", "memory_size", "k", "epochs_initial",
                     "epochs_rectify", "epochs_isolate", "epochs_distill", "student_hidden", "lr",
                     "weight_decay", "batch_size", "fanout", "seed", "backbone", "laterals", "rectify_scope",
                     "memory_structure", "eval_structure", "auto_balance", "deletion_distill_threshold"},
                 w);
  TrainConfig c;
  read_key(j, "beta", c.beta, w);
  read_key(j, "lambda", c.lambda, w);
  read_key(j, "initial_units", c.initial_units, w);
  read_key(j, "expand_units", c.expand_units, w);
  read_key(j, "memory_size", c.memory_size, w);
  read_key(j, "k", c.k, w);
  read_key(j, "epochs_initial", c.epochs_initial, w);
  read_key(j, "epochs_rectify", c.epochs_rectify, w);
  read_key(j, "epochs_isolate", c.epochs_isolate, w);
  read_key(j, "epochs_distill", c.epochs_distill, w);
  read_key(j, "student_hidden", c.student_hidden, w);
  read_key(j, "lr", c.lr, w);
  read_key(j, "batch_size", c.batch_size, w);
  read_key(j, "seed", c.seed, w);
  read_key(j, "auto_balance", c.auto_balance, w);
  read_key(j, "deletion_distill_threshold", c.deletion_distill_threshold, w);
  if (j.contains("weight_decay")) {
    double wd = 0.0;
    read_key(j, "weight_decay", wd, w);
    if (wd != 0.0) fail(ErrorCode::kConfigInvalid, "weight_decay other than 0 is not supported");
  }
  if (j.contains("fanout")) c.fanout = fanout_from_json(j.at("fanout"));
  if (j.contains("backbone")) {
    if (!j.at("backbone").is_string()) fail(ErrorCode::kConfigInvalid, "backbone must be a string");
    c.backbone = parse_backbone(j.at("backbone").get<std::string>());
  }
  if (j.contains("laterals")) {
    const auto& v = j.at("laterals");
    if (v.is_boolean()) {
      c.laterals = v.get<bool>();
    } else if (v.is_string() && (v.get<std::string>() == "on" || v.get<std::string>() == "off")) {
      c.laterals = v.get<std::string>() == "on";
    } else {
      fail(ErrorCode::kConfigInvalid, "laterals must be \"on\" or \"off\"");
    }
  }
  c.rectify_scope = enum_from(j, "rectify_scope", kRectifyNames, c.rectify_scope);
  c.memory_structure = enum_from(j, "memory_structure", kMemoryNames, c.memory_structure);
  c.eval_structure = enum_from(j, "eval_structure", kEvalNames, c.eval_structure);
  c.validate();
  return c;
}

inline void check_method(const std::string& m) {
  for (const auto& n : method_names()) {
    if (n == m) return;
  }
  fail(ErrorCode::kConfigInvalid, "unknown method '" + m + "' (expected pi-gnn, retrain, pretrain or online)");
}

inline nlohmann::json to_json(const CliConfig& c) {
  return {{"generate", to_json(c.generate)}, {"train", to_json(c.train)}, {"method", c.method}, {"seeds", c.seeds}};
}

inline CliConfig cli_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"generate", "train", "method", "seeds"}, "config");
  CliConfig c;
  if (j.contains("generate")) c.generate = gen_config_from_json(j.at("generate"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  detail::read_key(j, "method", c.method, "config");
  check_method(c.method);
  detail::read_key(j, "seeds", c.seeds, "config");
  if (c.seeds.empty()) fail(ErrorCode::kConfigInvalid, "seeds must not be empty");
  return c;
}

inline CliConfig load_cli_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfigInvalid, path.string() + ": " + e.what());
  }
  return cli_config_from_json(j);
}

}  // namespace pignn

#endif  // PIGNN_CONFIG_HPP_
