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

// JSON model checkpoints. Doubles are written in shortest round-trip form, so
// save/load is bit-exact for finite weights.

#ifndef PIGNN_CHECKPOINT_HPP_
#define PIGNN_CHECKPOINT_HPP_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "pignn/error.hpp"
#include "pignn/model.hpp"

namespace pignn {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double x = m.data()[i];
    if (!std::isfinite(x)) fail(ErrorCode::kFormatError, "cannot serialize a non-finite weight");
    data.push_back(x);
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    fail(ErrorCode::kFormatError, where + ": matrix data length does not match its shape");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
  return m;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ExpandableGNN& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : m.layers) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& block : layer) {
      nlohmann::json weights = nlohmann::json::array();
      for (const auto& w : block.weights) weights.push_back(detail::matrix_to_json(w));
      blocks.push_back({{"weights", std::move(weights)}, {"bias", detail::matrix_to_json(block.bias)}});
    }
    layers.push_back(std::move(blocks));
  }
  nlohmann::json classifier = nlohmann::json::array();
  for (const auto& u : m.classifier) classifier.push_back(detail::matrix_to_json(u));
  std::vector<int> frozen(m.frozen.begin(), m.frozen.end());
  return {{"format", "pignn-model"},
          {"version", kCheckpointVersion},
          {"backbone", std::string(to_string(m.backbone))},
          {"laterals", m.laterals},
          {"input_dim", m.input_dim},
          {"num_classes", m.num_classes},
          {"depth", m.depth},
          {"block_widths", m.block_widths},
          {"frozen", frozen},
          {"new_block_begin", m.new_block_begin},
          {"width_history", m.width_history},
          {"layers", std::move(layers)},
          {"classifier", std::move(classifier)},
          {"classifier_bias", detail::matrix_to_json(m.classifier_bias)}};
}

/// Rebuilds a model and checks that every block has the shape its widths
/// imply.
inline ExpandableGNN model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "pignn-model") {
      fail(ErrorCode::kFormatError, "not a model checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      fail(ErrorCode::kVersionMismatch, "model checkpoint version " + std::to_string(version) +
                                            ", expected " + std::to_string(kCheckpointVersion));
    }
    ExpandableGNN m;
    m.backbone = parse_backbone(j.at("backbone").get<std::string>());
    m.laterals = j.at("laterals").get<bool>();
    m.input_dim = j.at("input_dim").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    m.depth = j.at("depth").get<int>();
    m.block_widths = j.at("block_widths").get<std::vector<int>>();
    for (int f : j.at("frozen").get<std::vector<int>>()) m.frozen.push_back(static_cast<std::uint8_t>(f != 0));
    m.new_block_begin = j.at("new_block_begin").get<int>();
    m.width_history = j.at("width_history").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::vector<BlockLayer> blocks;
      for (std::size_t b = 0; b < layers[l].size(); ++b) {
        const std::string where = "layer " + std::to_string(l) + " block " + std::to_string(b);
        BlockLayer bl;
        for (const auto& w : layers[l][b].at("weights")) bl.weights.push_back(detail::matrix_from_json(w, where));
        bl.bias = detail::matrix_from_json(layers[l][b].at("bias"), where);
        blocks.push_back(std::move(bl));
      }
      m.layers.push_back(std::move(blocks));
    }
    for (const auto& u : j.at("classifier")) m.classifier.push_back(detail::matrix_from_json(u, "classifier"));
    m.classifier_bias = detail::matrix_from_json(j.at("classifier_bias"), "classifier_bias");

    // Structural checks.
    const auto nb = static_cast<std::size_t>(m.num_blocks());
    if (m.depth < 1 || m.layers.size() != static_cast<std::size_t>(m.depth) || m.frozen.size() != nb ||
        m.classifier.size() != nb || m.new_block_begin < 1 || m.new_block_begin > m.num_blocks()) {
      fail(ErrorCode::kFormatError, "checkpoint block structure is inconsistent");
    }
    for (int l = 0; l < m.depth; ++l) {
      const auto& layer = m.layers[static_cast<std::size_t>(l)];
      if (layer.size() != nb) fail(ErrorCode::kFormatError, "layer block count mismatch");
      for (int b = 0; b < m.num_blocks(); ++b) {
        const auto& bl = layer[static_cast<std::size_t>(b)];
        const auto inputs = m.input_blocks(l, b);
        const int w = m.block_widths[static_cast<std::size_t>(b)];
        if (bl.weights.size() != inputs.size() || bl.bias.rows() != 1 || bl.bias.cols() != w) {
          fail(ErrorCode::kFormatError, "block shape mismatch at layer " + std::to_string(l));
        }
        for (std::size_t a = 0; a < inputs.size(); ++a) {
          if (bl.weights[a].rows() != m.weight_factor() * m.input_width(l, inputs[a]) || bl.weights[a].cols() != w) {
            fail(ErrorCode::kFormatError, "weight shape mismatch at layer " + std::to_string(l));
          }
        }
      }
    }
    for (int b = 0; b < m.num_blocks(); ++b) {
      const auto& u = m.classifier[static_cast<std::size_t>(b)];
      if (u.rows() != m.block_widths[static_cast<std::size_t>(b)] || u.cols() != m.num_classes) {
        fail(ErrorCode::kFormatError, "classifier block shape mismatch");
      }
    }
    if (m.classifier_bias.rows() != 1 || m.classifier_bias.cols() != m.num_classes) {
      fail(ErrorCode::kFormatError, "classifier bias shape mismatch");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, std::string("model checkpoint: ") + e.what());
  }
}

inline void save_model(const ExpandableGNN& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << model_to_json(m).dump() << '\n';
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

inline ExpandableGNN load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace pignn

#endif  // PIGNN_CHECKPOINT_HPP_
