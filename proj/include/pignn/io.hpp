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

// Dataset directories and result files. The layouts are described in
// FORMAT.md.

#ifndef PIGNN_IO_HPP_
#define PIGNN_IO_HPP_

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pignn/checkpoint.hpp"
#include "pignn/config.hpp"
#include "pignn/datagen.hpp"
#include "pignn/error.hpp"
#include "pignn/metrics.hpp"
#include "pignn/train.hpp"
#include "pignn/verify.hpp"

namespace pignn {

namespace fs = std::filesystem;

inline constexpr int kDatasetVersion = 1;

enum class FeatureFormat { kCsv, kBinary };

// ---------------------------------------------------------------------------
// Low-level text helpers.

namespace detail {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string format_fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

/// A CSV table: header plus data records (line numbers are 1-based, header is
/// line 1, record i sits on line i + 2).
struct CsvTable {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> records;

  [[noreturn]] void error(std::size_t record, const std::string& what) const {
    fail(ErrorCode::kFormatError, name + " record " + std::to_string(record) + " (line " +
                                      std::to_string(record + 2) + "): " + what);
  }
};

inline CsvTable read_csv(const fs::path& path, const std::vector<std::string>& expected_prefix) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  CsvTable t;
  t.name = path.filename().string();
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kFormatError, t.name + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (auto f : split_fields(line)) t.header.emplace_back(f);
  if (t.header.size() < expected_prefix.size() ||
      !std::equal(expected_prefix.begin(), expected_prefix.end(), t.header.begin())) {
    fail(ErrorCode::kFormatError, t.name + ": unexpected header '" + line + "'");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      // Only a blank final line is tolerated.
      if (in.peek() == std::char_traits<char>::eof()) break;
      t.error(t.records.size(), "blank line");
    }
    std::vector<std::string> rec;
    for (auto f : split_fields(line)) rec.emplace_back(f);
    if (rec.size() != t.header.size()) {
      t.error(t.records.size(), "expected " + std::to_string(t.header.size()) + " fields, got " +
                                    std::to_string(rec.size()));
    }
    t.records.push_back(std::move(rec));
  }
  return t;
}

template <typename T>
T parse_number(const CsvTable& t, std::size_t record, const std::string& field, const char* what) {
  T value{};
  const char* b = field.data();
  const char* e = field.data() + field.size();
  const auto r = std::from_chars(b, e, value);
  if (field.empty() || r.ec != std::errc() || r.ptr != e) {
    t.error(record, std::string("invalid ") + what + " '" + field + "'");
  }
  return value;
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, path.filename().string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset directories.

inline void write_dataset(const DatasetBundle& b, const fs::path& dir,
                          FeatureFormat features = FeatureFormat::kCsv) {
  detail::ensure_dir(dir);
  const bool binary = features == FeatureFormat::kBinary;
  const nlohmann::json meta = {{"format", "pignn-dataset"},
                               {"version", kDatasetVersion},
                               {"feature_dim", b.meta.feature_dim},
                               {"num_classes", b.meta.num_classes},
                               {"num_snapshots", b.meta.num_snapshots},
                               {"num_nodes", b.nodes.size()},
                               {"num_events", b.events.size()},
                               {"features", binary ? "features.bin" : "features.csv"}};
  detail::write_text(dir / "meta.json", meta.dump(2) + "\n");

  std::string nodes = "id,arrival,label,split\n";
  for (const auto& n : b.nodes) {
    nodes += std::to_string(n.id) + "," + std::to_string(n.arrival) + "," + std::to_string(n.label) + "," +
             std::string(to_string(n.split)) + "\n";
  }
  detail::write_text(dir / "nodes.csv", nodes);

  if (binary) {
    std::string bytes(static_cast<std::size_t>(b.features.size()) * 8, '\0');
    for (Eigen::Index i = 0; i < b.features.size(); ++i) {
      auto bits = std::bit_cast<std::uint64_t>(b.features.data()[i]);
      for (int k = 0; k < 8; ++k) {
        bytes[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(k)] =
            static_cast<char>((bits >> (8 * k)) & 0xFF);
      }
    }
    detail::write_text(dir / "features.bin", bytes);
  } else {
    std::string feats = "id";
    for (int j = 0; j < b.meta.feature_dim; ++j) feats += ",f" + std::to_string(j);
    feats += "\n";
    for (Eigen::Index i = 0; i < b.features.rows(); ++i) {
      feats += std::to_string(i);
      for (Eigen::Index j = 0; j < b.features.cols(); ++j) feats += "," + detail::format_double(b.features(i, j));
      feats += "\n";
    }
    detail::write_text(dir / "features.csv", feats);
  }

  std::string events = "snapshot,op,u,v\n";
  for (const auto& e : b.events) {
    const bool edge = e.op == EventOp::kAddEdge || e.op == EventOp::kDelEdge;
    events += std::to_string(e.snapshot) + "," + std::string(to_string(e.op)) + "," + std::to_string(e.u) + "," +
              (edge ? std::to_string(e.v) : std::string()) + "\n";
  }
  detail::write_text(dir / "events.csv", events);
}

inline DatasetBundle read_bundle(const fs::path& dir) {
  const nlohmann::json meta = detail::read_json(dir / "meta.json");
  DatasetBundle b;
  std::size_t num_nodes = 0;
  std::size_t num_events = 0;
  std::string feature_file;
  try {
    if (meta.value("format", std::string()) != "pignn-dataset") {
      fail(ErrorCode::kFormatError, "meta.json: not a dataset descriptor");
    }
    b.meta.version = meta.at("version").get<int>();
    if (b.meta.version != kDatasetVersion) {
      fail(ErrorCode::kVersionMismatch, "dataset version " + std::to_string(b.meta.version) + ", expected " +
                                            std::to_string(kDatasetVersion));
    }
    b.meta.feature_dim = meta.at("feature_dim").get<int>();
    b.meta.num_classes = meta.at("num_classes").get<int>();
    b.meta.num_snapshots = meta.at("num_snapshots").get<int>();
    num_nodes = meta.at("num_nodes").get<std::size_t>();
    num_events = meta.at("num_events").get<std::size_t>();
    feature_file = meta.at("features").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, std::string("meta.json: ") + e.what());
  }
  const int d = b.meta.feature_dim;
  if (d < 1 || b.meta.num_classes < 1 || b.meta.num_snapshots < 1) {
    fail(ErrorCode::kFormatError, "meta.json: feature_dim, num_classes and num_snapshots must be >= 1");
  }

  const auto nodes = detail::read_csv(dir / "nodes.csv", {"id", "arrival", "label", "split"});
  if (nodes.records.size() != num_nodes) {
    fail(ErrorCode::kFormatError, "nodes.csv: truncated after record " + std::to_string(nodes.records.size()) +
                                      "; meta.json declares " + std::to_string(num_nodes) + " records");
  }
  for (std::size_t i = 0; i < nodes.records.size(); ++i) {
    const auto& r = nodes.records[i];
    NodeRow row;
    row.id = detail::parse_number<NodeId>(nodes, i, r[0], "id");
    if (row.id != i) nodes.error(i, "ids must be 0..N-1 in order");
    row.arrival = detail::parse_number<int>(nodes, i, r[1], "arrival");
    row.label = detail::parse_number<int>(nodes, i, r[2], "label");
    if (row.label < 0 || row.label >= b.meta.num_classes) nodes.error(i, "label out of range");
    const auto split = detail::parse_split(r[3]);
    if (!split) nodes.error(i, "invalid split '" + r[3] + "'");
    row.split = *split;
    b.nodes.push_back(row);
  }

  b.features = Matrix::Zero(static_cast<Eigen::Index>(num_nodes), d);
  if (feature_file == "features.bin") {
    std::ifstream in(dir / feature_file, std::ios::binary);
    if (!in) fail(ErrorCode::kIoError, "cannot read " + (dir / feature_file).string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t expect = num_nodes * static_cast<std::size_t>(d) * 8;
    if (bytes.size() != expect) {
      fail(ErrorCode::kFormatError, "features.bin: " + std::to_string(bytes.size()) + " bytes, expected " +
                                        std::to_string(expect) + " (record " + std::to_string(bytes.size() / 8 / static_cast<std::size_t>(d)) + " is incomplete or extra)");
    }
    for (std::size_t i = 0; i < num_nodes * static_cast<std::size_t>(d); ++i) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(k)])) << (8 * k);
      }
      b.features.data()[i] = std::bit_cast<double>(bits);
    }
  } else if (feature_file == "features.csv") {
    std::vector<std::string> header = {"id"};
    for (int j = 0; j < d; ++j) header.push_back("f" + std::to_string(j));
    const auto feats = detail::read_csv(dir / feature_file, header);
    if (feats.header.size() != header.size()) fail(ErrorCode::kFormatError, "features.csv: wrong column count");
    if (feats.records.size() != num_nodes) {
      fail(ErrorCode::kFormatError, "features.csv: truncated after record " + std::to_string(feats.records.size()) +
                                        "; meta.json declares " + std::to_string(num_nodes) + " records");
    }
    for (std::size_t i = 0; i < feats.records.size(); ++i) {
      const auto& r = feats.records[i];
      if (detail::parse_number<NodeId>(feats, i, r[0], "id") != i) feats.error(i, "ids must be 0..N-1 in order");
      for (int j = 0; j < d; ++j) {
        const double x = detail::parse_number<double>(feats, i, r[static_cast<std::size_t>(j) + 1], "feature");
        if (!std::isfinite(x)) feats.error(i, "non-finite feature");
        b.features(static_cast<Eigen::Index>(i), j) = x;
      }
    }
  } else {
    fail(ErrorCode::kFormatError, "meta.json: unknown feature file '" + feature_file + "'");
  }

  const auto events = detail::read_csv(dir / "events.csv", {"snapshot", "op", "u", "v"});
  if (events.records.size() != num_events) {
    fail(ErrorCode::kFormatError, "events.csv: truncated after record " + std::to_string(events.records.size()) +
                                      "; meta.json declares " + std::to_string(num_events) + " records");
  }
  for (std::size_t i = 0; i < events.records.size(); ++i) {
    const auto& r = events.records[i];
    Event e;
    e.snapshot = detail::parse_number<int>(events, i, r[0], "snapshot");
    const auto op = parse_event_op(r[1]);
    if (!op) events.error(i, "invalid op '" + r[1] + "'");
    e.op = *op;
    e.u = detail::parse_number<NodeId>(events, i, r[2], "node id");
    const bool edge = e.op == EventOp::kAddEdge || e.op == EventOp::kDelEdge;
    if (edge) {
      e.v = detail::parse_number<NodeId>(events, i, r[3], "node id");
    } else if (!r[3].empty()) {
      events.error(i, "node events take no second id");
    }
    b.events.push_back(e);
  }
  return b;
}

/// Reads a dataset directory and replays it.
inline DynamicGraph read_dataset(const fs::path& dir) {
  const DatasetBundle b = read_bundle(dir);
  try {
    return to_dynamic_graph(b);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormatError) throw;
    fail(ErrorCode::kFormatError, "events.csv: replay failed: " + std::string(e.what()));
  }
}

// ---------------------------------------------------------------------------
// Results.

/// T lines; line i holds a_i1..a_ii with six decimals, NA where undefined.
inline std::string matrix_csv(const AccuracyMatrix& m) {
  std::string out;
  for (int i = 1; i <= m.tasks(); ++i) {
    for (int j = 1; j <= i; ++j) {
      if (j > 1) out += ",";
      const auto a = m.at(i, j);
      out += a ? detail::format_fixed6(*a) : "NA";
    }
    out += "\n";
  }
  return out;
}

inline AccuracyMatrix read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  AccuracyMatrix m(static_cast<int>(lines.size()));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = detail::split_fields(lines[i]);
    if (fields.size() != i + 1) {
      fail(ErrorCode::kFormatError, "matrix.csv row " + std::to_string(i + 1) + ": expected " +
                                        std::to_string(i + 1) + " values");
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (fields[j] == "NA") continue;
      double x = 0.0;
      const auto r = std::from_chars(fields[j].data(), fields[j].data() + fields[j].size(), x);
      if (r.ec != std::errc() || r.ptr != fields[j].data() + fields[j].size()) {
        fail(ErrorCode::kFormatError, "matrix.csv row " + std::to_string(i + 1) + ": bad value");
      }
      m.set(static_cast<int>(i) + 1, static_cast<int>(j) + 1, x);
    }
  }
  return m;
}

inline nlohmann::json optional_number(std::optional<double> x) {
  if (!x || !std::isfinite(*x)) return nullptr;
  return *x;
}

inline nlohmann::json bound_terms_json(const BoundTerms& b) {
  return {{"lhs", b.lhs},
          {"changed_term", b.changed_term},
          {"half_stable", b.half_stable},
          {"half_new", b.half_new},
          {"rhs", b.rhs()},
          {"gap", b.gap()},
          {"preconditions_met", b.preconditions_met},
          {"equality_residual", b.equality_residual}};
}

inline BoundTerms bound_terms_from_json(const nlohmann::json& j) {
  BoundTerms b;
  b.lhs = j.at("lhs").get<double>();
  b.changed_term = j.at("changed_term").get<double>();
  b.half_stable = j.at("half_stable").get<double>();
  b.half_new = j.at("half_new").get<double>();
  b.preconditions_met = j.at("preconditions_met").get<double>();
  b.equality_residual = j.at("equality_residual").get<double>();
  return b;
}

inline nlohmann::json summary_json(const RunResult& run, std::uint64_t seed) {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& r : run.records) {
    snaps.push_back({{"t", r.t},
                     {"num_unstable", r.num_unstable},
                     {"num_stable", r.num_stable},
                     {"num_changed", r.num_changed},
                     {"num_deleted", r.num_deleted},
                     {"skipped", r.skipped},
                     {"beta_used", r.beta_used},
                     {"rectify_loss", r.rectify_loss},
                     {"isolate_loss", r.isolate_loss},
                     {"bound", bound_terms_json(r.bound)},
                     {"memory", r.memory},
                     {"stable_memory", r.stable_memory},
                     {"deletion_ratio", r.deletion_ratio},
                     {"distill_recommended", r.distill_recommended},
                     {"seconds_rectify", r.seconds_rectify},
                     {"seconds_isolate", r.seconds_isolate},
                     {"width", r.width}});
  }
  return {{"method", run.method},
          {"seed", seed},
          {"T", run.accuracy.tasks()},
          {"pm", optional_number(pm(run.accuracy))},
          {"fm", optional_number(fm(run.accuracy))},
          {"initial_loss", run.initial_loss},
          {"seconds_initial", run.seconds_initial},
          {"widths", run.widths},
          {"snapshots", std::move(snaps)},
          {"distill_memory",
           {{"source_snapshot", run.distill_memory.source_snapshot},
            {"k", run.distill_memory.k},
            {"nodes", run.distill_memory.center_nodes}}},
          {"distill_changed", run.distill_changed}};
}

inline nlohmann::json bound_report_json(const BoundReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    auto j = bound_terms_json(r.terms);
    j["t"] = r.t;
    j["recorded_lhs"] = r.recorded_lhs;
    j["asserted"] = r.asserted;
    j["ok"] = r.ok;
    rows.push_back(std::move(j));
  }
  return {{"holds", rep.holds}, {"tolerance", kBoundTolerance}, {"snapshots", std::move(rows)}};
}

/// Where a run's dataset lives, stored relative to the run directory when
/// possible.
inline std::string data_reference(const fs::path& run_dir, const fs::path& data_dir) {
  std::error_code ec;
  const auto rel = fs::relative(fs::absolute(data_dir), fs::absolute(run_dir), ec);
  return ec || rel.empty() ? fs::absolute(data_dir).string() : rel.generic_string();
}

/// Writes one seed's results:
///   matrix.csv, summary.json, model.json, config.resolved.json,
///   checkpoints/rectified_t<t>.json, checkpoints/isolated_t<t>.json and,
///   when `bound` is given, bound_report.json.
inline void write_run(const RunResult& run, const fs::path& dir, std::uint64_t seed, const CliConfig& resolved,
                      const fs::path& data_dir, const BoundReport* bound = nullptr) {
  detail::ensure_dir(dir);
  detail::write_text(dir / "matrix.csv", matrix_csv(run.accuracy));
  auto summary = summary_json(run, seed);
  summary["data"] = data_reference(dir, data_dir);
  detail::write_text(dir / "summary.json", summary.dump(2) + "\n");
  detail::write_text(dir / "config.resolved.json", to_json(resolved).dump(2) + "\n");
  save_model(run.model, dir / "model.json");
  if (!run.rectified.empty() || !run.isolated.empty()) {
    detail::ensure_dir(dir / "checkpoints");
    for (std::size_t i = 0; i < run.rectified.size(); ++i) {
      save_model(run.rectified[i], dir / "checkpoints" / ("rectified_t" + std::to_string(i + 2) + ".json"));
    }
    for (std::size_t i = 0; i < run.isolated.size(); ++i) {
      save_model(run.isolated[i], dir / "checkpoints" / ("isolated_t" + std::to_string(i + 2) + ".json"));
    }
  }
  if (bound) detail::write_text(dir / "bound_report.json", bound_report_json(*bound).dump(2) + "\n");
}

struct LoadedRun {
  RunResult run;
  CliConfig config;
  std::uint64_t seed = 0;
  fs::path data_dir;  // resolved against the run directory
};

/// Reads what write_run produced. Missing checkpoints leave the checkpoint
/// lists empty; verify_theorem then reports MissingCheckpoints.
inline LoadedRun read_run(const fs::path& dir) {
  LoadedRun out;
  out.config = cli_config_from_json(detail::read_json(dir / "config.resolved.json"));
  const nlohmann::json s = detail::read_json(dir / "summary.json");
  RunResult& run = out.run;
  run.config = out.config.train;
  run.accuracy = read_matrix_csv(dir / "matrix.csv");
  try {
    run.method = s.at("method").get<std::string>();
    out.seed = s.at("seed").get<std::uint64_t>();
    run.initial_loss = s.at("initial_loss").get<double>();
    run.seconds_initial = s.at("seconds_initial").get<double>();
    run.widths = s.at("widths").get<std::vector<int>>();
    for (const auto& j : s.at("snapshots")) {
      SnapshotRecord r;
      r.t = j.at("t").get<int>();
      r.num_unstable = j.at("num_unstable").get<std::size_t>();
      r.num_stable = j.at("num_stable").get<std::size_t>();
      r.num_changed = j.at("num_changed").get<std::size_t>();
      r.num_deleted = j.at("num_deleted").get<std::size_t>();
      r.skipped = j.at("skipped").get<bool>();
      r.beta_used = j.at("beta_used").get<double>();
      r.rectify_loss = j.at("rectify_loss").get<double>();
      r.isolate_loss = j.at("isolate_loss").get<double>();
      r.bound = bound_terms_from_json(j.at("bound"));
      r.memory = j.at("memory").get<NodeList>();
      r.stable_memory = j.at("stable_memory").get<NodeList>();
      r.deletion_ratio = j.at("deletion_ratio").get<double>();
      r.distill_recommended = j.at("distill_recommended").get<bool>();
      r.seconds_rectify = j.at("seconds_rectify").get<double>();
      r.seconds_isolate = j.at("seconds_isolate").get<double>();
      r.width = j.at("width").get<int>();
      run.records.push_back(std::move(r));
    }
    const auto& dm = s.at("distill_memory");
    run.distill_memory.source_snapshot = dm.at("source_snapshot").get<int>();
    run.distill_memory.k = dm.at("k").get<int>();
    run.distill_memory.center_nodes = dm.at("nodes").get<NodeList>();
    run.distill_changed = s.at("distill_changed").get<NodeList>();
    const fs::path data = s.at("data").get<std::string>();
    out.data_dir = data.is_absolute() ? data : dir / data;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, std::string("summary.json: ") + e.what());
  }
  run.model = load_model(dir / "model.json");
  const int T = run.accuracy.tasks();
  for (int t = 2; t <= T; ++t) {
    const auto rect = dir / "checkpoints" / ("rectified_t" + std::to_string(t) + ".json");
    const auto iso = dir / "checkpoints" / ("isolated_t" + std::to_string(t) + ".json");
    if (fs::exists(rect)) run.rectified.push_back(load_model(rect));
    if (fs::exists(iso)) run.isolated.push_back(load_model(iso));
  }
  return out;
}

/// Seed directories (seed_<n>) under `dir`, in ascending seed order; `dir`
/// itself if it holds a single run.
inline std::vector<fs::path> run_directories(const fs::path& dir) {
  if (fs::exists(dir / "summary.json")) return {dir};
  std::vector<std::pair<std::uint64_t, fs::path>> found;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("seed_", 0) != 0) continue;
    if (!fs::exists(entry.path() / "summary.json")) continue;
    std::uint64_t seed = 0;
    const auto r = std::from_chars(name.data() + 5, name.data() + name.size(), seed);
    if (r.ec != std::errc() || r.ptr != name.data() + name.size()) continue;
    found.emplace_back(seed, entry.path());
  }
  if (ec) fail(ErrorCode::kIoError, "cannot list " + dir.string());
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [s, p] : found) out.push_back(std::move(p));
  return out;
}

struct MeanStd {
  std::optional<double> mean;
  std::optional<double> std;  // sample standard deviation; empty below two values
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  r.mean = mean;
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

struct SeedResult {
  std::string method;
  std::uint64_t seed = 0;
  double pm = 0.0;
  std::optional<double> fm;
};

/// One row per method: method,num_seeds,pm_mean,pm_std,fm_mean,fm_std.
inline std::string aggregate_csv(const std::vector<SeedResult>& results) {
  std::vector<std::string> methods;
  for (const auto& r : results) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  auto cell = [](std::optional<double> x) { return x ? detail::format_fixed6(*x) : std::string("NA"); };
  std::string out = "method,num_seeds,pm_mean,pm_std,fm_mean,fm_std\n";
  for (const auto& m : methods) {
    std::vector<double> pms;
    std::vector<double> fms;
    for (const auto& r : results) {
      if (r.method != m) continue;
      pms.push_back(r.pm);
      if (r.fm) fms.push_back(*r.fm);
    }
    const auto p = mean_std(pms);
    const auto f = mean_std(fms);
    out += m + "," + std::to_string(pms.size()) + "," + cell(p.mean) + "," + cell(p.std) + "," + cell(f.mean) + "," +
           cell(f.std) + "\n";
  }
  return out;
}

/// Recomputes aggregate.csv from every seed directory below `dir`.
inline std::vector<SeedResult> write_aggregate(const fs::path& dir) {
  std::vector<SeedResult> results;
  for (const auto& run_dir : run_directories(dir)) {
    const nlohmann::json s = detail::read_json(run_dir / "summary.json");
    const AccuracyMatrix m = read_matrix_csv(run_dir / "matrix.csv");
    results.push_back({s.at("method").get<std::string>(), s.at("seed").get<std::uint64_t>(), pm(m), fm(m)});
  }
  detail::write_text(dir / "aggregate.csv", aggregate_csv(results));
  return results;
}

/// Header node,task,label,b<block>_u<unit>...; one row per node.
inline std::string activations_csv(const ActivationDump& dump, const std::vector<int>& tasks,
                                   const std::vector<int>& labels) {
  std::string out = "node,task,label";
  for (std::size_t b = 0; b < dump.block_widths.size(); ++b) {
    for (int u = 0; u < dump.block_widths[b]; ++u) out += ",b" + std::to_string(b) + "_u" + std::to_string(u);
  }
  out += "\n";
  for (Eigen::Index i = 0; i < dump.values.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out += std::to_string(dump.nodes[k]) + "," + std::to_string(tasks[k]) + "," + std::to_string(labels[k]);
    for (Eigen::Index j = 0; j < dump.values.cols(); ++j) out += "," + detail::format_double(dump.values(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace pignn

#endif  // PIGNN_IO_HPP_
