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

// pignn: generate streams, train, distill, evaluate, verify and dump
// activations. Exit status 0 on success, 1 on usage or input errors, 2 when
// a verification fails.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pignn/pignn.hpp"

namespace fs = std::filesystem;
using namespace pignn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;

std::string fmt6(std::optional<double> x) { return x ? detail::format_fixed6(*x) : "NA"; }

CliConfig load_or_default(const std::string& path) {
  return path.empty() ? CliConfig{} : load_cli_config(path);
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string features = "csv";
};

int cmd_generate(const GenerateArgs& a) {
  CliConfig cfg = load_or_default(a.config);
  if (a.seed) cfg.generate.seed = *a.seed;
  const DatasetBundle bundle = generate_stream(cfg.generate);
  write_dataset(bundle, a.out, a.features == "bin" ? FeatureFormat::kBinary : FeatureFormat::kCsv);
  std::printf("wrote %zu nodes, %zu events, %d snapshots to %s\n", bundle.nodes.size(), bundle.events.size(),
              bundle.meta.num_snapshots, a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string method;
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  bool no_checkpoints = false;
};

RunResult run_method(const std::string& method, const DynamicGraph& data, const TrainConfig& cfg) {
  if (method == "pi-gnn") return continual_run(data, cfg);
  BaselineMethod b;
  if (method == "retrain") b.kind = BaselineKind::kRetrain;
  if (method == "pretrain") b.kind = BaselineKind::kPretrain;
  if (method == "online") b.kind = BaselineKind::kOnline;
  return run_baseline(b, data, cfg);
}

int cmd_train(const TrainArgs& a) {
  CliConfig cfg = load_or_default(a.config);
  if (!a.method.empty()) cfg.method = a.method;
  check_method(cfg.method);
  if (!a.seeds.empty()) cfg.seeds = a.seeds;
  const DynamicGraph data = read_dataset(a.data);
  const fs::path out = a.out;
  int status = kExitOk;
  for (const std::uint64_t seed : cfg.seeds) {
    CliConfig resolved = cfg;
    resolved.seeds = {seed};
    resolved.train.seed = seed;
    RunResult run = run_method(cfg.method, data, resolved.train);
    std::optional<BoundReport> bound;
    if (cfg.method == "pi-gnn") {
      bound = verify_theorem(run, data);
      if (!bound->holds) status = kExitVerify;
    }
    if (a.no_checkpoints) {
      run.rectified.clear();
      run.isolated.clear();
    }
    const fs::path dir = out / ("seed_" + std::to_string(seed));
    write_run(run, dir, seed, resolved, a.data, bound ? &*bound : nullptr);
    std::printf("%s seed %llu: PM %s FM %s -> %s\n", cfg.method.c_str(), static_cast<unsigned long long>(seed),
                fmt6(pm(run.accuracy)).c_str(), fmt6(fm(run.accuracy)).c_str(), dir.string().c_str());
  }
  write_aggregate(out);
  if (status == kExitVerify) std::fprintf(stderr, "bound check failed on a snapshot with all preconditions met\n");
  return status;
}

// ---------------------------------------------------------------------------

struct DistillArgs {
  std::string run;
  int hidden = 32;
  std::optional<int> epochs;
};

std::vector<std::optional<double>> final_row(const ExpandableGNN& m, const DynamicGraph& data,
                                             const TrainConfig& cfg) {
  std::vector<std::optional<double>> out;
  const int T = data.num_snapshots();
  for (int i = 1; i <= T; ++i) out.push_back(task_accuracy(m, data, T, i, cfg));
  return out;
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& xs) {
  double sum = 0.0;
  int n = 0;
  for (const auto& x : xs) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

int cmd_distill(const DistillArgs& a) {
  std::printf("%-10s %8s %8s %10s %10s\n", "run", "teacher", "student", "teacher_acc", "student_acc");
  for (const auto& dir : run_directories(a.run)) {
    const LoadedRun lr = read_run(dir);
    const DynamicGraph data = read_dataset(lr.data_dir);
    const int epochs = a.epochs.value_or(lr.config.train.epochs_distill);
    double loss = 0.0;
    const ExpandableGNN student = distill_run(lr.run, data, a.hidden, epochs, &loss);
    const auto teacher_row = final_row(lr.run.model, data, lr.run.config);
    const auto student_row = final_row(student, data, lr.run.config);
    save_model(student, dir / "student.json");
    nlohmann::json rows_t = nlohmann::json::array();
    nlohmann::json rows_s = nlohmann::json::array();
    for (std::size_t i = 0; i < teacher_row.size(); ++i) {
      rows_t.push_back(optional_number(teacher_row[i]));
      rows_s.push_back(optional_number(student_row[i]));
    }
    const nlohmann::json report = {{"student_hidden", a.hidden},
                                   {"epochs", epochs},
                                   {"final_loss", loss},
                                   {"teacher_parameters", lr.run.model.parameter_count()},
                                   {"student_parameters", student.parameter_count()},
                                   {"teacher_final_accuracy", rows_t},
                                   {"student_final_accuracy", rows_s},
                                   {"teacher_mean", optional_number(mean_defined(teacher_row))},
                                   {"student_mean", optional_number(mean_defined(student_row))}};
    detail::write_text(dir / "distill.json", report.dump(2) + "\n");
    std::printf("%-10s %8zu %8zu %10s %10s\n", dir.filename().string().c_str(), lr.run.model.parameter_count(),
                student.parameter_count(), fmt6(mean_defined(teacher_row)).c_str(),
                fmt6(mean_defined(student_row)).c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_eval(const std::string& run) {
  const auto dirs = run_directories(run);
  if (dirs.empty()) fail(ErrorCode::kIoError, "no runs found under " + run);
  std::vector<SeedResult> results;
  std::printf("%-10s %-10s %6s %10s %10s\n", "run", "method", "seed", "PM", "FM");
  for (const auto& dir : dirs) {
    const nlohmann::json s = detail::read_json(dir / "summary.json");
    const AccuracyMatrix m = read_matrix_csv(dir / "matrix.csv");
    SeedResult r{s.at("method").get<std::string>(), s.at("seed").get<std::uint64_t>(), pm(m), fm(m)};
    std::printf("%-10s %-10s %6llu %10s %10s\n", dir.filename().string().c_str(), r.method.c_str(),
                static_cast<unsigned long long>(r.seed), fmt6(r.pm).c_str(), fmt6(r.fm).c_str());
    results.push_back(std::move(r));
  }
  std::printf("\n%s", aggregate_csv(results).c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string suite;
  std::string run;
  std::uint64_t seed = 0;
  std::optional<int> cases;
};

constexpr double kGradTolerance = 1e-4;

int verify_lemma_suite(const VerifyArgs& a) {
  const auto n = static_cast<std::size_t>(a.cases.value_or(10000));
  const LemmaSuite s = lemma_suite(n, a.seed);
  std::printf("pairs %zu (drawn %zu), violations %zu, min slack %.6e\n", s.pairs, s.attempts, s.violations,
              s.min_slack);
  std::printf("z1 == z2: max |rhs - lhs| %.6e (tied logits: %.6e)\n", s.max_equal_case_gap,
              s.max_equal_case_gap_tied);
  return s.inequality_holds() ? kExitOk : kExitVerify;
}

int verify_gradcheck_suite(const VerifyArgs& a) {
  const GradCheckSuite s = gradcheck_suite(a.cases.value_or(20), a.seed);
  for (const auto& c : s.cases) {
    std::printf("%-44s rectify %.3e  isolate %.3e\n", c.description.c_str(), c.rectify.max_rel_error,
                c.isolate.max_rel_error);
  }
  std::printf("max relative error %.3e (tolerance %.0e), frozen blocks %s\n", s.max_rel_error, kGradTolerance,
              s.frozen_clean ? "clean" : "received gradients");
  return s.passed(kGradTolerance) ? kExitOk : kExitVerify;
}

int verify_decompose_suite(const VerifyArgs& a) {
  const DecomposeSuite s = decompose_suite(static_cast<std::size_t>(a.cases.value_or(1000)), a.seed);
  std::printf("random cases %zu, mismatches %zu%s\n", s.cases, s.mismatches,
              s.mismatches ? (" (first: " + s.first_mismatch + ")").c_str() : "");
  bool ok = s.mismatches == 0;
  if (!a.run.empty()) {
    for (const auto& dir : run_directories(a.run)) {
      const LoadedRun lr = read_run(dir);
      const DynamicGraph data = read_dataset(lr.data_dir);
      for (int t = 2; t <= data.num_snapshots(); ++t) {
        const bool same = decompose(data.at(t - 1), data.delta_into(t), lr.config.train.k) ==
                          decompose_reference(data.at(t - 1), data.delta_into(t), lr.config.train.k);
        std::printf("%s t=%d %s\n", dir.filename().string().c_str(), t, same ? "match" : "MISMATCH");
        ok = ok && same;
      }
    }
  }
  return ok ? kExitOk : kExitVerify;
}

int verify_theorem_suite(const VerifyArgs& a) {
  if (a.run.empty()) fail(ErrorCode::kConfigInvalid, "--suite theorem needs --run");
  bool ok = true;
  for (const auto& dir : run_directories(a.run)) {
    const LoadedRun lr = read_run(dir);
    const DynamicGraph data = read_dataset(lr.data_dir);
    const BoundReport rep = verify_theorem(lr.run, data);
    detail::write_text(dir / "bound_report.json", bound_report_json(rep).dump(2) + "\n");
    std::printf("%s\n  %3s %14s %14s %12s %8s %12s %s\n", dir.filename().string().c_str(), "t", "lhs", "rhs", "gap",
                "precond", "residual", "status");
    for (const auto& r : rep.rows) {
      const bool drift = std::abs(r.terms.lhs - r.recorded_lhs) > kBoundTolerance;
      std::printf("  %3d %14.6f %14.6f %12.6f %8.4f %12.6f %s%s\n", r.t, r.terms.lhs, r.terms.rhs(), r.terms.gap(),
                  r.terms.preconditions_met, r.terms.equality_residual,
                  r.asserted ? (r.ok ? "ok" : "VIOLATED") : "not asserted", drift ? " (lhs drift)" : "");
      ok = ok && r.ok && !drift;
    }
  }
  return ok ? kExitOk : kExitVerify;
}

int cmd_verify(const VerifyArgs& a) {
  if (a.suite == "lemma") return verify_lemma_suite(a);
  if (a.suite == "gradcheck") return verify_gradcheck_suite(a);
  if (a.suite == "decompose") return verify_decompose_suite(a);
  return verify_theorem_suite(a);
}

// ---------------------------------------------------------------------------

struct ActivationArgs {
  std::string run;
  int layer = 1;
  std::vector<int> tasks;
  std::string split = "test";
  std::string out;
};

int cmd_activations(const ActivationArgs& a) {
  const auto dirs = run_directories(a.run);
  if (dirs.empty()) fail(ErrorCode::kIoError, "no runs found under " + a.run);
  const fs::path dir = dirs.front();
  const LoadedRun lr = read_run(dir);
  const DynamicGraph data = read_dataset(lr.data_dir);
  const int T = data.num_snapshots();
  const Split split = *detail::parse_split(a.split);
  std::vector<int> tasks = a.tasks;
  if (tasks.empty()) {
    for (int t = 1; t <= T; ++t) tasks.push_back(t);
  }
  NodeList nodes;
  std::vector<int> node_tasks;
  for (int task : tasks) {
    if (task < 1 || task > T) fail(ErrorCode::kConfigInvalid, "task " + std::to_string(task) + " out of range");
    for (NodeId v : data.task_nodes(task, split, T)) {
      nodes.push_back(v);
      node_tasks.push_back(task);
    }
  }
  const Snapshot& s = data.at(T);
  const ActivationDump dump = dump_activations(lr.run.model, s, nodes, a.layer, lr.run.config.eval_options());
  std::vector<int> labels;
  for (NodeId v : nodes) labels.push_back(s.labels[v]);
  const fs::path out = a.out.empty() ? dir / "activations.csv" : fs::path(a.out);
  detail::write_text(out, activations_csv(dump, node_tasks, labels));

  std::printf("%-6s %6s", "task", "nodes");
  for (std::size_t b = 0; b < dump.block_widths.size(); ++b) std::printf(" %12s", ("block" + std::to_string(b)).c_str());
  std::printf("\n");
  for (int task : tasks) {
    ActivationDump part = dump;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (node_tasks[i] == task) rows.push_back(static_cast<Eigen::Index>(i));
    }
    part.values = detail::gather_rows(dump.values, rows);
    std::printf("%-6d %6zu", task, rows.size());
    for (std::size_t b = 0; b < dump.block_widths.size(); ++b) std::printf(" %12.6f", part.block_mass(static_cast<int>(b)));
    std::printf("\n");
  }
  std::printf("wrote %s\n", out.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual learning on dynamic graph snapshots", "pignn"};
  app.set_help_flag();
  app.set_help_all_flag("-h,--help", "Print this help (all subcommands and flags) and exit");
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic class-incremental stream");
  generate->add_option("--config", gen.config, "JSON config; its \"generate\" section is used");
  generate->add_option("--out", gen.out, "Output dataset directory")->required();
  generate->add_option("--seed", gen.seed, "Override generate.seed");
  generate->add_option("--features", gen.features, "Feature file format")->check(CLI::IsMember({"csv", "bin"}));

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Run a method over a dataset, one run per seed");
  train->add_option("--data", tr.data, "Dataset directory")->required();
  train->add_option("--method", tr.method, "Method (overrides the config)")
      ->check(CLI::IsMember(method_names()));
  train->add_option("--config", tr.config, "JSON config; \"train\", \"method\" and \"seeds\" are used");
  train->add_option("--out", tr.out, "Run directory; seed_<n>/ is created per seed")->required();
  train->add_option("--seeds", tr.seeds, "Comma-separated training seeds (overrides the config)")->delimiter(',');
  train->add_flag("--no-checkpoints", tr.no_checkpoints, "Skip per-snapshot checkpoints (theorem verify needs them)");

  DistillArgs dist;
  auto* distill = app.add_subcommand("distill", "Distil each seed's final model into a fresh single block");
  distill->add_option("--run", dist.run, "Run directory")->required();
  distill->add_option("--hidden", dist.hidden, "Student hidden width")->check(CLI::PositiveNumber);
  distill->add_option("--epochs", dist.epochs, "Distillation epochs (default: train.epochs_distill)")
      ->check(CLI::NonNegativeNumber);

  std::string eval_run;
  auto* eval = app.add_subcommand("eval", "Print the PM/FM table of a run directory");
  eval->add_option("--run", eval_run, "Run directory")->required();

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("--suite", ver.suite, "Suite to run")
      ->required()
      ->check(CLI::IsMember({"lemma", "theorem", "gradcheck", "decompose"}));
  verify->add_option("--run", ver.run, "Run directory (theorem: required; decompose: also checks its stream)");
  verify->add_option("--seed", ver.seed, "Seed of the random suites");
  verify->add_option("--cases", ver.cases, "Number of random cases (lemma 10000, gradcheck 20, decompose 1000)")
      ->check(CLI::PositiveNumber);

  ActivationArgs act;
  auto* activations = app.add_subcommand("activations", "Dump hidden activations of the final model");
  activations->add_option("--run", act.run, "Run directory (the first seed is used)")->required();
  activations->add_option("--layer", act.layer, "Layer, 1-based")->check(CLI::PositiveNumber);
  activations->add_option("--tasks", act.tasks, "Comma-separated 1-based tasks (default: all)")->delimiter(',');
  activations->add_option("--split", act.split, "Node split")->check(CLI::IsMember({"train", "val", "test"}));
  activations->add_option("--out", act.out, "Output CSV (default: <run>/activations.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
    return kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*train) return cmd_train(tr);
    if (*distill) return cmd_distill(dist);
    if (*eval) return cmd_eval(eval_run);
    if (*verify) return cmd_verify(ver);
    if (*activations) return cmd_activations(act);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::kMissingCheckpoints ? kExitVerify : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
