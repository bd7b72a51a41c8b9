// Copyright 2026 The StageFormer Authors. All Rights Reserved.
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

// stageformer: data generation, training, evaluation, prediction, gradient
// checking and timing from the command line. Every subcommand prints a JSON
// document on success; failures print {"error": {...}} to stderr and exit
// nonzero.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stageformer/checkpoint.hpp"
#include "stageformer/config.hpp"
#include "stageformer/data_gen.hpp"
#include "stageformer/dataset_io.hpp"
#include "stageformer/error.hpp"
#include "stageformer/evaluate.hpp"
#include "stageformer/model_gradcheck.hpp"
#include "stageformer/trainer.hpp"

namespace sf = stageformer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code(sf::ErrorKind kind) {
  switch (kind) {
    case sf::ErrorKind::kConfig: return 2;
    case sf::ErrorKind::kData: return 3;
    case sf::ErrorKind::kIo: return 4;
    case sf::ErrorKind::kDivergence: return 5;
    case sf::ErrorKind::kShape: return 6;
    case sf::ErrorKind::kNonFinite: return 7;
  }
  return 1;
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump()
            << std::endl;
  return code;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sf::IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_json(const std::string& path, const json& j) {
  sf::write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<sf::DecodeMode> resolve_modes(const std::string& decode, const sf::TrainConfig& cfg) {
  if (decode.empty()) return {cfg.decode};
  if (decode == "all") return sf::available_modes(cfg.heads());
  return {sf::parse_decode_mode(decode)};
}

// --- gen-data -----------------------------------------------------------------

struct GenArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_gen_data(const GenArgs& a) {
  sf::GenSpec spec = a.spec.empty() ? sf::GenSpec::human() : sf::load_gen_spec(a.spec);
  if (a.seed) spec.seed = *a.seed;
  spec.validate();
  ensure_dir(a.out);
  const sf::DatasetSplits splits = sf::split_dataset(sf::generate(spec), spec.seed);
  sf::write_dataset((fs::path(a.out) / "train.jsonl").string(), splits.train);
  sf::write_dataset((fs::path(a.out) / "val.jsonl").string(), splits.val);
  sf::write_dataset((fs::path(a.out) / "test.jsonl").string(), splits.test);
  write_json((fs::path(a.out) / "gen_spec.json").string(), sf::to_json(spec));
  std::cout << json{{"out", a.out},
                    {"train", splits.train.size()},
                    {"val", splits.val.size()},
                    {"test", splits.test.size()}}
                   .dump()
            << std::endl;
  return 0;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string train, val, out, ablation, decode;
  std::optional<std::size_t> epochs, warmup, batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  sf::TrainConfig cfg;
  if (!a.config.empty()) cfg = sf::train_config_from_json(sf::read_json_file(a.config));
  sf::apply_env_overrides(cfg);
  if (!a.train.empty()) cfg.paths.train = a.train;
  if (!a.val.empty()) cfg.paths.val = a.val;
  if (!a.out.empty()) cfg.paths.out_dir = a.out;
  if (!a.ablation.empty()) sf::apply_ablation(cfg, a.ablation);
  if (!a.decode.empty()) cfg.decode = sf::parse_decode_mode(a.decode);
  if (a.epochs) cfg.optim.total_epochs = *a.epochs;
  if (a.warmup) cfg.optim.warmup_epochs = *a.warmup;
  if (a.batch_size) cfg.optim.batch_size = *a.batch_size;
  if (a.lr) cfg.optim.peak_lr = *a.lr;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  if (cfg.paths.train.empty()) throw sf::ConfigError("train: no training set (paths.train or --train)");

  const auto train_set = sf::read_dataset(cfg.paths.train);
  const auto val_set =
      cfg.paths.val.empty() ? std::vector<sf::StageSequence>{} : sf::read_dataset(cfg.paths.val);
  ensure_dir(cfg.paths.out_dir);

  sf::TrainOptions options;
  if (!a.quiet) {
    options.on_epoch = [](const sf::EpochReport& r) {
      std::cerr << sf::to_json(r).dump() << std::endl;
    };
  }
  const sf::TrainResult result = sf::train(cfg, train_set, val_set, options);
  const fs::path out(cfg.paths.out_dir);
  sf::save_checkpoint((out / "best.ckpt").string(), result.best);
  sf::save_checkpoint((out / "last.ckpt").string(), result.last);
  write_json((out / "train_report.json").string(), sf::train_report_json(result));
  json summary{{"out_dir", cfg.paths.out_dir},
               {"epochs", result.epochs.size()},
               {"best_epoch", result.best_epoch},
               {"final_loss", result.epochs.back().loss}};
  summary["best_val_accuracy"] =
      val_set.empty() ? json(nullptr) : json(result.best_val);
  std::cout << summary.dump() << std::endl;
  return 0;
}

// --- eval / predict -------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, decode, report, predictions;
};

int run_eval(const EvalArgs& a) {
  const sf::Checkpoint ckpt = sf::load_checkpoint(a.checkpoint);
  const sf::Model model = sf::restore_model(ckpt);
  const auto data = sf::read_dataset(a.data);
  const auto modes = resolve_modes(a.decode, ckpt.config);
  const sf::EvalResult result = sf::evaluate(model, ckpt.config.heads(), data, modes);
  const json report = sf::eval_report_json(result);
  if (!a.report.empty()) write_json(a.report, report);
  if (!a.predictions.empty()) sf::write_predictions_csv(a.predictions, result);
  std::cout << report.dump() << std::endl;
  return 0;
}

int run_predict(const EvalArgs& a) {
  const sf::Checkpoint ckpt = sf::load_checkpoint(a.checkpoint);
  const sf::Model model = sf::restore_model(ckpt);
  const auto data = sf::read_dataset(a.data);
  if (data.empty()) throw sf::DataError("predict: dataset " + a.data + " is empty");
  const sf::EvalResult result =
      sf::predict(model, ckpt.config.heads(), data, resolve_modes(a.decode, ckpt.config));
  if (a.predictions.empty()) {
    sf::write_predictions_csv(std::cout, result);
  } else {
    sf::write_predictions_csv(a.predictions, result);
    std::cout << json{{"sequences", result.sequences.size()}, {"out", a.predictions}}.dump()
              << std::endl;
  }
  return 0;
}

// --- gradcheck ------------------------------------------------------------------

struct GradArgs {
  double tol = 1e-4;
  double eps = 1e-5;
  std::uint64_t seed = 3;
  bool verbose = false;
};

int run_gradcheck(const GradArgs& a) {
  sf::ModelGradCheckOptions options;
  options.check.tol = a.tol;
  options.check.eps = a.eps;
  options.seed = a.seed;
  const sf::ModelGradCheckReport r = sf::check_model_gradients(options);
  json groups = json::array();
  for (const auto& g : r.groups) {
    if (!a.verbose && g.report.passed) continue;
    groups.push_back({{"name", g.name},
                      {"max_rel_error", g.report.max_rel_error},
                      {"max_abs_error", g.report.max_abs_error},
                      {"checked", g.report.checked},
                      {"passed", g.report.passed}});
  }
  std::cout << json{{"passed", r.passed},
                    {"tol", a.tol},
                    {"max_rel_error", r.max_rel_error},
                    {"worst_group", r.worst_group},
                    {"parameter_groups", r.groups.size()},
                    {"checked", r.checked},
                    {"seconds", r.seconds},
                    {"groups", groups}}
                   .dump(a.verbose ? 2 : -1)
            << std::endl;
  return r.passed ? 0 : 1;
}

// --- bench ----------------------------------------------------------------------

struct BenchArgs {
  std::string checkpoint, data, decode;
  std::size_t sequences = 20;
  std::uint64_t seed = 1;
};

int run_bench(const BenchArgs& a) {
  sf::TrainConfig cfg;
  cfg.seed = a.seed;
  std::optional<sf::Model> model;
  if (!a.checkpoint.empty()) {
    const sf::Checkpoint ckpt = sf::load_checkpoint(a.checkpoint);
    cfg = ckpt.config;
    model = sf::restore_model(ckpt);
  } else {
    model = sf::Model::create(cfg.model, a.seed);
  }
  std::vector<sf::StageSequence> data;
  if (!a.data.empty()) {
    data = sf::read_dataset(a.data);
  } else {
    sf::GenSpec spec = sf::GenSpec::human();
    spec.num_sequences = a.sequences;
    spec.num_stages = cfg.model.num_stages;
    spec.input_dim = cfg.model.input_dim;
    spec.seed = a.seed;
    data = sf::generate(spec);
  }
  if (data.empty()) throw sf::DataError("bench: no sequences to time");
  const auto modes = resolve_modes(a.decode, cfg);
  const sf::EvalResult result = sf::predict(*model, cfg.heads(), data, modes);
  std::vector<double> ms;
  double frames = 0.0;
  for (const auto& s : result.sequences) ms.push_back(1e3 * s.seconds);
  for (const auto& s : data) frames += static_cast<double>(s.length());
  std::sort(ms.begin(), ms.end());
  double total = 0.0;
  for (double v : ms) total += v;
  std::cout << json{{"sequences", ms.size()},
                    {"mean_frames", frames / static_cast<double>(ms.size())},
                    {"parameters", model->num_parameters()},
                    {"decode", modes.size() == 1 ? sf::to_string(modes.front()) : "multiple"},
                    {"mean_ms_per_sequence", total / static_cast<double>(ms.size())},
                    {"median_ms_per_sequence", ms[ms.size() / 2]},
                    {"max_ms_per_sequence", ms.back()}}
                   .dump()
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StageFormer: monotone stage classification of time-lapse sequences"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset split into train/val/test");
  gen_cmd->add_option("--spec", gen.spec, "Generator spec JSON (defaults when omitted)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Override the spec seed");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", tr.config, "Training config JSON");
  train_cmd->add_option("--train", tr.train, "Training set (JSONL)");
  train_cmd->add_option("--val", tr.val, "Validation set (JSONL)");
  train_cmd->add_option("--out", tr.out, "Output directory for checkpoints and reports");
  train_cmd->add_option("--ablation", tr.ablation, "Head preset: cls, seg, cls+seg or all");
  train_cmd->add_option("--decode", tr.decode, "Decode mode used for model selection");
  train_cmd->add_option("--epochs", tr.epochs, "Total epochs");
  train_cmd->add_option("--warmup", tr.warmup, "Warm-up epochs");
  train_cmd->add_option("--batch-size", tr.batch_size, "Sequences per update");
  train_cmd->add_option("--lr", tr.lr, "Peak learning rate");
  train_cmd->add_option("--seed", tr.seed, "Seed (overrides config and STAGEFORMER_SEED)");
  train_cmd->add_flag("--quiet", tr.quiet, "Suppress per-epoch progress on stderr");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labelled dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset (JSONL)")->required();
  eval_cmd->add_option("--decode", ev.decode, "Decode mode or \"all\" (default: from config)");
  eval_cmd->add_option("--report", ev.report, "Also write the metrics report here");
  eval_cmd->add_option("--predictions", ev.predictions, "Write the per-frame CSV here");

  EvalArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Write per-frame predictions as CSV");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--data", pr.data, "Dataset (JSONL); labels optional")->required();
  predict_cmd->add_option("--decode", pr.decode, "Decode mode or \"all\" (default: from config)");
  predict_cmd->add_option("--out", pr.predictions, "CSV path (default: stdout)");

  GradArgs gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  grad_cmd->add_option("--tol", gc.tol, "Max relative error per parameter group");
  grad_cmd->add_option("--eps", gc.eps, "Central-difference step");
  grad_cmd->add_option("--seed", gc.seed, "Model and input seed");
  grad_cmd->add_flag("--verbose", gc.verbose, "List every parameter group");

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Time per-sequence prediction");
  bench_cmd->add_option("--checkpoint", bn.checkpoint, "Checkpoint (default: untrained model)");
  bench_cmd->add_option("--data", bn.data, "Dataset (default: generated)");
  bench_cmd->add_option("--decode", bn.decode, "Decode mode or \"all\"");
  bench_cmd->add_option("--sequences", bn.sequences, "Generated sequences when --data is absent");
  bench_cmd->add_option("--seed", bn.seed, "Seed for the untrained model and generated data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 64);
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev);
    if (*predict_cmd) return run_predict(pr);
    if (*grad_cmd) return run_gradcheck(gc);
    if (*bench_cmd) return run_bench(bn);
  } catch (const sf::Error& e) {
    return report_error(sf::to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 1;
}
