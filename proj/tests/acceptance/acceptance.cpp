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

// Acceptance harness: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles/brute_force_monotone.hpp"
#include "oracles/naive_deform_attn.hpp"
#include "stageformer/autodiff/tensor.hpp"
#include "stageformer/checkpoint.hpp"
#include "stageformer/config.hpp"
#include "stageformer/data_gen.hpp"
#include "stageformer/deform_attn.hpp"
#include "stageformer/error.hpp"
#include "stageformer/evaluate.hpp"
#include "stageformer/heads.hpp"
#include "stageformer/losses.hpp"
#include "stageformer/model_gradcheck.hpp"
#include "stageformer/monotonic_decode.hpp"
#include "stageformer/schedule.hpp"
#include "stageformer/trainer.hpp"

namespace ad = stageformer::ad;
namespace nn = stageformer::nn;
namespace sf = stageformer;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

void fill_normal(ad::Tensor t, double stddev, nn::Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  for (double& v : t.mutable_data()) v = n(rng);
}

ad::Tensor uniform_matrix(std::size_t r, std::size_t c, nn::Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return ad::Tensor::matrix(r, c, v);
}

// --- 1 ---------------------------------------------------------------------

Outcome gradient_integrity() {
  const auto start = Clock::now();
  const sf::ModelGradCheckReport r = sf::check_model_gradients();
  const double secs = seconds_since(start);
  const bool ok = r.passed && r.max_rel_error <= 1e-4 && secs <= 120.0;
  return {ok, std::to_string(r.groups.size()) + " parameter groups, " +
                  std::to_string(r.checked) + " values, max rel error " +
                  fmt(r.max_rel_error, 3) + " (" + r.worst_group + "), " + fmt(secs, 3) + " s"};
}

// --- 2 ---------------------------------------------------------------------

Outcome deform_attn_oracle() {
  nn::Rng rng(2024);
  const std::size_t instances = 200;
  double worst = 0.0;
  for (std::size_t trial = 0; trial < instances; ++trial) {
    std::uniform_int_distribution<std::size_t> pick(0, 1000);
    const std::size_t heads = std::vector<std::size_t>{1, 2, 4}[pick(rng) % 3];
    const std::size_t dim = heads * (1 + pick(rng) % 3);
    const sf::DeformAttnConfig c{dim, heads, 1 + pick(rng) % 3, 1 + pick(rng) % 4};
    sf::DeformAttnParams p = sf::DeformAttnParams::create(c, rng);
    fill_normal(p.offset_pred.weight, 1.5, rng);
    fill_normal(p.offset_pred.bias, 1.5, rng);
    fill_normal(p.weight_pred.weight, 1.0, rng);
    fill_normal(p.weight_pred.bias, 1.0, rng);
    fill_normal(p.value_proj.bias, 0.5, rng);
    fill_normal(p.output_proj.bias, 0.5, rng);

    sf::FeaturePyramid pyr;
    std::size_t len = 2 + pick(rng) % 12;
    for (std::size_t l = 0; l < c.levels; ++l) {
      pyr.levels.push_back(uniform_matrix(len, dim, rng));
      len = (len + 1) / 2;
    }
    const std::size_t nq = 1 + pick(rng) % 6;
    const ad::Tensor q = uniform_matrix(nq, dim, rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> refs(nq);
    for (double& r : refs) r = u(rng);

    const ad::Tensor got = sf::ms_deform_attn(q, ad::Tensor::vector(refs), pyr, p);
    std::vector<oracle::Matrix> levels;
    for (const auto& l : pyr.levels) levels.push_back(oracle::to_matrix(l));
    const oracle::Matrix want = oracle::ms_deform_attn(oracle::to_matrix(q), refs, levels, p);
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        worst = std::max(worst, std::fabs(got.at(i, j) - want[i][j]));
  }
  return {worst <= 1e-10, std::to_string(instances) + " random instances, max abs diff " +
                              fmt(worst, 3)};
}

// --- 3 ---------------------------------------------------------------------

Outcome monotone_by_construction() {
  nn::Rng rng(3033);
  const std::size_t settings = 1000;
  std::size_t violations = 0, decoded = 0;
  std::uniform_int_distribution<std::size_t> pick(0, 1000);
  std::uniform_real_distribution<double> scale(0.1, 1.0);
  for (std::size_t trial = 0; trial < settings; ++trial) {
    const std::size_t d = std::vector<std::size_t>{4, 8, 16}[pick(rng) % 3];
    const std::size_t stages = 2 + pick(rng) % 7;
    sf::SegmentationHead head = sf::SegmentationHead::create(d, rng);
    nn::ParameterList params;
    head.collect("seg", params);
    const double s = scale(rng);
    for (auto& p : params) fill_normal(p.tensor, s, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> f(stages * d);
    for (double& v : f) v = n(rng);
    const sf::SegmentPrediction seg =
        sf::segmentation_head(ad::Tensor::matrix(stages, d, f), head);

    double total = 0.0;
    bool ok = true;
    for (double w : seg.widths.data()) {
      ok = ok && w > 0.0 && std::isfinite(w);
      total += w;
    }
    ok = ok && std::fabs(total - 1.0) <= 1e-9;
    for (std::size_t c = 1; c < stages; ++c) ok = ok && seg.centers.at(c) > seg.centers.at(c - 1);
    for (std::size_t t : {std::size_t{1}, 1 + pick(rng) % 300}) {
      ok = ok && sf::is_monotone(sf::decode_from_segments(seg, t).labels);
      ++decoded;
    }
    violations += ok ? 0 : 1;
  }
  return {violations == 0, std::to_string(settings) + " parameter settings, " +
                               std::to_string(decoded) + " decodes, " +
                               std::to_string(violations) + " violations"};
}

// --- 4 ---------------------------------------------------------------------

Outcome dp_oracle() {
  std::mt19937_64 rng(4044);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_int_distribution<int> coarse(-3, 0);
  const std::size_t instances = 1000;
  std::size_t mismatches = 0, enumerated = 0;
  for (std::size_t trial = 0; trial < instances; ++trial) {
    const std::size_t t = 1 + trial % 8;
    const int c = 1 + static_cast<int>((trial / 8) % 4);
    std::vector<double> lp(t * static_cast<std::size_t>(c));
    // Every other instance uses integer scores, which produce many ties.
    for (double& v : lp) v = trial % 2 ? n(rng) : coarse(rng);
    const sf::MonotoneLabeling dp = sf::dp_monotonic(lp, static_cast<std::size_t>(c));
    const oracle::BruteForceResult bf = oracle::best_monotone(lp, t, c);
    enumerated += bf.enumerated;
    const bool optimal =
        std::find(bf.argmax.begin(), bf.argmax.end(), dp.labels) != bf.argmax.end();
    const bool score_ok = std::fabs(dp.score - bf.best_score) <= 1e-12;
    if (!optimal || !score_ok || !sf::is_monotone(dp.labels)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(instances) + " instances (T<=8, C<=4), " +
                               std::to_string(enumerated) + " labelings enumerated, " +
                               std::to_string(mismatches) + " mismatches"};
}

// --- 5 ---------------------------------------------------------------------

Outcome segment_round_trip() {
  std::mt19937_64 rng(5055);
  const std::size_t cases = 5000;
  std::size_t failures = 0;
  for (std::size_t trial = 0; trial < cases; ++trial) {
    const std::size_t t = 1 + rng() % 400;
    const int c = 1 + static_cast<int>(rng() % 10);
    std::uniform_int_distribution<int> stage(0, c - 1);
    std::vector<int> labels(t);
    for (int& v : labels) v = stage(rng);
    std::sort(labels.begin(), labels.end());
    const sf::SegmentTargets target = sf::segment_targets(labels, static_cast<std::size_t>(c));
    if (sf::decode_from_segments(target.widths, t).labels != labels) ++failures;
  }
  return {failures == 0, std::to_string(cases) + " random monotone label sequences, " +
                             std::to_string(failures) + " mismatches"};
}

// --- shared benchmark ------------------------------------------------------

struct Benchmark {
  std::vector<sf::StageSequence> train;
  std::vector<sf::StageSequence> val;
  std::vector<sf::StageSequence> test;
};

// Default generator settings, with enough sequences that the training
// split holds 200.
Benchmark make_benchmark() {
  sf::GenSpec spec = sf::GenSpec::human();
  spec.num_sequences = 300;
  sf::DatasetSplits splits = sf::split_dataset(sf::generate(spec), spec.seed);
  if (splits.train.size() < 200) throw sf::DataError("benchmark: fewer than 200 train sequences");
  splits.train.resize(200);
  return {std::move(splits.train), std::move(splits.val), std::move(splits.test)};
}

struct Run {
  sf::TrainResult result;
  sf::TrainConfig config;
  double test_accuracy = 0.0;
  double seconds = 0.0;
};

Run train_preset(const Benchmark& b, const std::string& preset, std::uint64_t seed) {
  Run run;
  sf::apply_ablation(run.config, preset);
  run.config.seed = seed;
  const auto start = Clock::now();
  run.result = sf::train(run.config, b.train, b.val);
  run.seconds = seconds_since(start);
  run.test_accuracy =
      sf::evaluate(run.result.model, run.config.heads(), b.test, {run.config.decode})
          .metrics[0]
          .global_accuracy;
  std::cerr << "  trained " << preset << " seed " << seed << ": test accuracy "
            << fmt(run.test_accuracy) << ", best epoch " << run.result.best_epoch << ", "
            << fmt(run.seconds, 4) << " s\n";
  return run;
}

// --- 6 ---------------------------------------------------------------------

Outcome end_to_end(const Run& run, const Benchmark& b) {
  const std::size_t epochs = run.config.optim.total_epochs;
  const bool ok = run.test_accuracy >= 0.95 && epochs <= 60 && run.seconds <= 900.0;
  return {ok, "all heads, " + std::to_string(b.train.size()) + " train / " +
                  std::to_string(b.test.size()) + " test sequences, " + std::to_string(epochs) +
                  " epochs: test global accuracy " + fmt(run.test_accuracy) + " in " +
                  fmt(run.seconds, 4) + " s"};
}

// --- 7 ---------------------------------------------------------------------

Outcome ablation_direction(const Benchmark& b, const Run& all_seed1) {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double all_sum = 0.0, cls_sum = 0.0;
  std::ostringstream detail;
  detail << std::setprecision(6);
  for (std::uint64_t s : seeds) {
    const double all = s == 1 ? all_seed1.test_accuracy : train_preset(b, "all", s).test_accuracy;
    const double cls = train_preset(b, "cls", s).test_accuracy;
    all_sum += all;
    cls_sum += cls;
    detail << "seed " << s << " all " << all << " cls " << cls << "; ";
  }
  const double all_mean = all_sum / seeds.size(), cls_mean = cls_sum / seeds.size();
  detail << "mean all " << all_mean << " vs cls " << cls_mean;
  return {all_mean >= cls_mean, detail.str()};
}

// --- 8 ---------------------------------------------------------------------

bool same_bits(const ad::Tensor& a, const ad::Tensor& b) {
  return a.numel() == b.numel() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

Outcome determinism(const Benchmark& b, const Run& trained) {
  sf::TrainConfig config;
  config.optim.total_epochs = 4;
  config.optim.warmup_epochs = 1;
  config.seed = 99;
  const std::vector<sf::StageSequence> train(b.train.begin(), b.train.begin() + 40);
  const sf::TrainResult r1 = sf::train(config, train, b.val);
  const sf::TrainResult r2 = sf::train(config, train, b.val);
  bool runs_equal = sf::serialize_checkpoint(r1.last) == sf::serialize_checkpoint(r2.last) &&
                    sf::serialize_checkpoint(r1.best) == sf::serialize_checkpoint(r2.best);
  for (std::size_t e = 0; e < r1.epochs.size(); ++e) {
    runs_equal = runs_equal && r1.epochs[e].loss == r2.epochs[e].loss &&
                 r1.epochs[e].val_accuracy == r2.epochs[e].val_accuracy;
  }

  const auto dir = std::filesystem::temp_directory_path() / "stageformer_acceptance";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "best.ckpt").string();
  sf::save_checkpoint(path, trained.result.best);
  const sf::Checkpoint loaded = sf::load_checkpoint(path);
  const bool bytes_equal =
      sf::serialize_checkpoint(loaded) == sf::serialize_checkpoint(trained.result.best);
  const sf::Model restored = sf::restore_model(loaded);
  const sf::HeadSet heads = trained.config.heads();
  const auto modes = sf::available_modes(heads);
  const sf::EvalResult before = sf::evaluate(trained.result.model, heads, b.test, modes);
  const sf::EvalResult after = sf::evaluate(restored, heads, b.test, modes);
  bool eval_equal = true;
  for (std::size_t i = 0; i < before.sequences.size(); ++i) {
    eval_equal = eval_equal && before.sequences[i].predictions == after.sequences[i].predictions;
  }
  for (std::size_t k = 0; k < modes.size(); ++k) {
    eval_equal = eval_equal &&
                 before.metrics[k].global_accuracy == after.metrics[k].global_accuracy &&
                 before.metrics[k].per_class_precision == after.metrics[k].per_class_precision &&
                 before.metrics[k].per_class_recall == after.metrics[k].per_class_recall;
  }
  {
    ad::NoGradGuard no_grad;
    for (const auto& seq : b.test) {
      const auto x = sf::forward(trained.result.model, seq.feature_tensor(), heads);
      const auto y = sf::forward(restored, seq.feature_tensor(), heads);
      eval_equal = eval_equal && same_bits(x.cls->probs, y.cls->probs) &&
                   same_bits(x.col->probs, y.col->probs) &&
                   same_bits(x.seg->widths, y.seg->widths);
    }
  }
  std::filesystem::remove_all(dir);
  const bool ok = runs_equal && bytes_equal && eval_equal;
  return {ok, std::string("repeat training ") + (runs_equal ? "identical" : "differs") +
                  ", checkpoint bytes " + (bytes_equal ? "identical" : "differ") +
                  ", restored evaluation " + (eval_equal ? "bit-exact" : "differs")};
}

// --- 9 ---------------------------------------------------------------------

Outcome schedule_values() {
  const double peak = 1e-3;
  const sf::Schedule s{peak, 20, 250};
  const double mid = sf::lr_at(10, s), end_warm = sf::lr_at(20, s), last = sf::lr_at(250, s);
  const double quarter = sf::lr_at(20 + 230 / 2, s);
  const bool ok = mid == peak / 2 && end_warm == peak && std::fabs(last) <= 1e-12 &&
                  std::fabs(quarter - peak / 2) <= 1e-15 && sf::lr_at(0, s) == 0.0;
  return {ok, "warmup midpoint " + fmt(mid, 17) + ", warmup end " + fmt(end_warm, 17) +
                  ", cosine midpoint " + fmt(quarter, 17) + ", final " + fmt(last, 17)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StageFormer acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  auto enabled = [&](int n) { return only.empty() || std::count(only.begin(), only.end(), n); };

  const std::vector<std::string> names{
      "",
      "gradient integrity",
      "deformable attention oracle",
      "monotonicity by construction",
      "dynamic programming oracle",
      "segment round trip",
      "end-to-end learning",
      "ablation direction",
      "determinism and checkpoint fidelity",
      "schedule correctness",
  };
  int failures = 0;
  auto report = [&](int n, const std::function<Outcome()>& fn) {
    if (!enabled(n)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << n << " (" << names[n] << "): " << (o.pass ? "PASS" : "FAIL")
              << " - " << o.detail << std::endl;
  };

  report(1, gradient_integrity);
  report(2, deform_attn_oracle);
  report(3, monotone_by_construction);
  report(4, dp_oracle);
  report(5, segment_round_trip);
  report(9, schedule_values);

  if (enabled(6) || enabled(7) || enabled(8)) {
    std::optional<Benchmark> bench;
    std::optional<Run> all_seed1;
    auto setup = [&]() -> const Run& {
      if (!bench) bench = make_benchmark();
      if (!all_seed1) all_seed1 = train_preset(*bench, "all", 1);
      return *all_seed1;
    };
    report(6, [&] { return end_to_end(setup(), *bench); });
    report(7, [&] { return ablation_direction(*bench, setup()); });
    report(8, [&] { return determinism(*bench, setup()); });
  }
  return failures == 0 ? 0 : 1;
}
