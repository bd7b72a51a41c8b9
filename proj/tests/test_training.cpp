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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "stageformer/checkpoint.hpp"
#include "stageformer/config.hpp"
#include "stageformer/data_gen.hpp"
#include "stageformer/error.hpp"
#include "stageformer/evaluate.hpp"
#include "stageformer/monotonic_decode.hpp"
#include "stageformer/optimizer.hpp"
#include "stageformer/schedule.hpp"
#include "stageformer/trainer.hpp"

namespace ad = stageformer::ad;
using stageformer::DecodeMode;
using stageformer::Schedule;
using stageformer::StageSequence;
using stageformer::TrainConfig;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.input_dim = 6;
  c.model.embed_dim = 8;
  c.model.ffn_dim = 8;
  c.model.heads = 2;
  c.model.points = 2;
  c.model.num_stages = 3;
  c.optim.total_epochs = 3;
  c.optim.warmup_epochs = 1;
  c.optim.batch_size = 3;
  c.optim.peak_lr = 5e-3;
  c.seed = 11;
  return c;
}

std::vector<StageSequence> tiny_data(std::size_t n, std::uint64_t seed) {
  stageformer::GenSpec spec;
  spec.num_sequences = n;
  spec.t_min = 10;
  spec.t_max = 16;
  spec.num_stages = 3;
  spec.input_dim = 6;
  spec.seed = seed;
  return stageformer::generate(spec);
}

std::vector<std::vector<double>> grads_of(const stageformer::Model& model) {
  std::vector<std::vector<double>> out;
  for (const auto& p : model.parameters()) {
    out.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
  }
  return out;
}

void zero_grads(const stageformer::Model& model) {
  for (auto p : model.parameters()) p.tensor.zero_grad();
}

}  // namespace

TEST(Schedule, KeyValues) {
  const Schedule s{1e-3, 20, 120};
  EXPECT_DOUBLE_EQ(stageformer::lr_at(10, s), 5e-4);
  EXPECT_DOUBLE_EQ(stageformer::lr_at(20, s), 1e-3);
  EXPECT_NEAR(stageformer::lr_at(21, s), 1e-3, 1e-6);
  EXPECT_NEAR(stageformer::lr_at(70, s), 5e-4, 1e-15);
  EXPECT_NEAR(stageformer::lr_at(120, s), 0.0, 1e-12);
  EXPECT_EQ(stageformer::lr_at(500, s), 0.0);
  EXPECT_EQ(stageformer::lr_at(0, s), 0.0);
  for (std::size_t k = 21; k <= 120; ++k) {
    EXPECT_LE(stageformer::lr_at(k, s), stageformer::lr_at(k - 1, s));
  }
  EXPECT_DOUBLE_EQ(stageformer::lr_at(0, Schedule{2e-3, 0, 10}), 2e-3);
  EXPECT_THROW(stageformer::lr_at(1, Schedule{1e-3, 10, 10}), stageformer::ConfigError);
}

TEST(Adam, FirstStepMatchesClosedForm) {
  ad::Tensor w = ad::Tensor::vector({0.5, -2.0});
  stageformer::Adam adam({{"w", w}}, stageformer::AdamConfig{});
  EXPECT_TRUE(w.requires_grad());
  w.mutable_grad()[0] = 3.0;
  w.mutable_grad()[1] = -0.25;
  adam.step(0.01);
  const double eps = 1e-8, wd = 1e-4;
  EXPECT_NEAR(w.at(0), 0.5 - 0.01 * (3.0 / (3.0 + eps) + wd * 0.5), 1e-15);
  EXPECT_NEAR(w.at(1), -2.0 - 0.01 * (-0.25 / (0.25 + eps) + wd * -2.0), 1e-15);
  EXPECT_EQ(adam.steps(), 1u);
  adam.zero_grad();
  EXPECT_EQ(w.grad()[0], 0.0);
}

TEST(Adam, MinimizesQuadratic) {
  ad::Tensor w = ad::Tensor::vector({3.0, -4.0, 0.5});
  stageformer::AdamConfig cfg;
  cfg.weight_decay = 0.0;
  stageformer::Adam adam({{"w", w}}, cfg);
  for (int i = 0; i < 2000; ++i) {
    adam.zero_grad();
    for (std::size_t k = 0; k < 3; ++k) w.mutable_grad()[k] = 2.0 * (w.at(k) - 1.0);
    adam.step(0.01);
  }
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(w.at(k), 1.0, 1e-3);
}

TEST(Adam, DecoupledDecayShrinksWithZeroGradient) {
  ad::Tensor w = ad::Tensor::vector({2.0});
  stageformer::AdamConfig cfg;
  cfg.weight_decay = 0.1;
  stageformer::Adam adam({{"w", w}}, cfg);
  adam.step(0.5);
  EXPECT_DOUBLE_EQ(w.at(0), 2.0 - 0.5 * 0.1 * 2.0);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  TrainConfig c = tiny_config();
  c.loss.seg = false;
  c.loss.col = false;
  c.decode = DecodeMode::kClsArgmax;
  c.paths.train = "a.jsonl";
  c.model.offset_init = stageformer::OffsetInit::kGrid;
  const auto j = stageformer::to_json(c);
  EXPECT_EQ(stageformer::to_json(stageformer::train_config_from_json(j)), j);
  EXPECT_EQ(j["model"]["offset_init"], "grid");

  auto bad = j;
  bad["model"]["embed_dimm"] = 3;
  EXPECT_THROW(stageformer::train_config_from_json(bad), stageformer::ConfigError);
  bad = j;
  bad["extra"] = 1;
  EXPECT_THROW(stageformer::train_config_from_json(bad), stageformer::ConfigError);
  bad = j;
  bad["optim"]["batch_size"] = "eight";
  EXPECT_THROW(stageformer::train_config_from_json(bad), stageformer::ConfigError);
  bad = j;
  bad["optim"]["warmup_epochs"] = 3;
  EXPECT_THROW(stageformer::train_config_from_json(bad), stageformer::ConfigError);
  bad = j;
  bad["model"]["offset_init"] = "uniform";
  EXPECT_THROW(stageformer::train_config_from_json(bad), stageformer::ConfigError);
  bad = j;
  bad["decode"] = "collab-argmax";
  EXPECT_THROW(stageformer::train_config_from_json(bad), stageformer::ConfigError);
  const auto partial = stageformer::train_config_from_json(nlohmann::json{{"seed", 9}});
  EXPECT_EQ(partial.seed, 9u);
  EXPECT_EQ(partial.model.embed_dim, 64u);
}

TEST(Config, EnvSeedOverride) {
  TrainConfig c;
  ::setenv("STAGEFORMER_SEED", "1234", 1);
  stageformer::apply_env_overrides(c);
  EXPECT_EQ(c.seed, 1234u);
  ::setenv("STAGEFORMER_SEED", "12x", 1);
  EXPECT_THROW(stageformer::apply_env_overrides(c), stageformer::ConfigError);
  ::unsetenv("STAGEFORMER_SEED");
  c.seed = 5;
  stageformer::apply_env_overrides(c);
  EXPECT_EQ(c.seed, 5u);
}

TEST(Config, AblationPresetsAndDecodeModes) {
  for (const auto& [preset, mode] : std::vector<std::pair<std::string, DecodeMode>>{
           {"cls", DecodeMode::kClsArgmax},
           {"seg", DecodeMode::kSegments},
           {"cls+seg", DecodeMode::kSegments},
           {"all", DecodeMode::kCollabArgmax}}) {
    TrainConfig c;
    stageformer::apply_ablation(c, preset);
    EXPECT_EQ(c.decode, mode) << preset;
    EXPECT_NO_THROW(c.validate()) << preset;
  }
  TrainConfig c;
  EXPECT_THROW(stageformer::apply_ablation(c, "col"), stageformer::ConfigError);
  for (DecodeMode m : stageformer::all_decode_modes()) {
    EXPECT_EQ(stageformer::parse_decode_mode(stageformer::to_string(m)), m);
  }
  EXPECT_THROW(stageformer::parse_decode_mode("viterbi"), stageformer::ConfigError);
  EXPECT_THROW(stageformer::check_decode_mode(DecodeMode::kCollabDp, {true, true, false}),
               stageformer::ConfigError);
  EXPECT_THROW(stageformer::check_decode_mode(DecodeMode::kClsArgmax, {false, true, true}),
               stageformer::ConfigError);
  EXPECT_NO_THROW(stageformer::check_decode_mode(DecodeMode::kSegments, {false, true, false}));
}

TEST(Training, BatchGradientIsMeanOfSequenceGradients) {
  const TrainConfig c = tiny_config();
  const auto model = stageformer::Model::create(c.model, 4);
  stageformer::Adam adam(model.parameters(), c.optim.adam);
  const auto data = tiny_data(3, 21);
  std::vector<std::vector<double>> expected;
  for (const auto& seq : data) {
    zero_grads(model);
    stageformer::accumulate_batch_gradients(model, c, {&seq});
    const auto g = grads_of(model);
    if (expected.empty()) expected.assign(g.size(), {});
    for (std::size_t k = 0; k < g.size(); ++k) {
      expected[k].resize(g[k].size(), 0.0);
      for (std::size_t i = 0; i < g[k].size(); ++i) expected[k][i] += g[k][i] / 3.0;
    }
  }
  zero_grads(model);
  stageformer::accumulate_batch_gradients(model, c, {&data[0], &data[1], &data[2]});
  const auto batch = grads_of(model);
  for (std::size_t k = 0; k < batch.size(); ++k)
    for (std::size_t i = 0; i < batch[k].size(); ++i)
      EXPECT_NEAR(batch[k][i], expected[k][i], 1e-12);
}

TEST(Training, FixedSeedIsBitIdentical) {
  const TrainConfig c = tiny_config();
  const auto data = tiny_data(10, 3);
  const auto val = tiny_data(3, 4);
  const auto a = stageformer::train(c, data, val);
  const auto b = stageformer::train(c, data, val);
  EXPECT_EQ(stageformer::serialize_checkpoint(a.last), stageformer::serialize_checkpoint(b.last));
  EXPECT_EQ(stageformer::serialize_checkpoint(a.best), stageformer::serialize_checkpoint(b.best));
  ASSERT_EQ(a.epochs.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(a.epochs[e].loss, b.epochs[e].loss);
  auto other = c;
  other.seed = 12;
  EXPECT_NE(stageformer::serialize_checkpoint(stageformer::train(other, data, val).last),
            stageformer::serialize_checkpoint(a.last));
}

TEST(Training, LossDecreasesAndBestIsTracked) {
  TrainConfig c = tiny_config();
  c.optim.total_epochs = 12;
  c.optim.warmup_epochs = 2;
  c.optim.peak_lr = 1e-2;
  const auto data = tiny_data(12, 5);
  const auto val = tiny_data(4, 6);
  const auto r = stageformer::train(c, data, val);
  EXPECT_LT(r.epochs.back().loss, r.epochs.front().loss);
  double best = -1.0;
  for (const auto& e : r.epochs) best = std::max(best, e.val_accuracy);
  EXPECT_EQ(r.best_val, best);
  EXPECT_EQ(r.epochs[r.best_epoch - 1].val_accuracy, best);
  EXPECT_EQ(r.best.epoch, r.best_epoch);
  const auto eval = stageformer::evaluate(r.model, c.heads(), val, {c.decode});
  EXPECT_EQ(eval.metrics[0].global_accuracy, best);
}

TEST(Training, DivergenceReportsEpochAndStep) {
  TrainConfig c = tiny_config();
  c.optim.peak_lr = 1e150;
  c.optim.warmup_epochs = 0;
  try {
    stageformer::train(c, tiny_data(6, 7), {});
    FAIL() << "expected DivergenceError";
  } catch (const stageformer::DivergenceError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("epoch"), std::string::npos) << what;
    EXPECT_NE(what.find("step"), std::string::npos) << what;
  }
}

TEST(Training, RejectsMismatchedData) {
  TrainConfig c = tiny_config();
  auto data = tiny_data(3, 8);
  data[1].labels.clear();
  EXPECT_THROW(stageformer::train(c, data, {}), stageformer::DataError);
  EXPECT_THROW(stageformer::train(c, {}, {}), stageformer::DataError);
  c.model.num_stages = 4;
  EXPECT_THROW(stageformer::train(c, tiny_data(3, 8), {}), stageformer::DataError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdenticalAndEvalIsBitExact) {
  TrainConfig c = tiny_config();
  c.optim.total_epochs = 2;
  const auto data = tiny_data(6, 9);
  const auto r = stageformer::train(c, data, {});
  const std::string bytes = stageformer::serialize_checkpoint(r.last);
  EXPECT_EQ(bytes.compare(0, 8, "STGFCKPT"), 0);
  const auto back = stageformer::deserialize_checkpoint(bytes);
  EXPECT_EQ(stageformer::serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.optimizer_steps, r.last.optimizer_steps);
  EXPECT_EQ(back.rng_state, r.last.rng_state);

  const auto dir = std::filesystem::temp_directory_path() / "stageformer_test_ckpt";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "c.ckpt").string();
  stageformer::save_checkpoint(path, r.last);
  const auto loaded = stageformer::load_checkpoint(path);
  EXPECT_EQ(stageformer::serialize_checkpoint(loaded), bytes);

  const auto modes = stageformer::available_modes(c.heads());
  const auto before = stageformer::predict(r.model, c.heads(), data, modes);
  const auto restored = stageformer::restore_model(loaded);
  const auto after = stageformer::predict(restored, c.heads(), data, modes);
  std::ostringstream csv_before, csv_after;
  stageformer::write_predictions_csv(csv_before, before);
  stageformer::write_predictions_csv(csv_after, after);
  EXPECT_EQ(csv_before.str(), csv_after.str());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = stageformer::forward(r.model, data[i].feature_tensor(), c.heads());
    const auto y = stageformer::forward(restored, data[i].feature_tensor(), c.heads());
    for (std::size_t k = 0; k < x.col->probs.numel(); ++k)
      EXPECT_EQ(x.col->probs.at(k), y.col->probs.at(k));
  }

  stageformer::Adam adam(restored.parameters(), c.optim.adam);
  stageformer::restore_optimizer(loaded, adam);
  EXPECT_EQ(adam.steps(), loaded.optimizer_steps);
  EXPECT_EQ(stageformer::serialize_checkpoint([&] {
              auto k = stageformer::make_checkpoint(loaded.config, restored, &adam);
              k.epoch = loaded.epoch;
              k.rng_state = loaded.rng_state;
              k.best_val = loaded.best_val;
              k.best_epoch = loaded.best_epoch;
              return k;
            }()),
            bytes);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruptInput) {
  TrainConfig c = tiny_config();
  const auto model = stageformer::Model::create(c.model, 1);
  const std::string bytes =
      stageformer::serialize_checkpoint(stageformer::make_checkpoint(c, model, nullptr));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(stageformer::deserialize_checkpoint(bad_magic), stageformer::IoError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(stageformer::deserialize_checkpoint(bad_version), stageformer::IoError);
  EXPECT_THROW(stageformer::deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)),
               stageformer::IoError);
  EXPECT_THROW(stageformer::deserialize_checkpoint(bytes + "x"), stageformer::IoError);
  EXPECT_THROW(stageformer::load_checkpoint("/nonexistent/x.ckpt"), stageformer::IoError);
}

TEST(Evaluate, ModesBatchingAndErrors) {
  TrainConfig c = tiny_config();
  c.optim.total_epochs = 2;
  const auto data = tiny_data(5, 10);
  const auto r = stageformer::train(c, data, {});
  const auto modes = stageformer::available_modes(c.heads());
  EXPECT_EQ(modes.size(), 4u);
  const auto all = stageformer::evaluate(r.model, c.heads(), data, modes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto single = stageformer::evaluate(r.model, c.heads(), {data[i]}, modes);
    EXPECT_EQ(single.sequences[0].predictions, all.sequences[i].predictions);
  }
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (modes[k] != DecodeMode::kSegments && modes[k] != DecodeMode::kCollabDp) continue;
    for (const auto& s : all.sequences) EXPECT_TRUE(stageformer::is_monotone(s.predictions[k]));
  }
  EXPECT_THROW(stageformer::evaluate(r.model, c.heads(), {}, modes), stageformer::DataError);
  auto unlabelled = data;
  unlabelled[0].labels.clear();
  EXPECT_THROW(stageformer::evaluate(r.model, c.heads(), unlabelled, modes),
               stageformer::DataError);
  EXPECT_NO_THROW(stageformer::predict(r.model, c.heads(), unlabelled, modes));
  EXPECT_THROW(stageformer::predict(r.model, {true, false, false}, data,
                                    {DecodeMode::kCollabArgmax}),
               stageformer::ConfigError);
}

TEST(Training, NoiseFreeSeparableReachesHighValidationAccuracy) {
  stageformer::GenSpec spec;
  spec.num_sequences = 60;
  spec.t_min = 30;
  spec.t_max = 50;
  spec.noise_std = 0.0;
  spec.transition_blend_frames = 0;
  const auto splits = stageformer::split_dataset(stageformer::generate(spec), spec.seed);
  TrainConfig c;
  c.optim.total_epochs = 30;
  c.optim.warmup_epochs = 3;
  const auto r = stageformer::train(c, splits.train, splits.val);
  EXPECT_GE(r.best_val, 0.99);
}
