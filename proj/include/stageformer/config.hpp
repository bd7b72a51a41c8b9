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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "stageformer/data_gen.hpp"
#include "stageformer/losses.hpp"
#include "stageformer/model.hpp"
#include "stageformer/optimizer.hpp"

namespace stageformer {

// How frame labels are read off the model outputs.
enum class DecodeMode {
  kCollabArgmax,  // per-frame argmax of the collaboration output
  kSegments,      // partition by predicted segment widths; monotone
  kCollabDp,      // monotone DP over log collaboration probabilities
  kClsArgmax,     // per-frame argmax of the classification head
};

const char* to_string(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& name);
std::vector<DecodeMode> all_decode_modes();
// Throws ConfigError when `mode` reads a head that `heads` leaves off.
void check_decode_mode(DecodeMode mode, const HeadSet& heads);
bool decode_mode_available(DecodeMode mode, const HeadSet& heads);

struct OptimConfig {
  AdamConfig adam;
  double peak_lr = 1e-3;
  std::size_t warmup_epochs = 5;
  std::size_t total_epochs = 60;
  std::size_t batch_size = 8;
};

struct PathsConfig {
  std::string train;
  std::string val;
  std::string test;
  std::string out_dir = "run";
};

struct TrainConfig {
  ModelConfig model;
  OptimConfig optim;
  LossOptions loss;
  DecodeMode decode = DecodeMode::kCollabArgmax;
  std::uint64_t seed = 1;
  PathsConfig paths;

  HeadSet heads() const { return {loss.cls, loss.seg, loss.col}; }
  void validate() const;
};

// Ablation presets "cls", "seg", "cls+seg", "all": sets the loss toggles and
// a decode mode that only reads enabled heads.
void apply_ablation(TrainConfig& config, const std::string& preset);

nlohmann::json to_json(const TrainConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
// Reads a JSON config file and applies the STAGEFORMER_SEED override.
TrainConfig load_train_config(const std::string& path);
void apply_env_overrides(TrainConfig& config);

nlohmann::json to_json(const GenSpec& spec);
// Accepts an optional "preset" key ("human" or "mouse") applied first.
GenSpec gen_spec_from_json(const nlohmann::json& j);
GenSpec load_gen_spec(const std::string& path);

nlohmann::json read_json_file(const std::string& path);

}  // namespace stageformer
