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

#include "stageformer/autodiff/tensor.hpp"
#include "stageformer/config.hpp"
#include "stageformer/model.hpp"
#include "stageformer/optimizer.hpp"

// Binary checkpoint, little-endian:
//   "STGFCKPT" | version u8 | config json (u64 length + bytes) | epoch u64 |
//   optimizer steps u64 | rng state (u64 length + bytes) | best_val f64 |
//   best_epoch u64 | tensor count u64 | per tensor: name, ndim u64, dims u64...,
//   values f64..., first moments f64..., second moments f64...
namespace stageformer {

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'G', 'F', 'C', 'K', 'P', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> value;
  std::vector<double> m;
  std::vector<double> v;
};

struct Checkpoint {
  TrainConfig config;
  std::uint64_t epoch = 0;           // completed epochs
  std::uint64_t optimizer_steps = 0;
  std::string rng_state;             // textual std::mt19937_64 state
  double best_val = 0.0;
  std::uint64_t best_epoch = 0;
  std::vector<CheckpointTensor> tensors;
};

// Snapshots parameters, and optimizer moments when `optimizer` is non-null.
Checkpoint make_checkpoint(const TrainConfig& config, const Model& model, const Adam* optimizer);

// Rebuilds a model with the checkpoint's architecture and tensor values.
Model restore_model(const Checkpoint& ckpt);
// Copies moments and the step count into an optimizer over `model`'s params.
void restore_optimizer(const Checkpoint& ckpt, Adam& optimizer);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stageformer
