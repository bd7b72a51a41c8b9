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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stageformer/autodiff/tensor.hpp"

namespace stageformer {

// One time-lapse sample: T per-frame feature vectors and, for labelled
// data, T monotone non-decreasing stage labels in [0, C).
struct StageSequence {
  std::string id;
  std::size_t num_stages = 0;
  std::size_t dim = 0;
  std::vector<double> features;  // row-major T x dim
  std::vector<int> labels;       // empty when unlabelled

  std::size_t length() const { return dim == 0 ? 0 : features.size() / dim; }
  bool has_labels() const { return !labels.empty(); }
  ad::Tensor feature_tensor() const;
  // Throws DataError on inconsistent sizes or invalid labels.
  void validate() const;
};

struct GenSpec {
  std::size_t num_sequences = 250;
  std::size_t t_min = 60;
  std::size_t t_max = 120;
  std::size_t num_stages = 4;
  std::size_t input_dim = 32;
  double noise_std = 0.3;
  std::size_t transition_blend_frames = 2;
  double min_stage_fraction = 0.05;
  double dirichlet_concentration = 1.0;
  std::uint64_t seed = 7;

  // Four stages, the default benchmark.
  static GenSpec human();
  // Eight stages with a lower width floor.
  static GenSpec mouse();

  void validate() const;
};

// Per-stage prototype vectors shared by every sequence of a generation seed.
std::vector<std::vector<double>> stage_prototypes(const GenSpec& spec);

// Synthetic dataset. Each sequence draws its stage widths from a symmetric
// Dirichlet lifted onto the floor min_stage_fraction, labels frames by
// partitioning T accordingly, and emits prototype(label) + N(0, noise_std)
// features, blending adjacent prototypes within transition_blend_frames of
// each stage change. Deterministic in spec.seed.
std::vector<StageSequence> generate(const GenSpec& spec);

// Same as generate() restricted to one sequence index.
StageSequence generate_one(const GenSpec& spec, std::size_t index);

enum class Split { kTrain, kVal, kTest };

const char* to_string(Split split);

// 80/10/10 assignment by sequence, a pure function of (seed, id).
Split split_of(std::uint64_t seed, const std::string& id);

struct DatasetSplits {
  std::vector<StageSequence> train;
  std::vector<StageSequence> val;
  std::vector<StageSequence> test;
};

DatasetSplits split_dataset(std::vector<StageSequence> sequences, std::uint64_t seed);

// splitmix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace stageformer
