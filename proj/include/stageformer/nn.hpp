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
#include <random>
#include <string>
#include <vector>

#include "stageformer/autodiff/tensor.hpp"

namespace stageformer::nn {

using Rng = std::mt19937_64;

struct NamedParameter {
  std::string name;
  ad::Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

// Uniform Kaiming fan-in initialization: U(-b, b) with b = sqrt(6 / fan_in).
ad::Tensor kaiming_uniform(ad::Shape shape, std::size_t fan_in, Rng& rng);
ad::Tensor normal_parameter(ad::Shape shape, double stddev, Rng& rng);
ad::Tensor zero_parameter(ad::Shape shape);
ad::Tensor constant_parameter(ad::Shape shape, double value);

// y = x W + b with W stored in x out.
struct Linear {
  ad::Tensor weight;
  ad::Tensor bias;

  static Linear create(std::size_t in, std::size_t out, Rng& rng);
  static Linear zeros(std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  ad::Tensor operator()(const ad::Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct LayerNorm {
  ad::Tensor gamma;
  ad::Tensor beta;

  static LayerNorm create(std::size_t width);
  ad::Tensor operator()(const ad::Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

// Two linear layers with a ReLU between them.
struct FeedForward {
  Linear hidden;
  Linear output;

  static FeedForward create(std::size_t in, std::size_t width, std::size_t out, Rng& rng);
  ad::Tensor operator()(const ad::Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

}  // namespace stageformer::nn
