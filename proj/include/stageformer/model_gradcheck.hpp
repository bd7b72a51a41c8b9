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

#include "stageformer/autodiff/grad_check.hpp"
#include "stageformer/model.hpp"

namespace stageformer {

struct ModelGradCheckOptions {
  ModelConfig model = tiny_model();
  std::size_t length = 6;
  std::uint64_t seed = 3;
  ad::GradCheckOptions check;

  // d=8, C=3, two levels, two sampling points, two heads, two layers each side.
  static ModelConfig tiny_model();
};

struct GroupGradCheck {
  std::string name;  // parameter tensor name
  ad::GradCheckReport report;
};

struct ModelGradCheckReport {
  std::vector<GroupGradCheck> groups;
  double max_rel_error = 0.0;
  std::string worst_group;
  std::size_t checked = 0;
  bool passed = true;
  double seconds = 0.0;
};

// Total loss (all three heads) on a random monotone-labelled sequence,
// differentiated against central differences one parameter tensor at a time.
// Deformable-attention offset and weight predictors are re-drawn from a
// normal distribution so no sampling position sits on an integer knot,
// where linear interpolation has no derivative.
ModelGradCheckReport check_model_gradients(const ModelGradCheckOptions& options = {});

}  // namespace stageformer
