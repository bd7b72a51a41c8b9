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

namespace stageformer {

// Linear warm-up from 0 to peak over `warmup_steps`, then cosine annealing
// from peak to 0 at `total_steps`.
struct Schedule {
  double peak_lr = 1e-3;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;

  void validate() const;
};

// Learning rate at step s in [0, total_steps]; steps past the end return 0.
double lr_at(std::size_t step, const Schedule& schedule);

}  // namespace stageformer
