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

#include "stageformer/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "stageformer/error.hpp"

namespace stageformer {

void Schedule::validate() const {
  if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) {
    throw ConfigError("schedule: peak_lr must be finite and >= 0");
  }
  if (total_steps == 0) throw ConfigError("schedule: total_steps must be >= 1");
  if (warmup_steps >= total_steps) {
    throw ConfigError("schedule: warmup_steps (" + std::to_string(warmup_steps) +
                      ") must be below total_steps (" + std::to_string(total_steps) + ")");
  }
}

double lr_at(std::size_t step, const Schedule& schedule) {
  schedule.validate();
  if (step >= schedule.total_steps) return 0.0;
  if (step < schedule.warmup_steps) {
    return schedule.peak_lr * static_cast<double>(step) /
           static_cast<double>(schedule.warmup_steps);
  }
  const double progress = static_cast<double>(step - schedule.warmup_steps) /
                          static_cast<double>(schedule.total_steps - schedule.warmup_steps);
  return schedule.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace stageformer
