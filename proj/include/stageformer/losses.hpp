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
#include <optional>
#include <span>
#include <vector>

#include "stageformer/autodiff/tensor.hpp"
#include "stageformer/heads.hpp"

namespace stageformer {

// Groundtruth segment layout derived from a label sequence. A stage absent
// from the labels has width 0.
struct SegmentTargets {
  std::vector<double> widths;
  std::vector<double> centers;
};

// Index of the first label smaller than its predecessor, if any.
std::optional<std::size_t> first_monotonicity_violation(std::span<const int> labels);

// Throws DataError on non-monotone labels or labels outside [0, C).
SegmentTargets segment_targets(std::span<const int> labels, std::size_t num_stages);

// Probabilities below this are clamped before the log.
inline constexpr double kProbabilityFloor = 1e-12;

struct CrossEntropy {
  ad::Tensor loss;
  std::size_t clamped = 0;  // frames whose true-class probability hit the floor
};

// Sum over frames of -log p(true class); divided by T when mean_over_frames.
CrossEntropy cls_loss(const FramePrediction& pred, std::span<const int> labels,
                      bool mean_over_frames = true);
CrossEntropy col_loss(const FramePrediction& pred, std::span<const int> labels,
                      bool mean_over_frames = true);

// L1 distance between predicted and target widths plus centers.
ad::Tensor seg_loss(const SegmentPrediction& pred, const SegmentTargets& target);

struct LossOptions {
  bool cls = true;
  bool seg = true;
  bool col = true;
  bool mean_over_frames = true;
};

struct LossBreakdown {
  ad::Tensor total;
  double cls = 0.0;
  double seg = 0.0;
  double col = 0.0;
  std::size_t clamped = 0;
};

// Unweighted sum of the enabled losses. An enabled loss whose head output
// is missing is a configuration error.
LossBreakdown total_loss(const HeadOutputs& outputs, std::span<const int> labels,
                         std::size_t num_stages, const LossOptions& options);

}  // namespace stageformer
