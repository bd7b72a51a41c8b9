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
#include <span>
#include <vector>

#include "stageformer/autodiff/tensor.hpp"
#include "stageformer/heads.hpp"

namespace stageformer {

struct MonotoneLabeling {
  std::vector<int> labels;
  double score = 0.0;  // summed log score; set by dp_monotonic
};

bool is_monotone(std::span<const int> labels);

// Frame i gets the smallest stage c whose boundary cumsum(widths)[c]
// exceeds t_i = (i + 0.5) / T. Frames past the last boundary (rounding)
// take the final stage.
MonotoneLabeling decode_from_segments(std::span<const double> widths, std::size_t length);
MonotoneLabeling decode_from_segments(const SegmentPrediction& seg, std::size_t length);

// Row-wise argmax; the lowest index wins ties. Not necessarily monotone.
std::vector<int> decode_argmax(const ad::Tensor& scores);
std::vector<int> decode_argmax(const FramePrediction& pred);

// Sum of log_probs[i][labels[i]] for a row-major T x C score matrix.
double labeling_score(std::span<const double> log_probs, std::size_t num_stages,
                      std::span<const int> labels);

// Highest-scoring monotone non-decreasing labeling of a row-major T x C
// matrix of log scores. Ties resolve toward the smaller stage.
MonotoneLabeling dp_monotonic(std::span<const double> log_probs, std::size_t num_stages);

}  // namespace stageformer
