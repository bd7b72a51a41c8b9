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
#include <string>

#include "stageformer/autodiff/tensor.hpp"
#include "stageformer/nn.hpp"

namespace stageformer {

// Per-frame class distribution; each of the T rows is a simplex over C.
struct FramePrediction {
  ad::Tensor probs;  // T x C
};

// Per-stage segment layout on normalized time. Widths form a simplex and
// centers are cumsum(widths) - widths / 2, hence strictly increasing.
struct SegmentPrediction {
  ad::Tensor widths;   // C
  ad::Tensor centers;  // C
};

struct HeadOutputs {
  std::optional<FramePrediction> cls;
  std::optional<SegmentPrediction> seg;
  std::optional<FramePrediction> col;
};

struct ClassificationHead {
  nn::FeedForward ffn;  // d -> d -> C

  static ClassificationHead create(std::size_t dim, std::size_t stages, nn::Rng& rng);
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

struct SegmentationHead {
  nn::FeedForward ffn;  // d -> d -> 1, one logit per stage

  static SegmentationHead create(std::size_t dim, nn::Rng& rng);
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

struct CollaborationHead {
  ad::Tensor query_proj;  // d x d, applied to frame features
  ad::Tensor key_proj;    // d x d, applied to stage features

  static CollaborationHead create(std::size_t dim, nn::Rng& rng);
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

FramePrediction classification_head(const ad::Tensor& frames, const ClassificationHead& head);

SegmentPrediction segmentation_head(const ad::Tensor& stages, const SegmentationHead& head);

// Completes a segment prediction from widths alone.
SegmentPrediction segments_from_widths(const ad::Tensor& widths);

// Normalized frame times t_i = (i + 0.5) / T.
ad::Tensor frame_times(std::size_t length);

// T x C weights (width_c + alpha) / (|center_c - t_i| + alpha).
ad::Tensor position_weights(const SegmentPrediction& seg, std::size_t length, double alpha);

// (frames Wq)(stages Wk)^T / sqrt(d), T x C.
ad::Tensor attention_scores(const ad::Tensor& frames, const ad::Tensor& stages,
                            const CollaborationHead& head);

// Row softmax of the elementwise product of position and attention weights.
FramePrediction collaborate(const ad::Tensor& pos_weights, const ad::Tensor& attn_scores);

FramePrediction collaboration_head(const ad::Tensor& frames, const ad::Tensor& stages,
                                   const SegmentPrediction& seg, const CollaborationHead& head,
                                   double alpha);

}  // namespace stageformer
