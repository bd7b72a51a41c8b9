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

#include "stageformer/heads.hpp"

#include "stageformer/autodiff/ops.hpp"
#include "stageformer/error.hpp"

namespace stageformer {

ClassificationHead ClassificationHead::create(std::size_t dim, std::size_t stages, nn::Rng& rng) {
  return {nn::FeedForward::create(dim, dim, stages, rng)};
}

void ClassificationHead::collect(const std::string& prefix, nn::ParameterList& out) const {
  ffn.collect(prefix + ".ffn", out);
}

SegmentationHead SegmentationHead::create(std::size_t dim, nn::Rng& rng) {
  return {nn::FeedForward::create(dim, dim, 1, rng)};
}

void SegmentationHead::collect(const std::string& prefix, nn::ParameterList& out) const {
  ffn.collect(prefix + ".ffn", out);
}

CollaborationHead CollaborationHead::create(std::size_t dim, nn::Rng& rng) {
  return {nn::kaiming_uniform({dim, dim}, dim, rng), nn::kaiming_uniform({dim, dim}, dim, rng)};
}

void CollaborationHead::collect(const std::string& prefix, nn::ParameterList& out) const {
  out.push_back({prefix + ".query_proj", query_proj});
  out.push_back({prefix + ".key_proj", key_proj});
}

FramePrediction classification_head(const ad::Tensor& frames, const ClassificationHead& head) {
  return {ad::softmax(head.ffn(frames), 1)};
}

SegmentPrediction segments_from_widths(const ad::Tensor& widths) {
  return {widths, ad::sub(ad::cumsum(widths, 0), ad::scale(widths, 0.5))};
}

SegmentPrediction segmentation_head(const ad::Tensor& stages, const SegmentationHead& head) {
  const ad::Tensor logits = head.ffn(stages);  // C x 1
  const ad::Tensor widths = ad::softmax(ad::reshape(logits, {stages.rows()}), 0);
  return segments_from_widths(widths);
}

ad::Tensor frame_times(std::size_t length) {
  std::vector<double> t(length);
  for (std::size_t i = 0; i < length; ++i) {
    t[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(length);
  }
  return ad::Tensor::vector(std::move(t));
}

ad::Tensor position_weights(const SegmentPrediction& seg, std::size_t length, double alpha) {
  if (!(alpha > 0.0)) {
    throw ConfigError("position_weights: alpha must be positive, got " + std::to_string(alpha));
  }
  if (seg.widths.numel() != seg.centers.numel()) {
    throw ShapeError("position_weights: widths " + ad::shape_str(seg.widths.shape()) +
                     " vs centers " + ad::shape_str(seg.centers.shape()));
  }
  const std::size_t stages = seg.widths.numel();
  const ad::Tensor times = ad::repeat_cols(frame_times(length), stages);
  const ad::Tensor distance = ad::abs(ad::sub(ad::repeat_rows(seg.centers, length), times));
  const ad::Tensor numerator = ad::add_scalar(ad::repeat_rows(seg.widths, length), alpha);
  return ad::div(numerator, ad::add_scalar(distance, alpha));
}

ad::Tensor attention_scores(const ad::Tensor& frames, const ad::Tensor& stages,
                            const CollaborationHead& head) {
  return ad::scaled_dot_product(ad::matmul(frames, head.query_proj),
                                ad::matmul(stages, head.key_proj));
}

FramePrediction collaborate(const ad::Tensor& pos_weights, const ad::Tensor& attn_scores) {
  return {ad::softmax(ad::mul(pos_weights, attn_scores), 1)};
}

FramePrediction collaboration_head(const ad::Tensor& frames, const ad::Tensor& stages,
                                   const SegmentPrediction& seg, const CollaborationHead& head,
                                   double alpha) {
  const ad::Tensor weights = position_weights(seg, frames.rows(), alpha);
  return collaborate(weights, attention_scores(frames, stages, head));
}

}  // namespace stageformer
