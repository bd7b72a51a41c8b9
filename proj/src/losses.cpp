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

#include "stageformer/losses.hpp"

#include <string>

#include "stageformer/autodiff/ops.hpp"
#include "stageformer/error.hpp"

namespace stageformer {

namespace {

CrossEntropy cross_entropy(const char* name, const FramePrediction& pred,
                           std::span<const int> labels, bool mean_over_frames) {
  const ad::Tensor& probs = pred.probs;
  if (probs.ndim() != 2 || probs.rows() != labels.size()) {
    throw ShapeError(std::string(name) + ": " + std::to_string(labels.size()) +
                     " labels for predictions " + ad::shape_str(probs.shape()));
  }
  std::vector<std::size_t> index(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= probs.cols()) {
      throw DataError(std::string(name) + ": label " + std::to_string(labels[i]) +
                      " at frame " + std::to_string(i) + " outside [0, " +
                      std::to_string(probs.cols()) + ")");
    }
    index[i] = static_cast<std::size_t>(labels[i]);
  }
  const ad::Tensor picked = ad::pick(probs, index);
  CrossEntropy out;
  for (double p : picked.data()) {
    if (p < kProbabilityFloor) ++out.clamped;
  }
  ad::Tensor nll = ad::scale(ad::sum(ad::log(ad::clamp_min(picked, kProbabilityFloor))), -1.0);
  if (mean_over_frames) nll = ad::scale(nll, 1.0 / static_cast<double>(labels.size()));
  out.loss = nll;
  return out;
}

}  // namespace

std::optional<std::size_t> first_monotonicity_violation(std::span<const int> labels) {
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] < labels[i - 1]) return i;
  }
  return std::nullopt;
}

SegmentTargets segment_targets(std::span<const int> labels, std::size_t num_stages) {
  if (labels.empty()) throw DataError("segment_targets: empty label sequence");
  if (const auto bad = first_monotonicity_violation(labels)) {
    throw DataError("segment_targets: labels decrease at index " + std::to_string(*bad));
  }
  std::vector<std::size_t> counts(num_stages, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_stages) {
      throw DataError("segment_targets: label " + std::to_string(labels[i]) + " at index " +
                      std::to_string(i) + " outside [0, " + std::to_string(num_stages) + ")");
    }
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  SegmentTargets t;
  t.widths.resize(num_stages);
  t.centers.resize(num_stages);
  const double total = static_cast<double>(labels.size());
  std::size_t before = 0;
  for (std::size_t c = 0; c < num_stages; ++c) {
    t.widths[c] = static_cast<double>(counts[c]) / total;
    // cumsum - width / 2, evaluated on integer counts to stay exact.
    t.centers[c] = (static_cast<double>(before) + 0.5 * static_cast<double>(counts[c])) / total;
    before += counts[c];
  }
  return t;
}

CrossEntropy cls_loss(const FramePrediction& pred, std::span<const int> labels,
                      bool mean_over_frames) {
  return cross_entropy("cls_loss", pred, labels, mean_over_frames);
}

CrossEntropy col_loss(const FramePrediction& pred, std::span<const int> labels,
                      bool mean_over_frames) {
  return cross_entropy("col_loss", pred, labels, mean_over_frames);
}

ad::Tensor seg_loss(const SegmentPrediction& pred, const SegmentTargets& target) {
  const std::size_t c = pred.widths.numel();
  if (target.widths.size() != c || target.centers.size() != c || pred.centers.numel() != c) {
    throw ShapeError("seg_loss: prediction has " + std::to_string(c) + " stages, target " +
                     std::to_string(target.widths.size()));
  }
  const ad::Tensor tw = ad::Tensor::vector(target.widths);
  const ad::Tensor tc = ad::Tensor::vector(target.centers);
  const ad::Tensor pw = ad::reshape(pred.widths, {c});
  const ad::Tensor pc = ad::reshape(pred.centers, {c});
  return ad::add(ad::sum(ad::abs(ad::sub(tw, pw))), ad::sum(ad::abs(ad::sub(tc, pc))));
}

LossBreakdown total_loss(const HeadOutputs& outputs, std::span<const int> labels,
                         std::size_t num_stages, const LossOptions& options) {
  if (!options.cls && !options.seg && !options.col) {
    throw ConfigError("total_loss: every loss term is disabled");
  }
  LossBreakdown out;
  std::vector<ad::Tensor> terms;
  if (options.cls) {
    if (!outputs.cls) throw ConfigError("total_loss: classification loss enabled without its head");
    CrossEntropy ce = cls_loss(*outputs.cls, labels, options.mean_over_frames);
    out.cls = ce.loss.item();
    out.clamped += ce.clamped;
    terms.push_back(ce.loss);
  }
  if (options.seg) {
    if (!outputs.seg) throw ConfigError("total_loss: segmentation loss enabled without its head");
    ad::Tensor l = seg_loss(*outputs.seg, segment_targets(labels, num_stages));
    out.seg = l.item();
    terms.push_back(l);
  }
  if (options.col) {
    if (!outputs.col) throw ConfigError("total_loss: collaboration loss enabled without its head");
    CrossEntropy ce = col_loss(*outputs.col, labels, options.mean_over_frames);
    out.col = ce.loss.item();
    out.clamped += ce.clamped;
    terms.push_back(ce.loss);
  }
  out.total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = ad::add(out.total, terms[i]);
  return out;
}

}  // namespace stageformer
