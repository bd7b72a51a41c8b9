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

#include "stageformer/metrics.hpp"

#include <string>

#include "stageformer/error.hpp"

namespace stageformer {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : classes_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw ConfigError("metrics: number of classes must be positive");
}

void ConfusionMatrix::add(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw ShapeError("metrics: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(truth.size()) + " labels");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= classes_ ||
        static_cast<std::size_t>(t) >= classes_) {
      throw DataError("metrics: label out of range at frame " + std::to_string(i));
    }
    ++counts_[static_cast<std::size_t>(t) * classes_ + static_cast<std::size_t>(p)];
  }
}

std::size_t ConfusionMatrix::count(std::size_t truth, std::size_t predicted) const {
  return counts_.at(truth * classes_ + predicted);
}

MetricsReport ConfusionMatrix::report() const {
  MetricsReport r;
  r.per_class_precision.assign(classes_, 0.0);
  r.per_class_recall.assign(classes_, 0.0);
  r.support.assign(classes_, 0);
  std::size_t correct = 0;
  std::vector<std::size_t> predicted(classes_, 0);
  for (std::size_t t = 0; t < classes_; ++t) {
    for (std::size_t p = 0; p < classes_; ++p) {
      const std::size_t n = count(t, p);
      r.frames += n;
      r.support[t] += n;
      predicted[p] += n;
      if (t == p) correct += n;
    }
  }
  if (r.frames > 0) r.global_accuracy = static_cast<double>(correct) / static_cast<double>(r.frames);

  std::size_t supported = 0;
  for (std::size_t c = 0; c < classes_; ++c) {
    const double tp = static_cast<double>(count(c, c));
    if (predicted[c] > 0) r.per_class_precision[c] = tp / static_cast<double>(predicted[c]);
    if (r.support[c] > 0) {
      r.per_class_recall[c] = tp / static_cast<double>(r.support[c]);
      r.avg_precision += r.per_class_precision[c];
      r.avg_recall += r.per_class_recall[c];
      ++supported;
    }
  }
  if (supported > 0) {
    r.avg_precision /= static_cast<double>(supported);
    r.avg_recall /= static_cast<double>(supported);
  }
  return r;
}

MetricsReport compute_metrics(std::span<const int> predicted, std::span<const int> truth,
                              std::size_t num_classes) {
  ConfusionMatrix cm(num_classes);
  cm.add(predicted, truth);
  return cm.report();
}

}  // namespace stageformer
