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

namespace stageformer {

struct MetricsReport {
  std::size_t frames = 0;
  double global_accuracy = 0.0;
  std::vector<double> per_class_precision;
  std::vector<double> per_class_recall;
  std::vector<std::size_t> support;  // groundtruth frames per class
  // Unweighted means over classes with groundtruth support.
  double avg_precision = 0.0;
  double avg_recall = 0.0;
};

// Accumulates predictions over any number of sequences.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(std::span<const int> predicted, std::span<const int> truth);
  std::size_t count(std::size_t truth, std::size_t predicted) const;
  std::size_t num_classes() const { return classes_; }
  MetricsReport report() const;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;  // row = truth, column = prediction
};

MetricsReport compute_metrics(std::span<const int> predicted, std::span<const int> truth,
                              std::size_t num_classes);

}  // namespace stageformer
