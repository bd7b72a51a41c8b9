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
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "stageformer/config.hpp"
#include "stageformer/data_gen.hpp"
#include "stageformer/heads.hpp"
#include "stageformer/metrics.hpp"
#include "stageformer/model.hpp"

namespace stageformer {

// Labels for the `length` frames of one sequence under `mode`. Throws
// ConfigError if the required head output is absent.
std::vector<int> predict_labels(const HeadOutputs& outputs, DecodeMode mode, std::size_t length);

struct SequencePrediction {
  std::string id;
  std::vector<int> truth;                    // empty for unlabelled input
  std::vector<std::vector<int>> predictions;  // one per evaluated mode
  double seconds = 0.0;                       // forward + decode wall time
};

struct EvalResult {
  std::vector<DecodeMode> modes;
  std::vector<MetricsReport> metrics;  // parallel to modes; empty for predict()
  std::vector<SequencePrediction> sequences;
};

// Gradient-free forward pass and decoding of every sequence. Every listed
// mode must be available for `heads`.
EvalResult predict(const Model& model, const HeadSet& heads,
                   const std::vector<StageSequence>& data, const std::vector<DecodeMode>& modes);

// predict() plus metrics against the labels. Empty or unlabelled data is a
// DataError.
EvalResult evaluate(const Model& model, const HeadSet& heads,
                    const std::vector<StageSequence>& data, const std::vector<DecodeMode>& modes);

// Modes readable from the enabled heads, in canonical order.
std::vector<DecodeMode> available_modes(const HeadSet& heads);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json eval_report_json(const EvalResult& result);

// Columns: id, frame, true, then one column per mode.
void write_predictions_csv(std::ostream& out, const EvalResult& result);
void write_predictions_csv(const std::string& path, const EvalResult& result);

}  // namespace stageformer
