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
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stageformer/checkpoint.hpp"
#include "stageformer/config.hpp"
#include "stageformer/data_gen.hpp"
#include "stageformer/model.hpp"

namespace stageformer {

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;        // rate used by the last update of the epoch
  double loss = 0.0;      // mean total loss over sequences
  double cls_loss = 0.0;
  double seg_loss = 0.0;
  double col_loss = 0.0;
  std::size_t clamped = 0;
  // Validation global accuracy per available decode mode; `val_accuracy`
  // is the configured mode's entry. NaN when there is no validation set.
  std::vector<std::pair<DecodeMode, double>> val_by_mode;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Model model;  // parameters from the best validation epoch
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochReport> epochs;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

struct TrainOptions {
  std::function<void(const EpochReport&)> on_epoch;
};

// Deterministic mini-batch training. Each batch of sequences contributes
// the mean of per-sequence total losses; one Adam update follows each batch.
// The learning rate follows `lr_at` over optimizer steps. Without a
// validation set the final epoch counts as best. A non-finite loss raises
// DivergenceError with epoch and step context.
TrainResult train(const TrainConfig& config, const std::vector<StageSequence>& train_set,
                  const std::vector<StageSequence>& val_set, const TrainOptions& options = {});

// Mean per-sequence loss of one batch, backpropagated into the parameter
// grads (which accumulate). Returns the loss breakdown averaged over `batch`.
LossBreakdown accumulate_batch_gradients(const Model& model, const TrainConfig& config,
                                         const std::vector<const StageSequence*>& batch);

nlohmann::json to_json(const EpochReport& report);
nlohmann::json train_report_json(const TrainResult& result);

}  // namespace stageformer
