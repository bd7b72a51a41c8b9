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

#include "stageformer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "stageformer/autodiff/ops.hpp"
#include "stageformer/error.hpp"
#include "stageformer/evaluate.hpp"
#include "stageformer/optimizer.hpp"
#include "stageformer/schedule.hpp"

namespace stageformer {

namespace {

void check_dataset(const std::vector<StageSequence>& data, const ModelConfig& model,
                   const char* name) {
  for (const StageSequence& s : data) {
    s.validate();
    if (!s.has_labels()) throw DataError(std::string(name) + " sequence " + s.id + " has no labels");
    if (s.dim != model.input_dim || s.num_stages != model.num_stages) {
      throw DataError(std::string(name) + " sequence " + s.id + " has dim=" +
                      std::to_string(s.dim) + ", C=" + std::to_string(s.num_stages) +
                      "; the model expects dim=" + std::to_string(model.input_dim) +
                      ", C=" + std::to_string(model.num_stages));
    }
  }
}

std::string rng_state(const nn::Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

LossBreakdown accumulate_batch_gradients(const Model& model, const TrainConfig& config,
                                         const std::vector<const StageSequence*>& batch) {
  LossBreakdown mean;
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const StageSequence* seq : batch) {
    const HeadOutputs out = forward(model, seq->feature_tensor(), config.heads());
    const LossBreakdown loss =
        total_loss(out, seq->labels, config.model.num_stages, config.loss);
    const double value = loss.total.item();
    if (!std::isfinite(value)) {
      throw DivergenceError("non-finite loss on sequence " + seq->id);
    }
    ad::backward(ad::scale(loss.total, w));
    total += w * value;
    mean.cls += w * loss.cls;
    mean.seg += w * loss.seg;
    mean.col += w * loss.col;
    mean.clamped += loss.clamped;
  }
  mean.total = ad::Tensor::scalar(total);
  return mean;
}

TrainResult train(const TrainConfig& config, const std::vector<StageSequence>& train_set,
                  const std::vector<StageSequence>& val_set, const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw DataError("train: training set is empty");
  check_dataset(train_set, config.model, "train");
  check_dataset(val_set, config.model, "val");

  Model model = Model::create(config.model, mix_seed(config.seed, 1));
  Adam optimizer(model.parameters(), config.optim.adam);
  nn::Rng shuffle_rng(mix_seed(config.seed, 2));

  const std::size_t n = train_set.size();
  const std::size_t batch_size = config.optim.batch_size;
  const std::size_t batches = (n + batch_size - 1) / batch_size;
  Schedule schedule;
  schedule.peak_lr = config.optim.peak_lr;
  schedule.warmup_steps = config.optim.warmup_epochs * batches;
  schedule.total_steps = config.optim.total_epochs * batches;

  const HeadSet heads = config.heads();
  const std::vector<DecodeMode> modes = available_modes(heads);

  TrainResult result;
  result.best_val = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.optim.total_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochReport report;
    report.epoch = epoch;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<const StageSequence*> batch;
      for (std::size_t i = b * batch_size; i < std::min(n, (b + 1) * batch_size); ++i) {
        batch.push_back(&train_set[order[i]]);
      }
      optimizer.zero_grad();
      LossBreakdown loss;
      try {
        loss = accumulate_batch_gradients(model, config, batch);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDivergence && e.kind() != ErrorKind::kNonFinite) throw;
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step + 1) + ": " + e.what());
      }
      report.lr = lr_at(step + 1, schedule);
      optimizer.step(report.lr);
      ++step;
      const double share = static_cast<double>(batch.size()) / static_cast<double>(n);
      report.loss += share * loss.total.item();
      report.cls_loss += share * loss.cls;
      report.seg_loss += share * loss.seg;
      report.col_loss += share * loss.col;
      report.clamped += loss.clamped;
    }

    if (!val_set.empty()) {
      const EvalResult eval = evaluate(model, heads, val_set, modes);
      for (std::size_t k = 0; k < modes.size(); ++k) {
        report.val_by_mode.emplace_back(modes[k], eval.metrics[k].global_accuracy);
        if (modes[k] == config.decode) report.val_accuracy = eval.metrics[k].global_accuracy;
      }
    } else {
      report.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    }
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    Checkpoint ckpt = make_checkpoint(config, model, &optimizer);
    ckpt.epoch = epoch;
    ckpt.rng_state = rng_state(shuffle_rng);
    const bool improved = val_set.empty() ? epoch == config.optim.total_epochs
                                          : report.val_accuracy > result.best_val;
    if (improved) {
      result.best_val = report.val_accuracy;
      result.best_epoch = epoch;
    }
    ckpt.best_val = result.best_val;
    ckpt.best_epoch = result.best_epoch;
    if (improved) result.best = ckpt;
    result.last = std::move(ckpt);
    result.epochs.push_back(report);
    if (options.on_epoch) options.on_epoch(report);
  }
  result.best.best_val = result.best_val;
  result.best.best_epoch = result.best_epoch;
  result.model = restore_model(result.best);
  return result;
}

nlohmann::json to_json(const EpochReport& r) {
  nlohmann::json val = nlohmann::json::object();
  for (const auto& [mode, acc] : r.val_by_mode) val[to_string(mode)] = acc;
  nlohmann::json j{{"epoch", r.epoch},       {"lr", r.lr},
                   {"loss", r.loss},         {"cls_loss", r.cls_loss},
                   {"seg_loss", r.seg_loss}, {"col_loss", r.col_loss},
                   {"clamped", r.clamped},   {"val_by_mode", val},
                   {"seconds", r.seconds}};
  j["val_accuracy"] = std::isfinite(r.val_accuracy) ? nlohmann::json(r.val_accuracy)
                                                    : nlohmann::json(nullptr);
  return j;
}

nlohmann::json train_report_json(const TrainResult& result) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochReport& r : result.epochs) epochs.push_back(to_json(r));
  return nlohmann::json{
      {"config", to_json(result.best.config)},
      {"best_epoch", result.best_epoch},
      {"best_val_accuracy",
       std::isfinite(result.best_val) ? nlohmann::json(result.best_val) : nlohmann::json(nullptr)},
      {"epochs", epochs}};
}

}  // namespace stageformer
