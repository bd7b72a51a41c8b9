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

#include "stageformer/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "stageformer/dataset_io.hpp"
#include "stageformer/error.hpp"
#include "stageformer/losses.hpp"
#include "stageformer/monotonic_decode.hpp"

namespace stageformer {

std::vector<int> predict_labels(const HeadOutputs& outputs, DecodeMode mode,
                                std::size_t length) {
  auto missing = [mode]() {
    return ConfigError(std::string("decode mode ") + to_string(mode) +
                       ": the model produced no output for the required head");
  };
  switch (mode) {
    case DecodeMode::kCollabArgmax:
      if (!outputs.col) throw missing();
      return decode_argmax(*outputs.col);
    case DecodeMode::kClsArgmax:
      if (!outputs.cls) throw missing();
      return decode_argmax(*outputs.cls);
    case DecodeMode::kSegments:
      if (!outputs.seg) throw missing();
      return decode_from_segments(*outputs.seg, length).labels;
    case DecodeMode::kCollabDp: {
      if (!outputs.col) throw missing();
      const auto probs = outputs.col->probs.data();
      std::vector<double> logp(probs.size());
      for (std::size_t i = 0; i < probs.size(); ++i) {
        logp[i] = std::log(std::max(probs[i], kProbabilityFloor));
      }
      return dp_monotonic(logp, outputs.col->probs.cols()).labels;
    }
  }
  throw ConfigError("unknown decode mode");
}

std::vector<DecodeMode> available_modes(const HeadSet& heads) {
  std::vector<DecodeMode> out;
  for (DecodeMode m : all_decode_modes()) {
    if (decode_mode_available(m, heads)) out.push_back(m);
  }
  return out;
}

EvalResult predict(const Model& model, const HeadSet& heads,
                   const std::vector<StageSequence>& data, const std::vector<DecodeMode>& modes) {
  if (modes.empty()) throw ConfigError("predict: no decode mode requested");
  for (DecodeMode m : modes) check_decode_mode(m, heads);
  ad::NoGradGuard no_grad;
  EvalResult result;
  result.modes = modes;
  result.sequences.reserve(data.size());
  for (const StageSequence& seq : data) {
    seq.validate();
    if (seq.dim != model.config.input_dim) {
      throw DataError("sequence " + seq.id + ": feature dim " + std::to_string(seq.dim) +
                      " but the model expects " + std::to_string(model.config.input_dim));
    }
    const auto start = std::chrono::steady_clock::now();
    const HeadOutputs outputs = forward(model, seq.feature_tensor(), heads);
    SequencePrediction pred;
    pred.id = seq.id;
    pred.truth = seq.labels;
    for (DecodeMode m : modes) {
      pred.predictions.push_back(predict_labels(outputs, m, seq.length()));
    }
    pred.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.sequences.push_back(std::move(pred));
  }
  return result;
}

EvalResult evaluate(const Model& model, const HeadSet& heads,
                    const std::vector<StageSequence>& data, const std::vector<DecodeMode>& modes) {
  if (data.empty()) throw DataError("evaluate: dataset is empty");
  for (const StageSequence& seq : data) {
    if (!seq.has_labels()) throw DataError("evaluate: sequence " + seq.id + " has no labels");
    if (seq.num_stages != model.config.num_stages) {
      throw DataError("evaluate: sequence " + seq.id + " has C=" + std::to_string(seq.num_stages) +
                      ", model has C=" + std::to_string(model.config.num_stages));
    }
  }
  EvalResult result = predict(model, heads, data, modes);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    ConfusionMatrix cm(model.config.num_stages);
    for (const SequencePrediction& s : result.sequences) cm.add(s.predictions[k], s.truth);
    result.metrics.push_back(cm.report());
  }
  return result;
}

nlohmann::json to_json(const MetricsReport& r) {
  return nlohmann::json{{"frames", r.frames},
                        {"global_accuracy", r.global_accuracy},
                        {"avg_precision", r.avg_precision},
                        {"avg_recall", r.avg_recall},
                        {"per_class_precision", r.per_class_precision},
                        {"per_class_recall", r.per_class_recall},
                        {"support", r.support}};
}

nlohmann::json eval_report_json(const EvalResult& result) {
  nlohmann::json modes = nlohmann::json::object();
  for (std::size_t k = 0; k < result.metrics.size(); ++k) {
    modes[to_string(result.modes[k])] = to_json(result.metrics[k]);
  }
  double total_seconds = 0.0;
  for (const auto& s : result.sequences) total_seconds += s.seconds;
  return nlohmann::json{{"sequences", result.sequences.size()},
                        {"seconds_per_sequence",
                         result.sequences.empty() ? 0.0 : total_seconds / result.sequences.size()},
                        {"metrics", modes}};
}

void write_predictions_csv(std::ostream& out, const EvalResult& result) {
  out << "id,frame,true";
  for (DecodeMode m : result.modes) out << ',' << to_string(m);
  out << '\n';
  for (const SequencePrediction& s : result.sequences) {
    const std::size_t frames = s.predictions.empty() ? 0 : s.predictions.front().size();
    for (std::size_t i = 0; i < frames; ++i) {
      out << s.id << ',' << i << ',';
      if (!s.truth.empty()) out << s.truth[i];
      for (const auto& p : s.predictions) out << ',' << p[i];
      out << '\n';
    }
  }
}

void write_predictions_csv(const std::string& path, const EvalResult& result) {
  std::ostringstream os;
  write_predictions_csv(os, result);
  write_file_atomic(path, os.str());
}

}  // namespace stageformer
