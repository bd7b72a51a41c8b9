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

#include "stageformer/model_gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "stageformer/losses.hpp"

namespace stageformer {

ModelConfig ModelGradCheckOptions::tiny_model() {
  ModelConfig c;
  c.input_dim = 5;
  c.embed_dim = 8;
  c.ffn_dim = 8;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.levels = 2;
  c.heads = 2;
  c.points = 2;
  c.num_stages = 3;
  return c;
}

ModelGradCheckReport check_model_gradients(const ModelGradCheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Model model = Model::create(options.model, options.seed);
  nn::Rng rng(options.seed + 1);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (auto& p : model.parameters()) {
    if (p.name.find("offset_pred") == std::string::npos &&
        p.name.find("weight_pred") == std::string::npos) {
      continue;
    }
    for (double& v : p.tensor.mutable_data()) v = normal(rng);
  }

  const std::size_t length = options.length;
  const std::size_t stages = options.model.num_stages;
  std::vector<double> features(length * options.model.input_dim);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (double& v : features) v = unit(rng);
  const ad::Tensor x = ad::Tensor::matrix(length, options.model.input_dim, features);
  // Monotone labels covering every stage.
  std::vector<int> labels(length);
  for (std::size_t i = 0; i < length; ++i) {
    labels[i] = static_cast<int>(std::min(stages - 1, i * stages / length));
  }

  const HeadSet heads;
  const LossOptions loss_options;
  auto loss = [&] {
    return total_loss(forward(model, x, heads), labels, stages, loss_options).total;
  };

  ModelGradCheckReport report;
  for (auto& p : model.parameters()) {
    std::vector<ad::Tensor> leaves{p.tensor};
    // Other parameters keep requires_grad so the graph matches training.
    GroupGradCheck group{p.name, ad::grad_check_leaves(loss, leaves, options.check)};
    report.checked += group.report.checked;
    if (group.report.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = group.report.max_rel_error;
      report.worst_group = p.name;
    }
    report.passed = report.passed && group.report.passed;
    report.groups.push_back(std::move(group));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace stageformer
