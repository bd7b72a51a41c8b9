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

#include "stageformer/nn.hpp"

#include <cmath>

#include "stageformer/autodiff/ops.hpp"

namespace stageformer::nn {

ad::Tensor kaiming_uniform(ad::Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(ad::shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return ad::Tensor(std::move(shape), std::move(values), true);
}

ad::Tensor normal_parameter(ad::Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(ad::shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return ad::Tensor(std::move(shape), std::move(values), true);
}

ad::Tensor zero_parameter(ad::Shape shape) { return ad::Tensor::zeros(std::move(shape), true); }

ad::Tensor constant_parameter(ad::Shape shape, double value) {
  return ad::Tensor::full(std::move(shape), value, true);
}

Linear Linear::create(std::size_t in, std::size_t out, Rng& rng) {
  return {kaiming_uniform({in, out}, in, rng), zero_parameter({out})};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {zero_parameter({in, out}), zero_parameter({out})};
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const { return ad::linear(x, weight, bias); }

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm LayerNorm::create(std::size_t width) {
  return {constant_parameter({width}, 1.0), zero_parameter({width})};
}

ad::Tensor LayerNorm::operator()(const ad::Tensor& x) const {
  return ad::layer_norm(x, gamma, beta);
}

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

FeedForward FeedForward::create(std::size_t in, std::size_t width, std::size_t out, Rng& rng) {
  FeedForward ffn;
  ffn.hidden = Linear::create(in, width, rng);
  ffn.output = Linear::create(width, out, rng);
  return ffn;
}

ad::Tensor FeedForward::operator()(const ad::Tensor& x) const {
  return output(ad::relu(hidden(x)));
}

void FeedForward::collect(const std::string& prefix, ParameterList& out) const {
  hidden.collect(prefix + ".hidden", out);
  output.collect(prefix + ".output", out);
}

}  // namespace stageformer::nn
