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

#include "stageformer/decoder.hpp"

#include "stageformer/autodiff/ops.hpp"
#include "stageformer/error.hpp"

namespace stageformer {

void DecoderConfig::validate() const {
  if (embed_dim == 0) throw ConfigError("decoder: embed_dim must be positive");
  if (num_layers == 0) throw ConfigError("decoder: num_layers must be >= 1");
  if (num_stages == 0) throw ConfigError("decoder: num_stages must be >= 1");
  if (ffn_dim == 0) throw ConfigError("decoder: ffn_dim must be positive");
  attention().validate();
}

void StageQueries::collect(const std::string& prefix, nn::ParameterList& out) const {
  out.push_back({prefix + ".content", content});
  out.push_back({prefix + ".position", position});
  reference.collect(prefix + ".reference", out);
}

DecoderParams DecoderParams::create(const DecoderConfig& config, nn::Rng& rng) {
  config.validate();
  const std::size_t d = config.embed_dim;
  DecoderParams p;
  p.config = config;
  p.queries.content = nn::normal_parameter({config.num_stages, d}, 1.0, rng);
  p.queries.position = nn::normal_parameter({config.num_stages, d}, 1.0, rng);
  p.queries.reference = nn::Linear::create(d, 1, rng);
  for (std::size_t i = 0; i < config.num_layers; ++i) {
    DecoderLayer layer;
    layer.cross_attn = DeformAttnParams::create(config.attention(), rng);
    layer.attn_norm = nn::LayerNorm::create(d);
    layer.ffn = nn::FeedForward::create(d, config.ffn_dim, d, rng);
    layer.ffn_norm = nn::LayerNorm::create(d);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void DecoderParams::collect(const std::string& prefix, nn::ParameterList& out) const {
  queries.collect(prefix + ".queries", out);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string name = prefix + ".layers." + std::to_string(i);
    layers[i].cross_attn.collect(name + ".cross_attn", out);
    layers[i].attn_norm.collect(name + ".attn_norm", out);
    layers[i].ffn.collect(name + ".ffn", out);
    layers[i].ffn_norm.collect(name + ".ffn_norm", out);
  }
}

ad::Tensor stage_references(const ad::Tensor& query, const StageQueries& queries) {
  return ad::sigmoid(queries.reference(query));
}

ad::Tensor decode(const EncodedSequence& encoded, const StageQueries& queries,
                  const DecoderParams& params) {
  const DecoderConfig& c = params.config;
  if (queries.num_stages() != c.num_stages || queries.position.rows() != c.num_stages) {
    throw ConfigError("decode: " + std::to_string(queries.num_stages()) +
                      " stage queries, config expects " + std::to_string(c.num_stages));
  }
  if (queries.content.cols() != c.embed_dim) {
    throw ShapeError("decode: stage queries " + ad::shape_str(queries.content.shape()) +
                     " do not have width " + std::to_string(c.embed_dim));
  }
  ad::Tensor target = queries.content;
  for (const DecoderLayer& layer : params.layers) {
    const ad::Tensor query = ad::add(target, queries.position);
    const ad::Tensor refs = stage_references(query, queries);
    const ad::Tensor attended = ms_deform_attn(query, refs, encoded.pyramid, layer.cross_attn);
    target = layer.attn_norm(ad::add(target, attended));
    target = layer.ffn_norm(ad::add(target, layer.ffn(target)));
  }
  return target;
}

}  // namespace stageformer
