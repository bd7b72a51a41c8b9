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

#include "stageformer/model.hpp"

#include "stageformer/error.hpp"

namespace stageformer {

std::string HeadSet::str() const {
  std::string s;
  auto put = [&s](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  put(cls, "cls");
  put(seg, "seg");
  put(col, "col");
  return s.empty() ? "none" : s;
}

EncoderConfig ModelConfig::encoder() const {
  EncoderConfig c;
  c.input_dim = input_dim;
  c.embed_dim = embed_dim;
  c.num_layers = encoder_layers;
  c.num_levels = levels;
  c.ffn_dim = ffn_dim;
  c.num_heads = heads;
  c.points = points;
  c.offset_init = offset_init;
  return c;
}

DecoderConfig ModelConfig::decoder() const {
  DecoderConfig c;
  c.embed_dim = embed_dim;
  c.num_layers = decoder_layers;
  c.num_levels = levels;
  c.ffn_dim = ffn_dim;
  c.num_heads = heads;
  c.points = points;
  c.num_stages = num_stages;
  c.offset_init = offset_init;
  return c;
}

void ModelConfig::validate() const {
  encoder().validate();
  decoder().validate();
  if (!(alpha > 0.0)) throw ConfigError("model: alpha must be positive");
}

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  nn::Rng rng(seed);
  Model m;
  m.config = config;
  m.encoder = EncoderParams::create(config.encoder(), rng);
  m.decoder = DecoderParams::create(config.decoder(), rng);
  m.cls = ClassificationHead::create(config.embed_dim, config.num_stages, rng);
  m.seg = SegmentationHead::create(config.embed_dim, rng);
  m.col = CollaborationHead::create(config.embed_dim, rng);
  return m;
}

nn::ParameterList Model::parameters() const {
  nn::ParameterList out;
  encoder.collect("encoder", out);
  decoder.collect("decoder", out);
  cls.collect("cls_head", out);
  seg.collect("seg_head", out);
  col.collect("col_head", out);
  return out;
}

std::size_t Model::num_parameters() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

HeadOutputs forward(const Model& model, const ad::Tensor& features, const HeadSet& heads) {
  if (!heads.any()) throw ConfigError("forward: no prediction head enabled");
  if (features.ndim() != 2 || features.cols() != model.config.input_dim) {
    throw ShapeError("forward: features " + ad::shape_str(features.shape()) +
                     " do not match input_dim " + std::to_string(model.config.input_dim));
  }
  const EncodedSequence encoded = encode(features, model.encoder);
  HeadOutputs out;
  if (heads.cls) out.cls = classification_head(encoded.frames, model.cls);
  if (!heads.needs_decoder()) return out;

  const ad::Tensor stages = decode(encoded, model.decoder.queries, model.decoder);
  out.seg = segmentation_head(stages, model.seg);
  if (heads.col) {
    out.col = collaboration_head(encoded.frames, stages, *out.seg, model.col, model.config.alpha);
  }
  return out;
}

}  // namespace stageformer
