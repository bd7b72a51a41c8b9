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
#include <cstdint>
#include <string>

#include "stageformer/decoder.hpp"
#include "stageformer/encoder.hpp"
#include "stageformer/heads.hpp"
#include "stageformer/nn.hpp"

namespace stageformer {

// Which prediction heads a model trains and evaluates.
struct HeadSet {
  bool cls = true;
  bool seg = true;
  bool col = true;

  bool any() const { return cls || seg || col; }
  // Decoder features are needed by the segmentation and collaboration heads.
  bool needs_decoder() const { return seg || col; }
  std::string str() const;
};

struct ModelConfig {
  std::size_t input_dim = 32;
  std::size_t embed_dim = 64;
  std::size_t ffn_dim = 64;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t levels = 2;
  std::size_t heads = 8;
  std::size_t points = 4;
  std::size_t num_stages = 4;
  double alpha = 0.1;
  OffsetInit offset_init = OffsetInit::kGrid;

  EncoderConfig encoder() const;
  DecoderConfig decoder() const;
  void validate() const;
};

struct Model {
  ModelConfig config;
  EncoderParams encoder;
  DecoderParams decoder;
  ClassificationHead cls;
  SegmentationHead seg;
  CollaborationHead col;

  static Model create(const ModelConfig& config, std::uint64_t seed);

  // Every trainable tensor with a stable dotted name, in a fixed order.
  nn::ParameterList parameters() const;
  std::size_t num_parameters() const;
};

// Runs the encoder, the decoder when needed, and the requested heads on one
// T x input_dim sequence. The collaboration head consumes segment
// predictions, so `col` also fills `seg`.
HeadOutputs forward(const Model& model, const ad::Tensor& features, const HeadSet& heads);

}  // namespace stageformer
