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
#include <string>
#include <vector>

#include "stageformer/autodiff/tensor.hpp"
#include "stageformer/deform_attn.hpp"
#include "stageformer/nn.hpp"

namespace stageformer {

struct EncoderConfig {
  std::size_t input_dim = 32;
  std::size_t embed_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_levels = 2;
  std::size_t ffn_dim = 64;
  std::size_t num_heads = 8;
  std::size_t points = 4;
  OffsetInit offset_init = OffsetInit::kGrid;

  DeformAttnConfig attention() const {
    return {embed_dim, num_heads, num_levels, points, offset_init};
  }
  void validate() const;
};

// Kernel-3, stride-2, padding-1 temporal convolution between pyramid levels.
struct DownsampleConv {
  ad::Tensor weight;  // d x d x 3
  ad::Tensor bias;    // d
};

struct EncoderLayer {
  DeformAttnParams attn;
  nn::LayerNorm attn_norm;
  nn::FeedForward ffn;
  nn::LayerNorm ffn_norm;
};

struct EncoderParams {
  EncoderConfig config;
  nn::Linear embed;
  std::vector<DownsampleConv> downsample;  // num_levels - 1 entries
  ad::Tensor level_embed;                  // num_levels x d
  std::vector<EncoderLayer> layers;

  static EncoderParams create(const EncoderConfig& config, nn::Rng& rng);
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

struct EncodedSequence {
  ad::Tensor frames;  // T x d, level-0 rows after the last layer
  FeaturePyramid pyramid;
};

// Fixed sinusoidal encoding: row j encodes time j * step; channel 2i holds
// sin(t / 10000^(2i/d)) and channel 2i+1 the matching cos.
ad::Tensor positional_encoding(std::size_t length, std::size_t dim, double step = 1.0);

// Normalized reference of each pyramid position, j / (T_l - 1) (0 for a
// single-cell level), levels stacked.
ad::Tensor grid_references(const std::vector<std::size_t>& lengths);

// Linear projection to the embedding width plus the positional encoding.
ad::Tensor embed_frames(const ad::Tensor& features, const EncoderParams& params);

FeaturePyramid build_pyramid(const ad::Tensor& frames, const EncoderParams& params);

// Self-attention queries for a pyramid: features plus the positional
// encoding at each level's time scale plus the level embedding.
ad::Tensor encoder_queries(const FeaturePyramid& pyramid, const EncoderParams& params);

EncodedSequence encode(const ad::Tensor& features, const EncoderParams& params);

}  // namespace stageformer
