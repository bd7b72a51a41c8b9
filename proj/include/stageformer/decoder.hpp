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
#include "stageformer/encoder.hpp"
#include "stageformer/nn.hpp"

namespace stageformer {

struct DecoderConfig {
  std::size_t embed_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_levels = 2;
  std::size_t ffn_dim = 64;
  std::size_t num_heads = 8;
  std::size_t points = 4;
  OffsetInit offset_init = OffsetInit::kGrid;
  std::size_t num_stages = 4;

  DeformAttnConfig attention() const {
    return {embed_dim, num_heads, num_levels, points, offset_init};
  }
  void validate() const;
};

// One learnable query per stage; row c belongs to stage c.
struct StageQueries {
  ad::Tensor content;    // C x d
  ad::Tensor position;   // C x d, added to the query input of every layer
  nn::Linear reference;  // d -> 1, followed by a sigmoid

  std::size_t num_stages() const { return content.rows(); }
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

struct DecoderLayer {
  DeformAttnParams cross_attn;
  nn::LayerNorm attn_norm;
  nn::FeedForward ffn;
  nn::LayerNorm ffn_norm;
};

struct DecoderParams {
  DecoderConfig config;
  StageQueries queries;
  std::vector<DecoderLayer> layers;

  static DecoderParams create(const DecoderConfig& config, nn::Rng& rng);
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

// sigmoid(reference(query)), one normalized reference per stage query.
ad::Tensor stage_references(const ad::Tensor& query, const StageQueries& queries);

// Refines the stage queries through deformable cross-attention over the
// encoder pyramid. Returns F_dec (C x d), ordered by stage.
ad::Tensor decode(const EncodedSequence& encoded, const StageQueries& queries,
                  const DecoderParams& params);

}  // namespace stageformer
