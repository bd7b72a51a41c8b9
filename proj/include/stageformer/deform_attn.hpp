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
#include <span>
#include <string>
#include <vector>

#include "stageformer/autodiff/tensor.hpp"
#include "stageformer/nn.hpp"

namespace stageformer {

// Multi-scale temporal feature map. Level 0 is the full-rate sequence; each
// further level halves the length (rounding up). All levels share a width.
struct FeaturePyramid {
  std::vector<ad::Tensor> levels;

  std::size_t num_levels() const { return levels.size(); }
  std::size_t width() const;
  std::vector<std::size_t> lengths() const;
  std::size_t total_length() const;
  // All levels stacked row-wise, level 0 first.
  ad::Tensor stacked() const;
  void validate() const;
};

// Initial sampling pattern. kZero puts every sample on the reference point,
// which the offset gradient rarely moves away from. kGrid spreads them: head a, point k starts at offset
// (a even ? +1 : -1) * (k + 1) * 2^(a / 2) cells on every level.
enum class OffsetInit { kZero, kGrid };

const char* to_string(OffsetInit init);
OffsetInit parse_offset_init(const std::string& name);

struct DeformAttnConfig {
  std::size_t dim = 64;
  std::size_t heads = 8;
  std::size_t levels = 2;
  std::size_t points = 4;
  OffsetInit offset_init = OffsetInit::kGrid;

  std::size_t head_dim() const { return dim / heads; }
  // Sampling slots per query, laid out as [head][level][point].
  std::size_t slots() const { return heads * levels * points; }
  void validate() const;
};

struct DeformAttnParams {
  DeformAttnConfig config;
  nn::Linear value_proj;
  nn::Linear output_proj;
  nn::Linear offset_pred;
  nn::Linear weight_pred;

  // Offset and weight predictor weights start at zero, so initial offsets
  // are input-independent (the bias pattern of config.offset_init) and
  // attention weights are uniform.
  static DeformAttnParams create(const DeformAttnConfig& config, nn::Rng& rng);
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

// Sampling positions for one query, in cells of each level:
// position[a][l][k] = reference * (T_l - 1) + offset[a][l][k]. No clamping;
// out-of-range positions read zero-padded values.
std::vector<double> sampling_locations(double reference, std::span<const double> offsets,
                                       std::span<const std::size_t> lengths, std::size_t heads,
                                       std::size_t points);

// Batched, differentiable form: refs has Nq entries, offsets is Nq x slots.
ad::Tensor sampling_locations(const ad::Tensor& refs, const ad::Tensor& offsets,
                              std::span<const std::size_t> lengths, std::size_t heads,
                              std::size_t points);

// Per-head softmax of the predicted raw weights over the joint
// (level, point) slots. Returns Nq x slots.
ad::Tensor attention_weights(const ad::Tensor& queries, const DeformAttnParams& params);

// Weighted interpolated gather. values holds the stacked, value-projected
// pyramid (sum T_l x d); head a reads channels [a*dh, (a+1)*dh).
ad::Tensor deform_sample(const ad::Tensor& values, std::span<const std::size_t> lengths,
                         const ad::Tensor& positions, const ad::Tensor& weights,
                         std::size_t heads, std::size_t points);

// Multi-scale deformable attention over a temporal pyramid. queries is
// Nq x d, refs holds Nq normalized reference points in [0, 1].
ad::Tensor ms_deform_attn(const ad::Tensor& queries, const ad::Tensor& refs,
                          const FeaturePyramid& pyramid, const DeformAttnParams& params);

}  // namespace stageformer
