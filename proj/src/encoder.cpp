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

#include "stageformer/encoder.hpp"

#include <cmath>

#include "stageformer/autodiff/ops.hpp"
#include "stageformer/error.hpp"

namespace stageformer {

void EncoderConfig::validate() const {
  if (input_dim == 0) throw ConfigError("encoder: input_dim must be positive");
  if (embed_dim == 0) throw ConfigError("encoder: embed_dim must be positive");
  if (num_layers == 0) throw ConfigError("encoder: num_layers must be >= 1");
  if (num_levels == 0) throw ConfigError("encoder: num_levels must be >= 1");
  if (ffn_dim == 0) throw ConfigError("encoder: ffn_dim must be positive");
  attention().validate();
}

EncoderParams EncoderParams::create(const EncoderConfig& config, nn::Rng& rng) {
  config.validate();
  const std::size_t d = config.embed_dim;
  EncoderParams p;
  p.config = config;
  p.embed = nn::Linear::create(config.input_dim, d, rng);
  for (std::size_t l = 1; l < config.num_levels; ++l) {
    p.downsample.push_back({nn::kaiming_uniform({d, d, 3}, 3 * d, rng), nn::zero_parameter({d})});
  }
  p.level_embed = nn::normal_parameter({config.num_levels, d}, 1.0, rng);
  for (std::size_t i = 0; i < config.num_layers; ++i) {
    EncoderLayer layer;
    layer.attn = DeformAttnParams::create(config.attention(), rng);
    layer.attn_norm = nn::LayerNorm::create(d);
    layer.ffn = nn::FeedForward::create(d, config.ffn_dim, d, rng);
    layer.ffn_norm = nn::LayerNorm::create(d);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void EncoderParams::collect(const std::string& prefix, nn::ParameterList& out) const {
  embed.collect(prefix + ".embed", out);
  for (std::size_t l = 0; l < downsample.size(); ++l) {
    const std::string name = prefix + ".downsample." + std::to_string(l);
    out.push_back({name + ".weight", downsample[l].weight});
    out.push_back({name + ".bias", downsample[l].bias});
  }
  out.push_back({prefix + ".level_embed", level_embed});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string name = prefix + ".layers." + std::to_string(i);
    layers[i].attn.collect(name + ".attn", out);
    layers[i].attn_norm.collect(name + ".attn_norm", out);
    layers[i].ffn.collect(name + ".ffn", out);
    layers[i].ffn_norm.collect(name + ".ffn_norm", out);
  }
}

ad::Tensor positional_encoding(std::size_t length, std::size_t dim, double step) {
  std::vector<double> pe(length * dim);
  for (std::size_t j = 0; j < length; ++j) {
    const double t = static_cast<double>(j) * step;
    for (std::size_t c = 0; c < dim; ++c) {
      const double expo = static_cast<double>(c - c % 2) / static_cast<double>(dim);
      const double angle = t / std::pow(10000.0, expo);
      pe[j * dim + c] = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return ad::Tensor::matrix(length, dim, std::move(pe));
}

ad::Tensor grid_references(const std::vector<std::size_t>& lengths) {
  std::vector<double> refs;
  for (std::size_t n : lengths) {
    for (std::size_t j = 0; j < n; ++j) {
      refs.push_back(n > 1 ? static_cast<double>(j) / static_cast<double>(n - 1) : 0.0);
    }
  }
  return ad::Tensor::vector(std::move(refs));
}

ad::Tensor embed_frames(const ad::Tensor& features, const EncoderParams& params) {
  const EncoderConfig& c = params.config;
  if (features.ndim() != 2 || features.cols() != c.input_dim || features.rows() == 0) {
    throw ShapeError("embed_frames: features " + ad::shape_str(features.shape()) +
                     " do not match T x " + std::to_string(c.input_dim));
  }
  return ad::add(params.embed(features), positional_encoding(features.rows(), c.embed_dim));
}

FeaturePyramid build_pyramid(const ad::Tensor& frames, const EncoderParams& params) {
  FeaturePyramid pyramid;
  pyramid.levels.push_back(frames);
  for (const DownsampleConv& conv : params.downsample) {
    pyramid.levels.push_back(ad::conv1d(pyramid.levels.back(), conv.weight, conv.bias, 2, 1));
  }
  return pyramid;
}

ad::Tensor encoder_queries(const FeaturePyramid& pyramid, const EncoderParams& params) {
  const std::size_t d = params.config.embed_dim;
  std::vector<ad::Tensor> parts;
  parts.reserve(pyramid.num_levels());
  for (std::size_t l = 0; l < pyramid.num_levels(); ++l) {
    const std::size_t n = pyramid.levels[l].rows();
    const ad::Tensor level_row = ad::slice_rows(params.level_embed, l, 1);
    const ad::Tensor pos = positional_encoding(n, d, std::ldexp(1.0, static_cast<int>(l)));
    parts.push_back(ad::add_row(ad::add(pyramid.levels[l], pos), level_row));
  }
  return parts.size() == 1 ? parts.front() : ad::concat_rows(parts);
}

EncodedSequence encode(const ad::Tensor& features, const EncoderParams& params) {
  FeaturePyramid pyramid = build_pyramid(embed_frames(features, params), params);
  const std::vector<std::size_t> lengths = pyramid.lengths();
  const ad::Tensor refs = grid_references(lengths);

  for (const EncoderLayer& layer : params.layers) {
    const ad::Tensor x = pyramid.stacked();
    const ad::Tensor queries = encoder_queries(pyramid, params);
    ad::Tensor h = layer.attn_norm(ad::add(x, ms_deform_attn(queries, refs, pyramid, layer.attn)));
    h = layer.ffn_norm(ad::add(h, layer.ffn(h)));

    FeaturePyramid next;
    std::size_t row = 0;
    for (std::size_t n : lengths) {
      next.levels.push_back(ad::slice_rows(h, row, n));
      row += n;
    }
    pyramid = std::move(next);
  }
  EncodedSequence out;
  out.frames = pyramid.levels.front();
  out.pyramid = std::move(pyramid);
  return out;
}

}  // namespace stageformer
