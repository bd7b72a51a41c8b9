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

#include <gtest/gtest.h>

#include <random>

#include "oracles/naive_deform_attn.hpp"
#include "stageformer/autodiff/ops.hpp"
#include "stageformer/decoder.hpp"
#include "stageformer/error.hpp"

namespace ad = stageformer::ad;
namespace nn = stageformer::nn;
using stageformer::DecoderConfig;
using stageformer::DecoderParams;
using stageformer::EncodedSequence;
using stageformer::FeaturePyramid;

namespace {

DecoderConfig small_config(std::size_t stages = 4) {
  DecoderConfig c;
  c.embed_dim = 8;
  c.ffn_dim = 12;
  c.num_heads = 2;
  c.points = 3;
  c.num_stages = stages;
  return c;
}

EncodedSequence random_encoded(std::size_t t, std::size_t d, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  EncodedSequence e;
  for (std::size_t n = t, l = 0; l < 2; ++l, n = (n + 1) / 2) {
    std::vector<double> v(n * d);
    for (double& x : v) x = u(rng);
    e.pyramid.levels.push_back(ad::Tensor::matrix(n, d, v));
  }
  e.frames = e.pyramid.levels.front();
  return e;
}

void randomize(ad::Tensor t, double stddev, nn::Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  for (double& v : t.mutable_data()) v = n(rng);
}

}  // namespace

TEST(Decoder, OutputIsStagesByWidthForAnyLength) {
  nn::Rng rng(1);
  const DecoderParams p = DecoderParams::create(small_config(), rng);
  for (std::size_t t : {1u, 2u, 5u, 17u}) {
    const ad::Tensor f = stageformer::decode(random_encoded(t, 8, t), p.queries, p);
    EXPECT_EQ(f.shape(), (ad::Shape{4, 8}));
  }
}

TEST(Decoder, ReferencesInOpenUnitInterval) {
  nn::Rng rng(2);
  const DecoderParams p = DecoderParams::create(small_config(), rng);
  const ad::Tensor refs =
      stageformer::stage_references(ad::add(p.queries.content, p.queries.position), p.queries);
  ASSERT_EQ(refs.numel(), 4u);
  for (double r : refs.data()) {
    EXPECT_GT(r, 0.0);
    EXPECT_LT(r, 1.0);
  }
}

TEST(Decoder, ConstantPyramidGivesIdenticalCrossAttention) {
  nn::Rng rng(3);
  DecoderConfig config = small_config();
  config.offset_init = stageformer::OffsetInit::kZero;
  const DecoderParams p = DecoderParams::create(config, rng);
  const std::vector<double> v{0.5, -0.3, 1.2, 0.0, 0.7, -1.1, 0.2, 0.9};
  EncodedSequence e;
  for (std::size_t n : {10u, 5u}) {
    std::vector<double> rows;
    for (std::size_t i = 0; i < n; ++i) rows.insert(rows.end(), v.begin(), v.end());
    e.pyramid.levels.push_back(ad::Tensor::matrix(n, 8, rows));
  }
  e.frames = e.pyramid.levels.front();
  const ad::Tensor query = ad::add(p.queries.content, p.queries.position);
  const ad::Tensor refs = stageformer::stage_references(query, p.queries);
  const ad::Tensor out =
      stageformer::ms_deform_attn(query, refs, e.pyramid, p.layers[0].cross_attn);
  for (std::size_t c = 1; c < 4; ++c)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(out.at(c, j), out.at(0, j), 1e-12);
}

TEST(Decoder, FirstLayerCrossAttentionMatchesOracle) {
  nn::Rng rng(4);
  DecoderParams p = DecoderParams::create(small_config(), rng);
  auto& attn = p.layers[0].cross_attn;
  randomize(attn.offset_pred.weight, 1.0, rng);
  randomize(attn.weight_pred.weight, 1.0, rng);
  const EncodedSequence e = random_encoded(9, 8, 5);
  const ad::Tensor query = ad::add(p.queries.content, p.queries.position);
  const ad::Tensor refs = stageformer::stage_references(query, p.queries);
  const ad::Tensor got = stageformer::ms_deform_attn(query, refs, e.pyramid, attn);
  std::vector<oracle::Matrix> levels;
  for (const auto& l : e.pyramid.levels) levels.push_back(oracle::to_matrix(l));
  const auto want = oracle::ms_deform_attn(
      oracle::to_matrix(query), std::vector<double>(refs.data().begin(), refs.data().end()),
      levels, attn);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(got.at(c, j), want[c][j], 1e-10);
}

TEST(Decoder, Deterministic) {
  auto run = [] {
    nn::Rng rng(6);
    const DecoderParams p = DecoderParams::create(small_config(), rng);
    const ad::Tensor f = stageformer::decode(random_encoded(11, 8, 7), p.queries, p);
    return std::vector<double>(f.data().begin(), f.data().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Decoder, PermutingQueriesPermutesOutputRows) {
  nn::Rng rng(8);
  DecoderParams p = DecoderParams::create(small_config(), rng);
  const EncodedSequence e = random_encoded(12, 8, 9);
  const ad::Tensor f = stageformer::decode(e, p.queries, p);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  auto permute = [&](const ad::Tensor& t) {
    std::vector<double> v;
    for (std::size_t r : perm)
      for (std::size_t j = 0; j < 8; ++j) v.push_back(t.at(r, j));
    return ad::Tensor::matrix(4, 8, v);
  };
  stageformer::StageQueries q = p.queries;
  q.content = permute(p.queries.content);
  q.position = permute(p.queries.position);
  const ad::Tensor g = stageformer::decode(e, q, p);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(g.at(k, j), f.at(perm[k], j));
}

TEST(Decoder, GradientsReachQueriesAndReferencePredictor) {
  nn::Rng rng(10);
  DecoderParams p = DecoderParams::create(small_config(), rng);
  nn::ParameterList params;
  p.collect("dec", params);
  for (auto& np : params) np.tensor.set_requires_grad(true);
  for (auto& layer : p.layers) randomize(layer.cross_attn.offset_pred.weight, 0.5, rng);
  const ad::Tensor f = stageformer::decode(random_encoded(10, 8, 11), p.queries, p);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> w(f.numel());
  for (double& x : w) x = n(rng);
  ad::backward(ad::sum(ad::mul(f, ad::Tensor(f.shape(), w))));
  for (const auto* t : {&p.queries.content, &p.queries.position, &p.queries.reference.weight,
                        &p.queries.reference.bias}) {
    double norm = 0.0;
    for (double g : t->grad()) norm += g * g;
    EXPECT_GT(norm, 1e-20);
  }
}

TEST(Decoder, StageCountMismatchIsConfigError) {
  nn::Rng rng(12);
  const DecoderParams p = DecoderParams::create(small_config(4), rng);
  const DecoderParams other = DecoderParams::create(small_config(3), rng);
  EXPECT_THROW(stageformer::decode(random_encoded(6, 8, 1), other.queries, p),
               stageformer::ConfigError);
}
