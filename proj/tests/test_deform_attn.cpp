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

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles/naive_deform_attn.hpp"
#include "stageformer/autodiff/grad_check.hpp"
#include "stageformer/autodiff/ops.hpp"
#include "stageformer/deform_attn.hpp"
#include "stageformer/error.hpp"

namespace ad = stageformer::ad;
namespace nn = stageformer::nn;
using stageformer::ConfigError;
using stageformer::DeformAttnConfig;
using stageformer::DeformAttnParams;
using stageformer::FeaturePyramid;
using stageformer::OffsetInit;
using stageformer::parse_offset_init;

namespace {

void fill_normal(ad::Tensor t, double stddev, nn::Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  for (double& v : t.mutable_data()) v = n(rng);
}

DeformAttnParams random_params(const DeformAttnConfig& c, nn::Rng& rng, double offset_std = 1.0) {
  DeformAttnParams p = DeformAttnParams::create(c, rng);
  fill_normal(p.offset_pred.weight, offset_std, rng);
  fill_normal(p.offset_pred.bias, offset_std, rng);
  fill_normal(p.weight_pred.weight, 1.0, rng);
  fill_normal(p.weight_pred.bias, 1.0, rng);
  fill_normal(p.value_proj.bias, 0.5, rng);
  fill_normal(p.output_proj.bias, 0.5, rng);
  return p;
}

FeaturePyramid random_pyramid(std::size_t length, std::size_t levels, std::size_t d, nn::Rng& rng) {
  FeaturePyramid pyr;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t l = 0; l < levels; ++l) {
    std::vector<double> v(length * d);
    for (double& x : v) x = u(rng);
    pyr.levels.push_back(ad::Tensor::matrix(length, d, v, true));
    length = (length + 1) / 2;
  }
  return pyr;
}

ad::Tensor random_matrix(std::size_t r, std::size_t c, nn::Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return ad::Tensor::matrix(r, c, v, true);
}

ad::Tensor random_refs(std::size_t n, nn::Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return ad::Tensor::vector(v, true);
}

std::vector<oracle::Matrix> oracle_levels(const FeaturePyramid& p) {
  std::vector<oracle::Matrix> out;
  for (const auto& l : p.levels) out.push_back(oracle::to_matrix(l));
  return out;
}

}  // namespace

TEST(SamplingLocations, Examples) {
  const std::vector<std::size_t> nine{9}, five{5};
  EXPECT_DOUBLE_EQ(stageformer::sampling_locations(0.5, std::vector<double>{0.0}, nine, 1, 1)[0],
                   4.0);
  const std::vector<double> offsets{0.3, -1.7, 2.2};
  const auto at_zero = stageformer::sampling_locations(0.0, offsets, nine, 3, 1);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(at_zero[i], offsets[i]);
  EXPECT_DOUBLE_EQ(stageformer::sampling_locations(1.0, std::vector<double>{0.5}, five, 1, 1)[0],
                   4.5);
}

TEST(SamplingLocations, RejectsReferenceOutsideUnitInterval) {
  const std::vector<std::size_t> len{4};
  EXPECT_THROW(stageformer::sampling_locations(1.5, std::vector<double>{0.0}, len, 1, 1),
               stageformer::DataError);
  EXPECT_THROW(stageformer::sampling_locations(-0.1, std::vector<double>{0.0}, len, 1, 1),
               stageformer::DataError);
}

TEST(DeformAttn, MatchesNaiveOracle) {
  nn::Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const DeformAttnConfig c{4, 2, 2, 2};
    const DeformAttnParams p = random_params(c, rng, 1.5);
    const FeaturePyramid pyr = random_pyramid(6, 2, 4, rng);
    const ad::Tensor q = random_matrix(5, 4, rng);
    const ad::Tensor refs = random_refs(5, rng);
    const ad::Tensor got = stageformer::ms_deform_attn(q, refs, pyr, p);
    const oracle::Matrix want = oracle::ms_deform_attn(
        oracle::to_matrix(q), std::vector<double>(refs.data().begin(), refs.data().end()),
        oracle_levels(pyr), p);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got.at(i, j), want[i][j], 1e-10);
  }
}

TEST(DeformAttn, MatchesOracleOnDefaultShapes) {
  nn::Rng rng(12);
  const DeformAttnConfig c{16, 8, 3, 4};
  const DeformAttnParams p = random_params(c, rng, 2.0);
  const FeaturePyramid pyr = random_pyramid(11, 3, 16, rng);
  const ad::Tensor q = random_matrix(7, 16, rng);
  const ad::Tensor refs = random_refs(7, rng);
  const ad::Tensor got = stageformer::ms_deform_attn(q, refs, pyr, p);
  const oracle::Matrix want = oracle::ms_deform_attn(
      oracle::to_matrix(q), std::vector<double>(refs.data().begin(), refs.data().end()),
      oracle_levels(pyr), p);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(got.at(i, j), want[i][j], 1e-10);
}

TEST(DeformAttn, IdentityReductionGathersAtReference) {
  nn::Rng rng(13);
  const std::size_t d = 3, length = 7;
  DeformAttnParams p = DeformAttnParams::create({d, 1, 1, 1, OffsetInit::kZero}, rng);
  for (auto* lin : {&p.value_proj, &p.output_proj}) {
    auto w = lin->weight.mutable_data();
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 1.0;
    auto b = lin->bias.mutable_data();
    std::fill(b.begin(), b.end(), 0.0);
  }
  const FeaturePyramid pyr = random_pyramid(length, 1, d, rng);
  for (std::size_t j = 0; j < length; ++j) {
    const double ref = static_cast<double>(j) / static_cast<double>(length - 1);
    const ad::Tensor out = stageformer::ms_deform_attn(random_matrix(1, d, rng),
                                                       ad::Tensor::vector({ref}), pyr, p);
    for (std::size_t c = 0; c < d; ++c) EXPECT_DOUBLE_EQ(out.at(0, c), pyr.levels[0].at(j, c));
  }
}

TEST(DeformAttn, ConstantPyramidGivesProjectedValue) {
  nn::Rng rng(14);
  const std::size_t d = 4;
  // Small offsets and interior references keep every sample inside the
  // levels, where zero padding plays no part.
  const DeformAttnParams p = random_params({d, 2, 2, 3}, rng, 0.05);
  const std::vector<double> v{0.3, -1.2, 0.8, 2.0};
  FeaturePyramid pyr;
  for (std::size_t len : {12u, 6u}) {
    std::vector<double> rows;
    for (std::size_t i = 0; i < len; ++i) rows.insert(rows.end(), v.begin(), v.end());
    pyr.levels.push_back(ad::Tensor::matrix(len, d, rows));
  }
  const auto projected = oracle::apply_linear(p.output_proj, oracle::apply_linear(p.value_proj, v));
  const ad::Tensor out =
      stageformer::ms_deform_attn(random_matrix(6, d, rng), random_refs(6, rng, 0.2, 0.8), pyr, p);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(out.at(i, c), projected[c], 1e-12);
}

TEST(DeformAttn, AttentionWeightsAreSimplexPerHead) {
  nn::Rng rng(15);
  const DeformAttnConfig c{8, 4, 2, 3};
  const DeformAttnParams p = random_params(c, rng);
  const ad::Tensor w = stageformer::attention_weights(random_matrix(5, 8, rng), p);
  for (std::size_t q = 0; q < 5; ++q)
    for (std::size_t a = 0; a < c.heads; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < c.levels * c.points; ++j) {
        const double x = w.at(q, a * c.levels * c.points + j);
        EXPECT_GE(x, 0.0);
        s += x;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(DeformAttn, PermutingQueriesPermutesOutputs) {
  nn::Rng rng(16);
  const DeformAttnParams p = random_params({4, 2, 2, 2}, rng);
  const FeaturePyramid pyr = random_pyramid(8, 2, 4, rng);
  const ad::Tensor q = random_matrix(6, 4, rng);
  const ad::Tensor refs = random_refs(6, rng);
  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> pq, pr;
  for (std::size_t i : perm) {
    for (std::size_t c = 0; c < 4; ++c) pq.push_back(q.at(i, c));
    pr.push_back(refs.at(i));
  }
  const ad::Tensor out = stageformer::ms_deform_attn(q, refs, pyr, p);
  const ad::Tensor pout = stageformer::ms_deform_attn(ad::Tensor::matrix(6, 4, pq),
                                                      ad::Tensor::vector(pr), pyr, p);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(pout.at(k, c), out.at(perm[k], c));
}

TEST(DeformAttn, GradCheckAllInputsAndParameters) {
  nn::Rng rng(17);
  const DeformAttnParams p = random_params({4, 2, 2, 2}, rng, 1.0);
  FeaturePyramid pyr = random_pyramid(6, 2, 4, rng);
  ad::Tensor q = random_matrix(4, 4, rng);
  ad::Tensor refs = random_refs(4, rng, 0.05, 0.95);
  const ad::Tensor mix = random_matrix(4, 4, rng).detach();
  nn::ParameterList params;
  p.collect("attn", params);
  std::vector<ad::Tensor> leaves{q, refs, pyr.levels[0], pyr.levels[1]};
  for (auto& np : params) leaves.push_back(np.tensor);
  const auto report = ad::grad_check_leaves(
      [&] { return ad::sum(ad::mul(stageformer::ms_deform_attn(q, refs, pyr, p), mix)); },
      leaves);
  EXPECT_TRUE(report.passed) << "max rel error " << report.max_rel_error << " at "
                             << report.worst_index;
}

TEST(DeformAttn, ConfigValidation) {
  nn::Rng rng(18);
  EXPECT_THROW(DeformAttnParams::create({6, 4, 1, 1}, rng), stageformer::ConfigError);
  const DeformAttnParams p = DeformAttnParams::create({4, 2, 2, 2}, rng);
  const FeaturePyramid wrong_levels = random_pyramid(6, 3, 4, rng);
  EXPECT_THROW(stageformer::ms_deform_attn(random_matrix(2, 4, rng), random_refs(2, rng),
                                           wrong_levels, p),
               stageformer::ShapeError);
}

TEST(DeformAttn, ZeroInitializedPredictors) {
  nn::Rng rng(19);
  const DeformAttnParams p = DeformAttnParams::create({8, 2, 2, 4, OffsetInit::kZero}, rng);
  for (const auto* t : {&p.offset_pred.weight, &p.offset_pred.bias, &p.weight_pred.weight,
                        &p.weight_pred.bias}) {
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(DeformAttn, GridInitSpreadsOffsetBias) {
  nn::Rng rng(19);
  DeformAttnConfig c{8, 4, 2, 3};
  c.offset_init = OffsetInit::kGrid;
  const DeformAttnParams p = DeformAttnParams::create(c, rng);
  for (double v : p.offset_pred.weight.data()) EXPECT_EQ(v, 0.0);
  for (double v : p.weight_pred.bias.data()) EXPECT_EQ(v, 0.0);
  const auto bias = p.offset_pred.bias.data();
  const double expected[4] = {1.0, -1.0, 2.0, -2.0};
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t k = 0; k < 3; ++k)
        EXPECT_EQ(bias[(a * 2 + l) * 3 + k], expected[a] * static_cast<double>(k + 1));
  EXPECT_EQ(parse_offset_init("grid"), OffsetInit::kGrid);
  EXPECT_THROW(parse_offset_init("random"), ConfigError);
}
