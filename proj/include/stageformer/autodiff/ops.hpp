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
#include <vector>

#include "stageformer/autodiff/tensor.hpp"

// Differentiable ops. Every op rejects non-finite inputs and mismatched
// shapes with an error naming the op. Matrices are row-major; a sequence of
// T frames with d channels is a T x d matrix.
namespace stageformer::ad {

// Throws NonFiniteError naming `op` if any value of `t` is NaN or Inf.
void check_finite(const char* op, const Tensor& t);

// --- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x (m x in) * w (in x out) + bias (out). `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
// q (m x d) k(n x d)^T / sqrt(d).
Tensor scaled_dot_product(const Tensor& q, const Tensor& k);

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
// Adds a length-n row to every row of an m x n matrix.
Tensor add_row(const Tensor& x, const Tensor& row);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// Natural log; every input must be strictly positive.
Tensor log(const Tensor& a);
Tensor clamp_min(const Tensor& a, double lo);

// --- normalization ----------------------------------------------------------

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);
// Normalizes each row (last axis) then applies gamma/beta of that width.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// --- sequence ops -----------------------------------------------------------

// x: T x c_in, weight: c_out x c_in x kernel, bias: c_out (may be undefined).
// Zero padding; output length floor((T + 2*padding - kernel) / stride) + 1.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t padding);
Tensor cumsum(const Tensor& x, std::size_t axis);
// Linear interpolation of 1-D `values` at fractional `positions`; reads zero
// outside [0, n-1]. Differentiable w.r.t. both values and positions.
Tensor interp_gather(const Tensor& values, const Tensor& positions);

// --- reductions and indexing ------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// out[i] = x[i, index[i]] for an m x n matrix.
Tensor pick(const Tensor& x, std::span<const std::size_t> index);

// --- shape ------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
// Tiles an n-element row m times (m x n).
Tensor repeat_rows(const Tensor& row, std::size_t m);
// Tiles an m-element column n times (m x n).
Tensor repeat_cols(const Tensor& col, std::size_t n);

}  // namespace stageformer::ad
