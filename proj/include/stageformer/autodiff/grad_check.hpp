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
#include <functional>
#include <span>

#include "stageformer/autodiff/tensor.hpp"

namespace stageformer::ad {

struct GradCheckOptions {
  double eps = 1e-5;  // must lie in [1e-7, 1e-3]
  double tol = 1e-4;
  // Denominator floor for the relative error, so gradients that are zero on
  // both sides compare as exact instead of 0/0.
  double abs_floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = true;
};

// Compares the reverse-mode gradient of scalar f at x with central finite
// differences. x is copied into a fresh leaf; the caller's tensor is untouched.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           const GradCheckOptions& options = {});

// Same comparison for a closure over existing leaves (e.g. model parameters).
// Leaf values are perturbed in place and restored; leaf grads are left
// holding the analytic gradient.
GradCheckReport grad_check_leaves(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                                  const GradCheckOptions& options = {});

}  // namespace stageformer::ad
