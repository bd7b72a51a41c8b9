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

#include "stageformer/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stageformer/error.hpp"

namespace stageformer::ad {

namespace {

void validate(const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw ConfigError("grad_check: eps must lie in [1e-7, 1e-3], got " +
                      std::to_string(options.eps));
  }
}

double eval_scalar(const std::function<Tensor()>& f) {
  NoGradGuard no_grad;
  const Tensor y = f();
  const double v = y.item();
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: non-finite function value");
  return v;
}

void compare(double analytic, double numeric, std::size_t index, const GradCheckOptions& options,
             GradCheckReport& report) {
  const double abs_err = std::fabs(analytic - numeric);
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), options.abs_floor});
  const double rel = abs_err / denom;
  report.max_abs_error = std::max(report.max_abs_error, abs_err);
  if (rel > report.max_rel_error) {
    report.max_rel_error = rel;
    report.worst_index = index;
  }
  ++report.checked;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           const GradCheckOptions& options) {
  Tensor leaf(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  std::vector<Tensor> leaves{leaf};
  return grad_check_leaves([&] { return f(leaf); }, leaves, options);
}

GradCheckReport grad_check_leaves(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                                  const GradCheckOptions& options) {
  validate(options);
  for (Tensor& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  const Tensor y = f();
  if (y.numel() != 1) {
    throw ShapeError("grad_check: function must be scalar-valued, got " + shape_str(y.shape()));
  }
  if (!std::isfinite(y.item())) throw NonFiniteError("grad_check: non-finite function value");
  backward(y);

  GradCheckReport report;
  std::size_t flat = 0;
  for (Tensor& leaf : leaves) {
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    auto values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i, ++flat) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double up = eval_scalar(f);
      values[i] = saved - options.eps;
      const double down = eval_scalar(f);
      values[i] = saved;
      compare(analytic[i], (up - down) / (2.0 * options.eps), flat, options, report);
    }
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

}  // namespace stageformer::ad
