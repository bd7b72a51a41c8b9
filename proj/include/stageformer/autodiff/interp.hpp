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

#include <cmath>

namespace stageformer::ad {

// One linear-interpolation read of a strided 1-D signal with zero padding:
// cells outside [0, n) read as 0, so a position contributes nothing once it
// is a full cell beyond either end.
struct LinearSample {
  double value;
  double slope;  // d value / d position
  long lo;       // left neighbour index (may be out of range)
  double frac;   // weight of lo + 1
};

inline LinearSample sample_linear(const double* src, long n, long stride, double pos) {
  const double fl = std::floor(pos);
  const long lo = static_cast<long>(fl);
  const double frac = pos - fl;
  const double v0 = (lo >= 0 && lo < n) ? src[lo * stride] : 0.0;
  const double v1 = (lo + 1 >= 0 && lo + 1 < n) ? src[(lo + 1) * stride] : 0.0;
  return {v0 + frac * (v1 - v0), v1 - v0, lo, frac};
}

}  // namespace stageformer::ad
