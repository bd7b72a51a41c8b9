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

#include "stageformer/monotonic_decode.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "stageformer/error.hpp"

namespace stageformer {

bool is_monotone(std::span<const int> labels) {
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] < labels[i - 1]) return false;
  }
  return true;
}

MonotoneLabeling decode_from_segments(std::span<const double> widths, std::size_t length) {
  if (widths.empty()) throw ShapeError("decode_from_segments: no stages");
  const int last = static_cast<int>(widths.size()) - 1;
  MonotoneLabeling out;
  out.labels.resize(length);
  int stage = 0;
  double boundary = widths[0];
  for (std::size_t i = 0; i < length; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(length);
    while (stage < last && !(t < boundary)) {
      ++stage;
      boundary += widths[static_cast<std::size_t>(stage)];
    }
    out.labels[i] = stage;
  }
  return out;
}

MonotoneLabeling decode_from_segments(const SegmentPrediction& seg, std::size_t length) {
  return decode_from_segments(seg.widths.data(), length);
}

std::vector<int> decode_argmax(const ad::Tensor& scores) {
  const std::size_t rows = scores.rows(), cols = scores.cols();
  std::vector<int> out(rows, 0);
  const auto v = scores.data();
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (v[i * cols + c] > v[i * cols + best]) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> decode_argmax(const FramePrediction& pred) { return decode_argmax(pred.probs); }

double labeling_score(std::span<const double> log_probs, std::size_t num_stages,
                      std::span<const int> labels) {
  if (labels.size() * num_stages != log_probs.size()) {
    throw ShapeError("labeling_score: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(log_probs.size()) + " scores");
  }
  double score = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    score += log_probs[i * num_stages + static_cast<std::size_t>(labels[i])];
  }
  return score;
}

MonotoneLabeling dp_monotonic(std::span<const double> log_probs, std::size_t num_stages) {
  if (num_stages == 0 || log_probs.size() % num_stages != 0) {
    throw ShapeError("dp_monotonic: " + std::to_string(log_probs.size()) +
                     " scores do not form rows of " + std::to_string(num_stages));
  }
  for (double v : log_probs) {
    if (!std::isfinite(v)) throw NonFiniteError("dp_monotonic: non-finite score");
  }
  const std::size_t length = log_probs.size() / num_stages;
  MonotoneLabeling out;
  if (length == 0) return out;

  const std::size_t c_n = num_stages;
  // best[i][c]: top score of a monotone prefix ending at frame i in stage c.
  // from[i][c]: stage of frame i - 1 on that path.
  std::vector<double> best(log_probs.begin(), log_probs.begin() + static_cast<long>(c_n));
  std::vector<double> next(c_n);
  std::vector<std::size_t> from(length * c_n, 0);
  for (std::size_t i = 1; i < length; ++i) {
    double run_max = -std::numeric_limits<double>::infinity();
    std::size_t run_arg = 0;
    for (std::size_t c = 0; c < c_n; ++c) {
      if (best[c] > run_max) {
        run_max = best[c];
        run_arg = c;
      }
      next[c] = log_probs[i * c_n + c] + run_max;
      from[i * c_n + c] = run_arg;
    }
    best.swap(next);
  }

  std::size_t stage = 0;
  for (std::size_t c = 1; c < c_n; ++c) {
    if (best[c] > best[stage]) stage = c;
  }
  out.score = best[stage];
  out.labels.resize(length);
  for (std::size_t i = length; i-- > 0;) {
    out.labels[i] = static_cast<int>(stage);
    stage = from[i * c_n + stage];
  }
  return out;
}

}  // namespace stageformer
