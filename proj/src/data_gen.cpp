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

#include "stageformer/data_gen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "stageformer/error.hpp"
#include "stageformer/losses.hpp"

namespace stageformer {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string sequence_id(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "seq-" + digits;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

ad::Tensor StageSequence::feature_tensor() const {
  return ad::Tensor::matrix(length(), dim, features);
}

void StageSequence::validate() const {
  if (dim == 0) throw DataError("sequence " + id + ": feature dimension is zero");
  if (features.empty() || features.size() % dim != 0) {
    throw DataError("sequence " + id + ": " + std::to_string(features.size()) +
                    " feature values do not form rows of " + std::to_string(dim));
  }
  if (num_stages == 0) throw DataError("sequence " + id + ": number of stages is zero");
  for (double v : features) {
    if (!std::isfinite(v)) throw DataError("sequence " + id + ": non-finite feature value");
  }
  if (!has_labels()) return;
  if (labels.size() != length()) {
    throw DataError("sequence " + id + ": " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(length()) + " frames");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_stages) {
      throw DataError("sequence " + id + ": label " + std::to_string(labels[i]) + " at frame " +
                      std::to_string(i) + " outside [0, " + std::to_string(num_stages) + ")");
    }
  }
  if (const auto bad = first_monotonicity_violation(labels)) {
    throw DataError("sequence " + id + ": labels decrease at frame " + std::to_string(*bad));
  }
}

GenSpec GenSpec::human() { return GenSpec{}; }

GenSpec GenSpec::mouse() {
  GenSpec spec;
  spec.num_stages = 8;
  spec.min_stage_fraction = 0.02;
  return spec;
}

void GenSpec::validate() const {
  if (num_stages == 0) throw ConfigError("gen spec: num_stages must be >= 1");
  if (input_dim == 0) throw ConfigError("gen spec: input_dim must be >= 1");
  if (t_min == 0 || t_min > t_max) {
    throw ConfigError("gen spec: need 1 <= t_min <= t_max, got [" + std::to_string(t_min) + ", " +
                      std::to_string(t_max) + "]");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw ConfigError("gen spec: noise_std must be a finite value >= 0");
  }
  if (!(min_stage_fraction >= 0.0) ||
      min_stage_fraction * static_cast<double>(num_stages) > 1.0 + 1e-12) {
    throw ConfigError("gen spec: min_stage_fraction * num_stages must lie in [0, 1]");
  }
  if (!(dirichlet_concentration > 0.0)) {
    throw ConfigError("gen spec: dirichlet_concentration must be positive");
  }
}

std::vector<std::vector<double>> stage_prototypes(const GenSpec& spec) {
  std::mt19937_64 rng(mix_seed(spec.seed, 0x70726f746fULL));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> protos(spec.num_stages, std::vector<double>(spec.input_dim));
  for (auto& p : protos)
    for (double& v : p) v = unit(rng);
  return protos;
}

namespace {

StageSequence generate_with(const GenSpec& spec,
                            const std::vector<std::vector<double>>& protos,
                            std::size_t index) {
  std::mt19937_64 rng(mix_seed(spec.seed, index + 1));
  const std::size_t c_n = spec.num_stages;
  const std::size_t length =
      std::uniform_int_distribution<std::size_t>(spec.t_min, spec.t_max)(rng);

  std::gamma_distribution<double> gamma(spec.dirichlet_concentration, 1.0);
  std::vector<double> widths(c_n);
  double total = 0.0;
  for (double& w : widths) total += (w = gamma(rng));
  const double free_mass = 1.0 - spec.min_stage_fraction * static_cast<double>(c_n);
  for (double& w : widths) w = spec.min_stage_fraction + free_mass * w / total;

  StageSequence seq;
  seq.id = sequence_id(index);
  seq.num_stages = c_n;
  seq.dim = spec.input_dim;
  seq.labels.resize(length);
  // Stage c ends at frame round(cumsum_c * T); the last stage ends at T.
  std::vector<std::size_t> ends(c_n);
  double acc = 0.0;
  for (std::size_t c = 0; c < c_n; ++c) {
    acc += widths[c];
    ends[c] = c + 1 == c_n ? length
                           : std::min(length, static_cast<std::size_t>(
                                                  std::llround(acc * static_cast<double>(length))));
  }
  std::size_t stage = 0;
  for (std::size_t i = 0; i < length; ++i) {
    while (i >= ends[stage]) ++stage;
    seq.labels[i] = static_cast<int>(stage);
  }

  std::vector<std::size_t> changes;  // frames whose label differs from the previous frame
  for (std::size_t i = 1; i < length; ++i) {
    if (seq.labels[i] != seq.labels[i - 1]) changes.push_back(i);
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  const double blend = static_cast<double>(spec.transition_blend_frames);
  seq.features.resize(length * spec.input_dim);
  for (std::size_t i = 0; i < length; ++i) {
    const std::vector<double>* from = &protos[static_cast<std::size_t>(seq.labels[i])];
    const std::vector<double>* to = from;
    double lambda = 0.0;
    if (blend > 0.0 && !changes.empty()) {
      const double t = static_cast<double>(i) + 0.5;
      std::size_t nearest = changes.front();
      for (std::size_t b : changes) {
        if (std::fabs(t - static_cast<double>(b)) < std::fabs(t - static_cast<double>(nearest))) {
          nearest = b;
        }
      }
      const double u = t - static_cast<double>(nearest);
      if (std::fabs(u) < blend) {
        from = &protos[static_cast<std::size_t>(seq.labels[nearest - 1])];
        to = &protos[static_cast<std::size_t>(seq.labels[nearest])];
        lambda = std::clamp(0.5 + u / (2.0 * blend), 0.0, 1.0);
      }
    }
    for (std::size_t k = 0; k < spec.input_dim; ++k) {
      const double base = (1.0 - lambda) * (*from)[k] + lambda * (*to)[k];
      seq.features[i * spec.input_dim + k] = base + spec.noise_std * noise(rng);
    }
  }
  return seq;
}

}  // namespace

StageSequence generate_one(const GenSpec& spec, std::size_t index) {
  spec.validate();
  return generate_with(spec, stage_prototypes(spec), index);
}

std::vector<StageSequence> generate(const GenSpec& spec) {
  spec.validate();
  const auto protos = stage_prototypes(spec);
  std::vector<StageSequence> out;
  out.reserve(spec.num_sequences);
  for (std::size_t i = 0; i < spec.num_sequences; ++i) out.push_back(generate_with(spec, protos, i));
  return out;
}

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split split_of(std::uint64_t seed, const std::string& id) {
  const std::uint64_t bucket = mix_seed(seed ^ 0x73706c6974ULL, fnv1a(id)) % 10;
  if (bucket < 8) return Split::kTrain;
  return bucket == 8 ? Split::kVal : Split::kTest;
}

DatasetSplits split_dataset(std::vector<StageSequence> sequences, std::uint64_t seed) {
  DatasetSplits out;
  for (StageSequence& s : sequences) {
    switch (split_of(seed, s.id)) {
      case Split::kTrain: out.train.push_back(std::move(s)); break;
      case Split::kVal: out.val.push_back(std::move(s)); break;
      case Split::kTest: out.test.push_back(std::move(s)); break;
    }
  }
  return out;
}

}  // namespace stageformer
