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

#include "stageformer/deform_attn.hpp"

#include "stageformer/autodiff/interp.hpp"
#include "stageformer/autodiff/ops.hpp"
#include "stageformer/error.hpp"

namespace stageformer {

std::size_t FeaturePyramid::width() const {
  if (levels.empty()) throw ShapeError("FeaturePyramid: no levels");
  return levels.front().cols();
}

std::vector<std::size_t> FeaturePyramid::lengths() const {
  std::vector<std::size_t> out;
  out.reserve(levels.size());
  for (const ad::Tensor& level : levels) out.push_back(level.rows());
  return out;
}

std::size_t FeaturePyramid::total_length() const {
  std::size_t n = 0;
  for (const ad::Tensor& level : levels) n += level.rows();
  return n;
}

ad::Tensor FeaturePyramid::stacked() const {
  if (levels.size() == 1) return levels.front();
  return ad::concat_rows(levels);
}

void FeaturePyramid::validate() const {
  if (levels.empty()) throw ShapeError("FeaturePyramid: at least one level required");
  const std::size_t d = width();
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (levels[l].ndim() != 2 || levels[l].cols() != d || levels[l].rows() == 0) {
      throw ShapeError("FeaturePyramid: level " + std::to_string(l) + " has shape " +
                       ad::shape_str(levels[l].shape()) + ", expected T x " + std::to_string(d));
    }
    if (l > 0 && levels[l].rows() != (levels[l - 1].rows() + 1) / 2) {
      throw ShapeError("FeaturePyramid: level " + std::to_string(l) + " length " +
                       std::to_string(levels[l].rows()) + " is not ceil(" +
                       std::to_string(levels[l - 1].rows()) + " / 2)");
    }
  }
}

void DeformAttnConfig::validate() const {
  if (dim == 0 || heads == 0 || levels == 0 || points == 0) {
    throw ConfigError("deformable attention: dim, heads, levels and points must be positive");
  }
  if (dim % heads != 0) {
    throw ConfigError("deformable attention: dim " + std::to_string(dim) +
                      " is not divisible by heads " + std::to_string(heads));
  }
}

const char* to_string(OffsetInit init) {
  return init == OffsetInit::kGrid ? "grid" : "zero";
}

OffsetInit parse_offset_init(const std::string& name) {
  if (name == "zero") return OffsetInit::kZero;
  if (name == "grid") return OffsetInit::kGrid;
  throw ConfigError("unknown offset init \"" + name + "\" (expected zero or grid)");
}

DeformAttnParams DeformAttnParams::create(const DeformAttnConfig& config, nn::Rng& rng) {
  config.validate();
  DeformAttnParams p;
  p.config = config;
  p.value_proj = nn::Linear::create(config.dim, config.dim, rng);
  p.output_proj = nn::Linear::create(config.dim, config.dim, rng);
  p.offset_pred = nn::Linear::zeros(config.dim, config.slots());
  if (config.offset_init == OffsetInit::kGrid) {
    auto bias = p.offset_pred.bias.mutable_data();
    for (std::size_t a = 0; a < config.heads; ++a) {
      const double dir = a % 2 == 0 ? 1.0 : -1.0;
      const double scale = std::ldexp(1.0, static_cast<int>(a / 2));
      for (std::size_t l = 0; l < config.levels; ++l)
        for (std::size_t k = 0; k < config.points; ++k)
          bias[(a * config.levels + l) * config.points + k] =
              dir * static_cast<double>(k + 1) * scale;
    }
  }
  p.weight_pred = nn::Linear::zeros(config.dim, config.slots());
  return p;
}

void DeformAttnParams::collect(const std::string& prefix, nn::ParameterList& out) const {
  value_proj.collect(prefix + ".value_proj", out);
  output_proj.collect(prefix + ".output_proj", out);
  offset_pred.collect(prefix + ".offset_pred", out);
  weight_pred.collect(prefix + ".weight_pred", out);
}

std::vector<double> sampling_locations(double reference, std::span<const double> offsets,
                                       std::span<const std::size_t> lengths, std::size_t heads,
                                       std::size_t points) {
  const std::size_t levels = lengths.size();
  if (offsets.size() != heads * levels * points) {
    throw ShapeError("sampling_locations: expected " + std::to_string(heads * levels * points) +
                     " offsets, got " + std::to_string(offsets.size()));
  }
  if (!(reference >= 0.0 && reference <= 1.0)) {
    throw DataError("sampling_locations: reference " + std::to_string(reference) +
                    " outside [0, 1]");
  }
  std::vector<double> out(offsets.size());
  for (std::size_t a = 0; a < heads; ++a)
    for (std::size_t l = 0; l < levels; ++l)
      for (std::size_t k = 0; k < points; ++k) {
        const std::size_t s = (a * levels + l) * points + k;
        out[s] = reference * static_cast<double>(lengths[l] - 1) + offsets[s];
      }
  return out;
}

ad::Tensor sampling_locations(const ad::Tensor& refs, const ad::Tensor& offsets,
                              std::span<const std::size_t> lengths, std::size_t heads,
                              std::size_t points) {
  const std::size_t levels = lengths.size();
  const std::size_t slots = heads * levels * points;
  const std::size_t nq = refs.numel();
  if (offsets.ndim() != 2 || offsets.dim(0) != nq || offsets.dim(1) != slots) {
    throw ShapeError("sampling_locations: offsets " + ad::shape_str(offsets.shape()) +
                     " do not match " + std::to_string(nq) + " queries x " +
                     std::to_string(slots) + " slots");
  }
  ad::check_finite("sampling_locations", offsets);
  std::vector<double> scale_of_slot(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    scale_of_slot[s] = static_cast<double>(lengths[(s / points) % levels] - 1);
  }
  std::vector<double> out(nq * slots);
  for (std::size_t q = 0; q < nq; ++q) {
    const double r = refs.data()[q];
    if (!(r >= 0.0 && r <= 1.0)) {
      throw DataError("sampling_locations: reference " + std::to_string(r) + " outside [0, 1]");
    }
    for (std::size_t s = 0; s < slots; ++s) {
      out[q * slots + s] = r * scale_of_slot[s] + offsets.data()[q * slots + s];
    }
  }
  return ad::make_result(
      "sampling_locations", {nq, slots}, std::move(out), {refs, offsets},
      [nq, slots, scale_of_slot = std::move(scale_of_slot)](ad::Node& o) {
        ad::Node* nr = o.inputs[0].get();
        ad::Node* no = o.inputs[1].get();
        for (std::size_t q = 0; q < nq; ++q) {
          double dref = 0.0;
          for (std::size_t s = 0; s < slots; ++s) {
            const double g = o.grad[q * slots + s];
            dref += g * scale_of_slot[s];
            if (no && no->requires_grad) no->grad[q * slots + s] += g;
          }
          if (nr && nr->requires_grad) nr->grad[q] += dref;
        }
      });
}

ad::Tensor attention_weights(const ad::Tensor& queries, const DeformAttnParams& params) {
  const DeformAttnConfig& c = params.config;
  const std::size_t nq = queries.rows();
  ad::Tensor raw = params.weight_pred(queries);
  ad::Tensor grouped = ad::reshape(raw, {nq * c.heads, c.levels * c.points});
  return ad::reshape(ad::softmax(grouped, 1), {nq, c.slots()});
}

ad::Tensor deform_sample(const ad::Tensor& values, std::span<const std::size_t> lengths,
                         const ad::Tensor& positions, const ad::Tensor& weights,
                         std::size_t heads, std::size_t points) {
  static constexpr const char* kOp = "deform_sample";
  const std::size_t levels = lengths.size();
  const std::size_t slots = heads * levels * points;
  if (values.ndim() != 2) {
    throw ShapeError("deform_sample: values must be 2-D, got " + ad::shape_str(values.shape()));
  }
  const std::size_t d = values.dim(1);
  if (d % heads != 0) throw ShapeError("deform_sample: width not divisible by heads");
  const std::size_t dh = d / heads;
  std::vector<std::size_t> starts(levels);
  std::size_t total = 0;
  for (std::size_t l = 0; l < levels; ++l) {
    starts[l] = total;
    total += lengths[l];
  }
  if (values.dim(0) != total) {
    throw ShapeError("deform_sample: values have " + std::to_string(values.dim(0)) +
                     " rows, pyramid lengths sum to " + std::to_string(total));
  }
  if (positions.shape() != weights.shape() || positions.ndim() != 2 ||
      positions.dim(1) != slots) {
    throw ShapeError("deform_sample: positions " + ad::shape_str(positions.shape()) +
                     " and weights " + ad::shape_str(weights.shape()) +
                     " must both be Nq x " + std::to_string(slots));
  }
  ad::check_finite(kOp, values);
  ad::check_finite(kOp, positions);
  ad::check_finite(kOp, weights);

  const std::size_t nq = positions.dim(0);
  std::vector<double> out(nq * d, 0.0);
  const double* v = values.data().data();
  const double* pos = positions.data().data();
  const double* w = weights.data().data();
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t a = 0; a < heads; ++a) {
      double* dst = out.data() + q * d + a * dh;
      for (std::size_t l = 0; l < levels; ++l) {
        const long n = static_cast<long>(lengths[l]);
        const double* base = v + starts[l] * d + a * dh;
        for (std::size_t k = 0; k < points; ++k) {
          const std::size_t s = q * slots + (a * levels + l) * points + k;
          for (std::size_t c = 0; c < dh; ++c) {
            dst[c] += w[s] * ad::sample_linear(base + c, n, static_cast<long>(d), pos[s]).value;
          }
        }
      }
    }
  }

  return ad::make_result(
      kOp, {nq, d}, std::move(out), {values, positions, weights},
      [=, starts = std::move(starts),
       lengths = std::vector<std::size_t>(lengths.begin(), lengths.end())](ad::Node& o) {
        ad::Node& nv = *o.inputs[0];
        ad::Node& np = *o.inputs[1];
        ad::Node& nw = *o.inputs[2];
        for (std::size_t q = 0; q < nq; ++q) {
          for (std::size_t a = 0; a < heads; ++a) {
            const double* g = o.grad.data() + q * d + a * dh;
            for (std::size_t l = 0; l < levels; ++l) {
              const long n = static_cast<long>(lengths[l]);
              const std::size_t row0 = starts[l];
              const double* base = nv.value.data() + row0 * d + a * dh;
              for (std::size_t k = 0; k < points; ++k) {
                const std::size_t s = q * slots + (a * levels + l) * points + k;
                const double ws = nw.value[s];
                double dpos = 0.0, dw = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                  const ad::LinearSample smp =
                      ad::sample_linear(base + c, n, static_cast<long>(d), np.value[s]);
                  dw += g[c] * smp.value;
                  dpos += g[c] * ws * smp.slope;
                  if (nv.requires_grad) {
                    const double gw = g[c] * ws;
                    if (smp.lo >= 0 && smp.lo < n) {
                      nv.grad[(row0 + static_cast<std::size_t>(smp.lo)) * d + a * dh + c] +=
                          gw * (1.0 - smp.frac);
                    }
                    if (smp.lo + 1 >= 0 && smp.lo + 1 < n) {
                      nv.grad[(row0 + static_cast<std::size_t>(smp.lo + 1)) * d + a * dh + c] +=
                          gw * smp.frac;
                    }
                  }
                }
                if (np.requires_grad) np.grad[s] += dpos;
                if (nw.requires_grad) nw.grad[s] += dw;
              }
            }
          }
        }
      });
}

ad::Tensor ms_deform_attn(const ad::Tensor& queries, const ad::Tensor& refs,
                          const FeaturePyramid& pyramid, const DeformAttnParams& params) {
  const DeformAttnConfig& c = params.config;
  c.validate();
  pyramid.validate();
  if (queries.ndim() != 2 || queries.cols() != c.dim) {
    throw ShapeError("ms_deform_attn: queries " + ad::shape_str(queries.shape()) +
                     " do not have width " + std::to_string(c.dim));
  }
  if (pyramid.num_levels() != c.levels || pyramid.width() != c.dim) {
    throw ShapeError("ms_deform_attn: pyramid has " + std::to_string(pyramid.num_levels()) +
                     " levels of width " + std::to_string(pyramid.width()) + ", expected " +
                     std::to_string(c.levels) + " of width " + std::to_string(c.dim));
  }
  if (refs.numel() != queries.rows()) {
    throw ShapeError("ms_deform_attn: " + std::to_string(refs.numel()) + " references for " +
                     std::to_string(queries.rows()) + " queries");
  }
  const std::vector<std::size_t> lengths = pyramid.lengths();
  const ad::Tensor values = params.value_proj(pyramid.stacked());
  const ad::Tensor offsets = params.offset_pred(queries);
  const ad::Tensor positions = sampling_locations(refs, offsets, lengths, c.heads, c.points);
  const ad::Tensor weights = attention_weights(queries, params);
  const ad::Tensor sampled = deform_sample(values, lengths, positions, weights, c.heads, c.points);
  return params.output_proj(sampled);
}

}  // namespace stageformer
