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

#include "stageformer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "stageformer/dataset_io.hpp"
#include "stageformer/error.hpp"

namespace stageformer {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void doubles(const std::vector<double>& v) { bytes(v.data(), v.size() * sizeof(double)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    if (n > in_.size() - pos_) {
      throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > in_.size() - pos_) throw IoError("checkpoint string length out of range");
    std::string s(in_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(std::size_t n) {
    if (n > (in_.size() - pos_) / sizeof(double)) throw IoError("checkpoint tensor truncated");
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint make_checkpoint(const TrainConfig& config, const Model& model, const Adam* optimizer) {
  Checkpoint ckpt;
  ckpt.config = config;
  const nn::ParameterList params = model.parameters();
  if (optimizer && optimizer->parameters().size() != params.size()) {
    throw ShapeError("checkpoint: optimizer tracks " +
                     std::to_string(optimizer->parameters().size()) + " tensors, model has " +
                     std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    CheckpointTensor t;
    t.name = params[k].name;
    t.shape = params[k].tensor.shape();
    const auto data = params[k].tensor.data();
    t.value.assign(data.begin(), data.end());
    if (optimizer) {
      t.m = optimizer->first_moments()[k];
      t.v = optimizer->second_moments()[k];
    } else {
      t.m.assign(t.value.size(), 0.0);
      t.v.assign(t.value.size(), 0.0);
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (optimizer) ckpt.optimizer_steps = optimizer->steps();
  return ckpt;
}

Model restore_model(const Checkpoint& ckpt) {
  Model model = Model::create(ckpt.config.model, 0);
  nn::ParameterList params = model.parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw DataError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                    " tensors, the configured model has " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const CheckpointTensor& t = ckpt.tensors[k];
    if (t.name != params[k].name || t.shape != params[k].tensor.shape()) {
      throw DataError("checkpoint tensor " + t.name + " " + ad::shape_str(t.shape) +
                      " does not match model tensor " + params[k].name + " " +
                      ad::shape_str(params[k].tensor.shape()));
    }
    auto dst = params[k].tensor.mutable_data();
    std::copy(t.value.begin(), t.value.end(), dst.begin());
  }
  return model;
}

void restore_optimizer(const Checkpoint& ckpt, Adam& optimizer) {
  std::vector<std::vector<double>> m, v;
  for (const CheckpointTensor& t : ckpt.tensors) {
    m.push_back(t.m);
    v.push_back(t.v);
  }
  optimizer.restore(ckpt.optimizer_steps, std::move(m), std::move(v));
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u8(kCheckpointVersion);
  w.str(to_json(ckpt.config).dump());
  w.u64(ckpt.epoch);
  w.u64(ckpt.optimizer_steps);
  w.str(ckpt.rng_state);
  w.f64(ckpt.best_val);
  w.u64(ckpt.best_epoch);
  w.u64(ckpt.tensors.size());
  for (const CheckpointTensor& t : ckpt.tensors) {
    w.str(t.name);
    w.u64(t.shape.size());
    for (std::size_t d : t.shape) w.u64(d);
    w.doubles(t.value);
    w.doubles(t.m);
    w.doubles(t.v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof(kCheckpointMagic)];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a checkpoint file (bad magic header)");
  }
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::string config = r.str();
  try {
    ckpt.config = train_config_from_json(nlohmann::json::parse(config));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  ckpt.epoch = r.u64();
  ckpt.optimizer_steps = r.u64();
  ckpt.rng_state = r.str();
  ckpt.best_val = r.f64();
  ckpt.best_epoch = r.u64();
  const std::uint64_t count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    CheckpointTensor t;
    t.name = r.str();
    const std::uint64_t ndim = r.u64();
    if (ndim > 8) throw IoError("checkpoint tensor " + t.name + " has implausible rank");
    for (std::uint64_t d = 0; d < ndim; ++d) t.shape.push_back(r.u64());
    const std::size_t n = ad::shape_numel(t.shape);
    t.value = r.doubles(n);
    t.m = r.doubles(n);
    t.v = r.doubles(n);
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw IoError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace stageformer
