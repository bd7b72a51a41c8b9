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

#include "stageformer/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "stageformer/error.hpp"

namespace stageformer {

using nlohmann::json;

const char* to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kCollabArgmax: return "collab-argmax";
    case DecodeMode::kSegments: return "segments";
    case DecodeMode::kCollabDp: return "collab-dp";
    case DecodeMode::kClsArgmax: return "cls-argmax";
  }
  return "unknown";
}

std::vector<DecodeMode> all_decode_modes() {
  return {DecodeMode::kCollabArgmax, DecodeMode::kSegments, DecodeMode::kCollabDp,
          DecodeMode::kClsArgmax};
}

DecodeMode parse_decode_mode(const std::string& name) {
  for (DecodeMode m : all_decode_modes()) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown decode mode \"" + name +
                    "\" (expected collab-argmax, segments, collab-dp or cls-argmax)");
}

bool decode_mode_available(DecodeMode mode, const HeadSet& heads) {
  switch (mode) {
    case DecodeMode::kCollabArgmax:
    case DecodeMode::kCollabDp: return heads.col;
    case DecodeMode::kSegments: return heads.seg;
    case DecodeMode::kClsArgmax: return heads.cls;
  }
  return false;
}

void check_decode_mode(DecodeMode mode, const HeadSet& heads) {
  if (!decode_mode_available(mode, heads)) {
    throw ConfigError(std::string("decode mode ") + to_string(mode) +
                      " needs a head that is disabled (enabled: " + heads.str() + ")");
  }
}

void TrainConfig::validate() const {
  model.validate();
  optim.adam.validate();
  if (!(optim.peak_lr >= 0.0)) throw ConfigError("optim: peak_lr must be >= 0");
  if (optim.batch_size == 0) throw ConfigError("optim: batch_size must be >= 1");
  if (optim.total_epochs == 0) throw ConfigError("optim: total_epochs must be >= 1");
  if (optim.warmup_epochs >= optim.total_epochs) {
    throw ConfigError("optim: warmup_epochs (" + std::to_string(optim.warmup_epochs) +
                      ") must be below total_epochs (" + std::to_string(optim.total_epochs) + ")");
  }
  if (!heads().any()) throw ConfigError("loss: at least one of cls, seg, col must be enabled");
  check_decode_mode(decode, heads());
}

void apply_ablation(TrainConfig& config, const std::string& preset) {
  if (preset == "cls") {
    config.loss.cls = true, config.loss.seg = false, config.loss.col = false;
    config.decode = DecodeMode::kClsArgmax;
  } else if (preset == "seg") {
    config.loss.cls = false, config.loss.seg = true, config.loss.col = false;
    config.decode = DecodeMode::kSegments;
  } else if (preset == "cls+seg") {
    config.loss.cls = true, config.loss.seg = true, config.loss.col = false;
    config.decode = DecodeMode::kSegments;
  } else if (preset == "all") {
    config.loss.cls = true, config.loss.seg = true, config.loss.col = true;
    config.decode = DecodeMode::kCollabArgmax;
  } else {
    throw ConfigError("unknown ablation preset \"" + preset +
                      "\" (expected cls, seg, cls+seg or all)");
  }
}

namespace {

// Reads j[key] into `out` if present, rejecting keys outside `allowed`.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError(section_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(section_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(section_ + ": unknown key \"" + it.key() + "\"");
    }
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const TrainConfig& c) {
  const ModelConfig& m = c.model;
  const OptimConfig& o = c.optim;
  return json{
      {"model",
       {{"input_dim", m.input_dim},
        {"embed_dim", m.embed_dim},
        {"ffn_dim", m.ffn_dim},
        {"encoder_layers", m.encoder_layers},
        {"decoder_layers", m.decoder_layers},
        {"levels", m.levels},
        {"heads", m.heads},
        {"points", m.points},
        {"num_stages", m.num_stages},
        {"alpha", m.alpha},
        {"offset_init", to_string(m.offset_init)}}},
      {"optim",
       {{"beta1", o.adam.beta1},
        {"beta2", o.adam.beta2},
        {"eps", o.adam.eps},
        {"weight_decay", o.adam.weight_decay},
        {"peak_lr", o.peak_lr},
        {"warmup_epochs", o.warmup_epochs},
        {"total_epochs", o.total_epochs},
        {"batch_size", o.batch_size}}},
      {"loss",
       {{"cls", c.loss.cls},
        {"seg", c.loss.seg},
        {"col", c.loss.col},
        {"mean_over_frames", c.loss.mean_over_frames}}},
      {"decode", to_string(c.decode)},
      {"seed", c.seed},
      {"paths",
       {{"train", c.paths.train},
        {"val", c.paths.val},
        {"test", c.paths.test},
        {"out_dir", c.paths.out_dir}}},
  };
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Reader top(j, "config");
  if (const json* mj = top.child("model")) {
    Reader r(*mj, "model");
    ModelConfig& m = c.model;
    r.get("input_dim", m.input_dim);
    r.get("embed_dim", m.embed_dim);
    r.get("ffn_dim", m.ffn_dim);
    r.get("encoder_layers", m.encoder_layers);
    r.get("decoder_layers", m.decoder_layers);
    r.get("levels", m.levels);
    r.get("heads", m.heads);
    r.get("points", m.points);
    r.get("num_stages", m.num_stages);
    r.get("alpha", m.alpha);
    std::string offset_init = to_string(m.offset_init);
    r.get("offset_init", offset_init);
    m.offset_init = parse_offset_init(offset_init);
    r.finish();
  }
  if (const json* oj = top.child("optim")) {
    Reader r(*oj, "optim");
    OptimConfig& o = c.optim;
    r.get("beta1", o.adam.beta1);
    r.get("beta2", o.adam.beta2);
    r.get("eps", o.adam.eps);
    r.get("weight_decay", o.adam.weight_decay);
    r.get("peak_lr", o.peak_lr);
    r.get("warmup_epochs", o.warmup_epochs);
    r.get("total_epochs", o.total_epochs);
    r.get("batch_size", o.batch_size);
    r.finish();
  }
  if (const json* lj = top.child("loss")) {
    Reader r(*lj, "loss");
    r.get("cls", c.loss.cls);
    r.get("seg", c.loss.seg);
    r.get("col", c.loss.col);
    r.get("mean_over_frames", c.loss.mean_over_frames);
    r.finish();
  }
  std::string decode = to_string(c.decode);
  top.get("decode", decode);
  c.decode = parse_decode_mode(decode);
  top.get("seed", c.seed);
  if (const json* pj = top.child("paths")) {
    Reader r(*pj, "paths");
    r.get("train", c.paths.train);
    r.get("val", c.paths.val);
    r.get("test", c.paths.test);
    r.get("out_dir", c.paths.out_dir);
    r.finish();
  }
  top.finish();
  c.validate();
  return c;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_env_overrides(TrainConfig& config) {
  const char* env = std::getenv("STAGEFORMER_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long seed = std::strtoull(env, &end, 10);
  if (end == nullptr || *end != '\0') {
    throw ConfigError(std::string("STAGEFORMER_SEED is not an unsigned integer: ") + env);
  }
  config.seed = seed;
}

TrainConfig load_train_config(const std::string& path) {
  TrainConfig c = train_config_from_json(read_json_file(path));
  apply_env_overrides(c);
  return c;
}

json to_json(const GenSpec& s) {
  return json{{"num_sequences", s.num_sequences},
              {"t_min", s.t_min},
              {"t_max", s.t_max},
              {"num_stages", s.num_stages},
              {"input_dim", s.input_dim},
              {"noise_std", s.noise_std},
              {"transition_blend_frames", s.transition_blend_frames},
              {"min_stage_fraction", s.min_stage_fraction},
              {"dirichlet_concentration", s.dirichlet_concentration},
              {"seed", s.seed}};
}

GenSpec gen_spec_from_json(const json& j) {
  Reader r(j, "gen spec");
  std::string preset = "human";
  r.get("preset", preset);
  GenSpec s;
  if (preset == "human") {
    s = GenSpec::human();
  } else if (preset == "mouse") {
    s = GenSpec::mouse();
  } else {
    throw ConfigError("gen spec: unknown preset \"" + preset + "\" (expected human or mouse)");
  }
  r.get("num_sequences", s.num_sequences);
  r.get("t_min", s.t_min);
  r.get("t_max", s.t_max);
  r.get("num_stages", s.num_stages);
  r.get("input_dim", s.input_dim);
  r.get("noise_std", s.noise_std);
  r.get("transition_blend_frames", s.transition_blend_frames);
  r.get("min_stage_fraction", s.min_stage_fraction);
  r.get("dirichlet_concentration", s.dirichlet_concentration);
  r.get("seed", s.seed);
  r.finish();
  s.validate();
  return s;
}

GenSpec load_gen_spec(const std::string& path) { return gen_spec_from_json(read_json_file(path)); }

}  // namespace stageformer
