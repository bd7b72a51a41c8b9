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

#include "stageformer/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stageformer/error.hpp"

namespace stageformer {

using nlohmann::json;

std::string sequence_to_json_line(const StageSequence& seq) {
  json j;
  j["id"] = seq.id;
  j["C"] = seq.num_stages;
  j["T"] = seq.length();
  j["dim"] = seq.dim;
  if (seq.has_labels()) j["labels"] = seq.labels;
  j["features"] = seq.features;
  return j.dump();
}

namespace {

std::string where(std::size_t line_index) { return "line " + std::to_string(line_index + 1); }

template <typename T>
T field(const json& j, const char* key, std::size_t line_index) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(where(line_index) + ": missing field \"" + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw DataError(where(line_index) + ": field \"" + key + "\" has the wrong type (" +
                    e.what() + ")");
  }
}

}  // namespace

StageSequence sequence_from_json_line(const std::string& line, std::size_t line_index) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(where(line_index) + ": malformed record (" + e.what() + ")");
  }
  if (!j.is_object()) throw DataError(where(line_index) + ": record is not an object");

  StageSequence seq;
  seq.id = field<std::string>(j, "id", line_index);
  seq.num_stages = field<std::size_t>(j, "C", line_index);
  seq.dim = field<std::size_t>(j, "dim", line_index);
  const auto length = field<std::size_t>(j, "T", line_index);
  seq.features = field<std::vector<double>>(j, "features", line_index);
  if (j.contains("labels")) seq.labels = field<std::vector<int>>(j, "labels", line_index);

  if (seq.features.size() != length * seq.dim) {
    throw DataError(where(line_index) + ": expected T*dim = " + std::to_string(length * seq.dim) +
                    " features, got " + std::to_string(seq.features.size()));
  }
  try {
    seq.validate();
  } catch (const DataError& e) {
    throw DataError(where(line_index) + ": " + e.what());
  }
  return seq;
}

void write_dataset(std::ostream& out, const std::vector<StageSequence>& sequences) {
  for (const StageSequence& s : sequences) out << sequence_to_json_line(s) << '\n';
}

std::vector<StageSequence> read_dataset(std::istream& in) {
  std::vector<StageSequence> out;
  std::string line;
  for (std::size_t index = 0; std::getline(in, line); ++index) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(sequence_from_json_line(line, index));
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    f.flush();
    if (!f) throw IoError("write to " + tmp + " failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

void write_dataset(const std::string& path, const std::vector<StageSequence>& sequences) {
  std::ostringstream os;
  write_dataset(os, sequences);
  write_file_atomic(path, os.str());
}

std::vector<StageSequence> read_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open dataset " + path);
  try {
    return read_dataset(f);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace stageformer
