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

#include <iosfwd>
#include <string>
#include <vector>

#include "stageformer/data_gen.hpp"

// Line-delimited JSON datasets: one object per sequence with keys
// "id", "C", "T", "dim", "features" (row-major T*dim numbers) and an optional
// "labels" array of T stage indices. Floats are written in shortest
// round-trip form, so write followed by read is bit-exact.
namespace stageformer {

std::string sequence_to_json_line(const StageSequence& seq);
// `line_index` is zero-based and only used for error messages.
StageSequence sequence_from_json_line(const std::string& line, std::size_t line_index);

void write_dataset(std::ostream& out, const std::vector<StageSequence>& sequences);
std::vector<StageSequence> read_dataset(std::istream& in);

void write_dataset(const std::string& path, const std::vector<StageSequence>& sequences);
std::vector<StageSequence> read_dataset(const std::string& path);

// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace stageformer
