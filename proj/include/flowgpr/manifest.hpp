// Copyright 2026 the flowgpr authors
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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace flowgpr::manifest {

/// Ordered key-value run record. Written next to every artifact-producing
/// command's outputs; output files are recorded with content hashes so a
/// verifier can re-check manifest/output consistency.
struct RunManifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;
};

std::uint64_t fnv1a_file(const std::string& path);

/// Record an output file (path relative to the manifest directory) and its
/// content hash.
void add_output(RunManifest& m, const std::string& dir, const std::string& relative_path);

void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

struct VerifyResult {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Re-hash every recorded output under dir and compare with the manifest.
VerifyResult verify_outputs(const RunManifest& m, const std::string& dir);

}  // namespace flowgpr::manifest
