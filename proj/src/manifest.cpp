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

#include "flowgpr/manifest.hpp"

#include <fstream>
#include <stdexcept>

namespace flowgpr::manifest {

void RunManifest::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

bool RunManifest::has(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return true;
  return false;
}

std::string RunManifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  throw std::runtime_error("manifest: missing key '" + key + "'");
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fnv1a_file: cannot open " + path);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return hash;
}

void add_output(RunManifest& m, const std::string& dir, const std::string& relative_path) {
  int count = 0;
  for (const auto& [k, v] : m.entries)
    if (k.rfind("output.", 0) == 0 && k.find(".fnv64") == std::string::npos) ++count;
  const std::string key = "output." + std::to_string(count);
  m.set(key, relative_path);
  m.set(key + ".fnv64", std::to_string(fnv1a_file(dir + "/" + relative_path)));
}

void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  for (const auto& [k, v] : m.entries) out << k << " = " << v << '\n';
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
  RunManifest m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sep = line.find(" = ");
    if (sep == std::string::npos)
      throw std::runtime_error("read_manifest: malformed line '" + line + "'");
    m.entries.emplace_back(line.substr(0, sep), line.substr(sep + 3));
  }
  return m;
}

VerifyResult verify_outputs(const RunManifest& m, const std::string& dir) {
  VerifyResult result;
  for (const auto& [k, v] : m.entries) {
    if (k.rfind("output.", 0) != 0 || k.find(".fnv64") != std::string::npos) continue;
    std::uint64_t actual = 0;
    try {
      actual = fnv1a_file(dir + "/" + v);
    } catch (const std::exception&) {
      result.ok = false;
      result.problems.push_back("missing output file: " + v);
      continue;
    }
    const std::string expected = m.get(k + ".fnv64");
    if (std::to_string(actual) != expected) {
      result.ok = false;
      result.problems.push_back("hash mismatch for " + v + " (expected " + expected + ", got " +
                                std::to_string(actual) + ")");
    }
  }
  return result;
}

}  // namespace flowgpr::manifest
