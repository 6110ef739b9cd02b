//
// Copyright 2026 The dpgomi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPGOMI_MANIFEST_HPP
#define DPGOMI_MANIFEST_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"

#include "dpgomi/dp.hpp"

namespace dpgomi {

// Privacy record of one stage. A "public" record marks stages that never
// touch private data under accounting; the DP record is immutable once
// written and must survive every post-processing stage unchanged.
struct PrivacyRecord {
  bool is_public = true;
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double clip_norm = 0.0;
  double sample_rate = 0.0;
  long steps = 0;
  std::string adjacency = "add-remove";
  std::string conversion = "rdp-curve-min";

  bool operator==(const PrivacyRecord&) const = default;
};

struct ArtifactRef {
  std::string name;
  std::string path;  // relative to the run directory
  std::string sha256;
};

struct RunManifest {
  std::string stage;
  std::string config_hash;
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  PrivacyRecord privacy;
  std::vector<AccountantEpoch> accountant_history;
  std::uint64_t seed = 0;
  std::string timestamp;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

std::string current_timestamp();

struct ChainViolation {
  std::string manifest_path;
  std::string message;
};

// Verifies every manifest found under run_dir: artifact checksum integrity,
// lineage acyclicity (inputs must trace to upstream outputs), privacy-record
// immutability across post-processing stages, and accountant replay of each
// DP record. Returns the empty vector when the chain is intact.
std::vector<ChainViolation> verify_manifest_chain(const std::string& run_dir);

}  // namespace dpgomi

#endif  // DPGOMI_MANIFEST_HPP
