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

#include "dpgomi/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "nlohmann/json.hpp"

#include "dpgomi/error.hpp"
#include "dpgomi/hash.hpp"
#include "dpgomi/io.hpp"

namespace dpgomi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json privacy_to_json(const PrivacyRecord& p) {
  if (p.is_public) return json("public");
  return json{{"epsilon", p.epsilon},
              {"delta", p.delta},
              {"sigma", p.sigma},
              {"clip_norm", p.clip_norm},
              {"sample_rate", p.sample_rate},
              {"steps", p.steps},
              {"adjacency", p.adjacency},
              {"conversion", p.conversion}};
}

PrivacyRecord privacy_from_json(const json& j) {
  PrivacyRecord p;
  if (j.is_string() && j.get<std::string>() == "public") return p;
  p.is_public = false;
  p.epsilon = j.at("epsilon").get<double>();
  p.delta = j.at("delta").get<double>();
  p.sigma = j.at("sigma").get<double>();
  p.clip_norm = j.at("clip_norm").get<double>();
  p.sample_rate = j.at("sample_rate").get<double>();
  p.steps = j.at("steps").get<long>();
  p.adjacency = j.at("adjacency").get<std::string>();
  p.conversion = j.at("conversion").get<std::string>();
  return p;
}

json artifacts_to_json(const std::vector<ArtifactRef>& refs) {
  json arr = json::array();
  for (const auto& r : refs)
    arr.push_back(json{{"name", r.name}, {"path", r.path}, {"sha256", r.sha256}});
  return arr;
}

std::vector<ArtifactRef> artifacts_from_json(const json& arr) {
  std::vector<ArtifactRef> out;
  for (const auto& j : arr) {
    out.push_back({j.at("name").get<std::string>(),
                   j.at("path").get<std::string>(),
                   j.at("sha256").get<std::string>()});
  }
  return out;
}

}  // namespace

json RunManifest::to_json() const {
  json hist = json::array();
  for (const auto& e : accountant_history)
    hist.push_back(json{{"q", e.q}, {"sigma", e.sigma}, {"steps", e.steps}});
  return json{{"stage", stage},
              {"config_hash", config_hash},
              {"inputs", artifacts_to_json(inputs)},
              {"outputs", artifacts_to_json(outputs)},
              {"privacy", privacy_to_json(privacy)},
              {"accountant_history", hist},
              {"seed", seed},
              {"timestamp", timestamp}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.stage = j.at("stage").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.inputs = artifacts_from_json(j.at("inputs"));
  m.outputs = artifacts_from_json(j.at("outputs"));
  m.privacy = privacy_from_json(j.at("privacy"));
  for (const auto& e : j.at("accountant_history")) {
    m.accountant_history.push_back({e.at("q").get<double>(),
                                    e.at("sigma").get<double>(),
                                    e.at("steps").get<long>()});
  }
  m.seed = j.at("seed").get<std::uint64_t>();
  m.timestamp = j.at("timestamp").get<std::string>();
  return m;
}

void RunManifest::write(const std::string& path) const {
  write_text_file(path, to_json().dump(2) + "\n");
}

RunManifest RunManifest::read(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw io_error("unreadable manifest: " + path);
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw io_error("malformed manifest " + path + ": " + e.what());
  }
}

std::string current_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::vector<ChainViolation> verify_manifest_chain(const std::string& run_dir) {
  DPGOMI_CHECK_ARG(fs::is_directory(run_dir),
                   "run directory does not exist: " + run_dir);

  // Collect every manifest under the run directory.
  std::vector<std::pair<std::string, RunManifest>> manifests;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
      manifests.push_back({entry.path().string(),
                           RunManifest::read(entry.path().string())});
  }
  std::sort(manifests.begin(), manifests.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  DPGOMI_CHECK_ARG(!manifests.empty(),
                   "no manifest found under: " + run_dir);

  std::vector<ChainViolation> violations;
  auto flag = [&](const std::string& path, const std::string& msg) {
    violations.push_back({path, msg});
  };

  // Artifact integrity: recorded checksums must match the files on disk.
  for (const auto& [path, m] : manifests) {
    for (const auto& out : m.outputs) {
      fs::path artifact = fs::path(run_dir) / out.path;
      if (!fs::exists(artifact)) {
        flag(path, "missing output artifact: " + out.path);
        continue;
      }
      if (sha256_file(artifact.string()) != out.sha256)
        flag(path, "output checksum mismatch: " + out.path);
    }
    for (const auto& in : m.inputs) {
      fs::path artifact = fs::path(run_dir) / in.path;
      if (fs::exists(artifact) &&
          sha256_file(artifact.string()) != in.sha256)
        flag(path, "input checksum mismatch: " + in.path);
    }
  }

  // Lineage: producer(output sha) -> consumer(input sha) edges.
  std::map<std::string, std::size_t> producer_of;
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    for (const auto& out : manifests[i].second.outputs)
      producer_of[out.sha256] = i;
  }
  std::vector<std::vector<std::size_t>> parents(manifests.size());
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    for (const auto& in : manifests[i].second.inputs) {
      auto it = producer_of.find(in.sha256);
      if (it != producer_of.end() && it->second != i)
        parents[i].push_back(it->second);
    }
    for (const auto& out : manifests[i].second.outputs) {
      for (const auto& in : manifests[i].second.inputs) {
        if (in.sha256 == out.sha256)
          flag(manifests[i].first,
               "artifact appears as both input and output: " + in.path);
      }
    }
  }
  // Cycle detection over the parent graph.
  {
    std::vector<int> state(manifests.size(), 0);  // 0 new, 1 active, 2 done
    std::function<bool(std::size_t)> dfs = [&](std::size_t v) {
      state[v] = 1;
      for (std::size_t p : parents[v]) {
        if (state[p] == 1) return false;
        if (state[p] == 0 && !dfs(p)) return false;
      }
      state[v] = 2;
      return true;
    };
    for (std::size_t i = 0; i < manifests.size(); ++i) {
      if (state[i] == 0 && !dfs(i)) {
        flag(manifests[i].first, "manifest lineage contains a cycle");
        break;
      }
    }
  }

  // Privacy-record immutability: a non-public record must match the
  // non-public record of every lineage parent (post-processing adds nothing).
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const auto& m = manifests[i].second;
    if (m.privacy.is_public) continue;
    for (std::size_t p : parents[i]) {
      const auto& parent = manifests[p].second;
      if (parent.privacy.is_public) continue;
      if (!(m.privacy == parent.privacy)) {
        flag(manifests[i].first,
             "privacy record mutated in post-processing stage (parent: " +
                 parent.stage + ")");
      }
    }
  }

  // Accountant replay: the recorded epsilon must reproduce from the history.
  for (const auto& [path, m] : manifests) {
    if (m.privacy.is_public) continue;
    if (m.accountant_history.empty()) {
      flag(path, "DP record lacks an accountant history");
      continue;
    }
    long steps = 0;
    for (const auto& e : m.accountant_history) steps += e.steps;
    if (steps != m.privacy.steps)
      flag(path, "accountant history step count disagrees with the record");
    double replayed = replay_epsilon(m.accountant_history, m.privacy.delta);
    if (!(std::abs(replayed - m.privacy.epsilon) <= 1e-9 *
              std::max(1.0, std::abs(m.privacy.epsilon))))
      flag(path, "accountant replay disagrees with the recorded epsilon");
  }

  return violations;
}

}  // namespace dpgomi
