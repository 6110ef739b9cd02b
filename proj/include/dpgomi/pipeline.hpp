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

#ifndef DPGOMI_PIPELINE_HPP
#define DPGOMI_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"

#include "dpgomi/dataset.hpp"
#include "dpgomi/evaluation.hpp"
#include "dpgomi/gan.hpp"
#include "dpgomi/inversion.hpp"
#include "dpgomi/latent_gan.hpp"
#include "dpgomi/manifest.hpp"
#include "dpgomi/partition.hpp"

namespace dpgomi {

// Per-run record of which stage materialized which dataset slice. The
// private split must only ever be read by the inversion stage.
struct AccessAudit {
  std::map<std::pair<std::string, std::string>, long> reads;  // (tag, stage)

  void record(const std::string& tag, const std::string& stage, long n) {
    reads[{tag, stage}] += n;
  }
  long reads_of(const std::string& tag, const std::string& stage) const;
  long reads_of_tag_excluding(const std::string& tag,
                              const std::string& stage) const;
  std::string summary() const;
};

struct DatasetStageConfig {
  std::string kind = "toy2d";  // "toy2d" | "file"
  std::string name = "toy2d";
  // toy2d parameters
  int n_train = 2000;
  int n_test = 800;
  double stddev = 0.05;
  std::vector<std::array<double, 2>> centers = {
      {0.2, 0.2}, {0.8, 0.8}, {0.35, 0.65}, {0.65, 0.35}};
  std::uint64_t seed = 11;
  // file parameters
  std::string train_path;
  std::string test_path;
};

struct PipelineConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  DatasetStageConfig dataset;
  double label_fraction = 1.0 / 3.0;
  std::set<int> public_classes = {0, 1};
  bool stratified = false;
  GanTrainConfig public_gan;
  InversionMethod inversion_method = InversionMethod::gomi;
  InversionConfig inversion;
  DpGanConfig latent_gan;
  int synthesis_count = 2000;
  bool synthesis_quantize = false;  // 8-bit archive payload
  ClassifierConfig label_classifier;
  ClassifierConfig downstream;

  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  std::string config_hash() const;
};

// Optional explicit paths for standalone CLI invocations; any empty field
// falls back to the conventional run-directory layout.
struct StageOverrides {
  std::string dataset_train;
  std::string dataset_test;
  std::string split_dir;
  std::string public_ckpt;
  std::string latents_dir;
  std::string dp_dir;
  std::string synthesis_dir;
  std::string backbone_ckpt;  // evaluate: reuse instead of training
  std::string out_dir;
};

// File-driven stage entry points. Each reads its inputs from the run
// directory, writes its artifacts plus a manifest.json in its stage
// subdirectory, and returns the manifest. `audit`, when given, records
// dataset materializations per stage.
RunManifest stage_dataset(const PipelineConfig& cfg, const std::string& run_dir,
                          const StageOverrides& ov = {});
RunManifest stage_partition(const PipelineConfig& cfg,
                            const std::string& run_dir,
                            AccessAudit* audit = nullptr,
                            const StageOverrides& ov = {});
RunManifest stage_train_public(const PipelineConfig& cfg,
                               const std::string& run_dir,
                               AccessAudit* audit = nullptr,
                               const StageOverrides& ov = {});
RunManifest stage_invert(const PipelineConfig& cfg, const std::string& run_dir,
                         AccessAudit* audit = nullptr,
                         const StageOverrides& ov = {});
RunManifest stage_train_dp(const PipelineConfig& cfg,
                           const std::string& run_dir,
                           AccessAudit* audit = nullptr,
                           const StageOverrides& ov = {});
RunManifest stage_synthesize(const PipelineConfig& cfg,
                             const std::string& run_dir,
                             AccessAudit* audit = nullptr,
                             const StageOverrides& ov = {});
RunManifest stage_evaluate(const PipelineConfig& cfg,
                           const std::string& run_dir,
                           AccessAudit* audit = nullptr,
                           const StageOverrides& ov = {});

struct PipelineResult {
  std::string report_path;
  std::string report;
  double fid = 0.0;
  double inception = 0.0;
  double downstream_macro_precision = 0.0;
  double epsilon_spent = 0.0;
  AccessAudit audit;
};

// Runs the full chain: dataset -> partition -> train-public -> invert ->
// train-dp -> synthesize -> evaluate, then writes a deterministic aggregate
// report (final_report.txt) and verifies the manifest chain. Aborts at the
// first stage error; artifacts of completed stages stay on disk.
PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const std::string& run_dir);

}  // namespace dpgomi

#endif  // DPGOMI_PIPELINE_HPP
