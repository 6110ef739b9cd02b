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

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "dpgomi/dp.hpp"
#include "dpgomi/error.hpp"
#include "dpgomi/io.hpp"
#include "dpgomi/manifest.hpp"
#include "dpgomi/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dpgomi;

namespace {

PipelineConfig load_config_or_default(const std::string& config_path) {
  if (config_path.empty()) return PipelineConfig{};
  return PipelineConfig::from_file(config_path);
}

std::set<int> parse_class_list(const std::string& csv) {
  std::set<int> out;
  std::string token;
  std::istringstream in(csv);
  while (std::getline(in, token, ',')) {
    if (!token.empty()) out.insert(std::stoi(token));
  }
  return out;
}

// DPGOMI_CACHE_DIR, when set, anchors relative output/run paths.
std::string expand_cache_root(const std::string& path) {
  const char* root = std::getenv("DPGOMI_CACHE_DIR");
  if (root == nullptr || path.empty() || fs::path(path).is_absolute())
    return path;
  return (fs::path(root) / path).string();
}

// Stage commands treat the parent of --out as the run root so that relative
// artifact paths in manifests stay consistent.
std::string run_root_of(const std::string& out_dir) {
  fs::path p = fs::absolute(expand_cache_root(out_dir));
  return p.parent_path().string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private synthetic data publishing via "
               "latent-space model inversion"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dataset_arg, split_dir, ckpt_path;
  std::string latents_dir, dp_dir, public_dir, synth_dir, backbone_path;
  std::string test_path;
  std::string run_dir, method = "gomi", public_classes_csv, preset;
  double label_fraction = 1.0 / 3.0;
  double epsilon = 10.0, delta = 1e-5, sigma = 1.0, clip = 1.0, q = 0.01;
  std::uint64_t seed = 0;
  bool stratified = false;
  bool quantize = false;
  int count = 10000;

  // partition
  auto* partition_cmd =
      app.add_subcommand("partition", "split a dataset into D_l / D_p / D_s");
  partition_cmd->add_option("--dataset", dataset_arg,
                            "dataset archive path or preset name (toy2d)")
      ->required();
  partition_cmd->add_option("--label-fraction", label_fraction,
                            "fraction routed to the labeling set");
  partition_cmd->add_option("--public-classes", public_classes_csv,
                            "comma-separated public class ids");
  partition_cmd->add_option("--preset", preset,
                            "class preset: cifar10 or svhn");
  partition_cmd->add_flag("--stratified", stratified,
                          "stratify the labeling draw by class");
  partition_cmd->add_option("--seed", seed, "partition seed");
  partition_cmd->add_option("--config", config_path, "pipeline config file");
  partition_cmd->add_option("--out", out_dir, "output directory")->required();

  // train-public
  auto* train_public_cmd =
      app.add_subcommand("train-public", "train the non-private public GAN");
  train_public_cmd->add_option("--split", split_dir, "partition directory")
      ->required();
  train_public_cmd->add_option("--config", config_path, "pipeline config");
  train_public_cmd->add_option("--dataset", dataset_arg,
                               "dataset archive (defaults to run layout)");
  train_public_cmd->add_option("--out", out_dir, "checkpoint directory")
      ->required();

  // invert
  auto* invert_cmd =
      app.add_subcommand("invert", "map private images to latent vectors");
  invert_cmd->add_option("--ckpt", ckpt_path, "public generator checkpoint")
      ->required();
  invert_cmd->add_option("--split", split_dir, "partition directory")
      ->required();
  invert_cmd->add_option("--method", method, "gomi or mi");
  invert_cmd->add_option("--config", config_path, "pipeline config");
  invert_cmd->add_option("--dataset", dataset_arg, "dataset archive");
  invert_cmd->add_option("--out", out_dir, "latents directory")->required();

  // train-dp
  auto* train_dp_cmd = app.add_subcommand(
      "train-dp", "train the low-dimensional DP latent GAN");
  train_dp_cmd->add_option("--latents", latents_dir, "latents directory")
      ->required();
  train_dp_cmd->add_option("--epsilon", epsilon, "epsilon budget");
  train_dp_cmd->add_option("--delta", delta, "delta");
  train_dp_cmd->add_option("--sigma", sigma, "noise multiplier");
  train_dp_cmd->add_option("--clip", clip, "per-sample clip norm");
  train_dp_cmd->add_option("--config", config_path, "pipeline config");
  train_dp_cmd->add_option("--out", out_dir, "checkpoint directory")
      ->required();

  // synthesize
  auto* synth_cmd =
      app.add_subcommand("synthesize", "release synthetic images");
  synth_cmd->add_option("--dp-ckpt", dp_dir, "DP latent GAN directory")
      ->required();
  synth_cmd->add_option("--public-ckpt", public_dir,
                        "public GAN directory or generator checkpoint")
      ->required();
  synth_cmd->add_option("-n,--count", count, "number of samples");
  synth_cmd->add_option("--seed", seed, "sampling seed");
  synth_cmd->add_flag("--quantize", quantize, "store 8-bit pixels");
  synth_cmd->add_option("--config", config_path, "pipeline config");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();

  // evaluate
  auto* eval_cmd =
      app.add_subcommand("evaluate", "score a synthetic release");
  eval_cmd->add_option("--synthetic", synth_dir, "synthesis directory")
      ->required();
  eval_cmd->add_option("--split", split_dir, "partition directory")
      ->required();
  eval_cmd->add_option("--backbone", backbone_path,
                       "feature backbone checkpoint (default: train on D_l)");
  eval_cmd->add_option("--config", config_path, "pipeline config");
  eval_cmd->add_option("--dataset", dataset_arg, "train archive");
  eval_cmd->add_option("--test", test_path, "test archive");
  eval_cmd->add_option("--out", out_dir, "report path or directory")
      ->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "run the full pipeline");
  run_cmd->add_option("--config", config_path, "pipeline config file")
      ->required();
  run_cmd->add_option("--out", run_dir, "run directory")->required();

  // verify
  auto* verify_cmd =
      app.add_subcommand("verify", "verify a run's manifest chain");
  verify_cmd->add_option("--run", run_dir, "run directory")->required();

  // budget
  auto* budget_cmd = app.add_subcommand(
      "budget", "max DPSGD steps under an (epsilon, delta) budget");
  budget_cmd->add_option("--epsilon", epsilon, "epsilon budget")->required();
  budget_cmd->add_option("--delta", delta, "delta")->required();
  budget_cmd->add_option("--q", q, "Poisson sample rate")->required();
  budget_cmd->add_option("--sigma", sigma, "noise multiplier")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    out_dir = expand_cache_root(out_dir);
    run_dir = expand_cache_root(run_dir);
    if (partition_cmd->parsed()) {
      PipelineConfig cfg = load_config_or_default(config_path);
      if (partition_cmd->count("--seed")) cfg.seed = seed;
      if (partition_cmd->count("--label-fraction"))
        cfg.label_fraction = label_fraction;
      if (partition_cmd->count("--stratified")) cfg.stratified = stratified;
      if (!preset.empty()) {
        auto classes = public_class_preset(preset);
        if (!classes) throw invalid_argument("unknown preset: " + preset);
        cfg.public_classes = *classes;
      }
      if (!public_classes_csv.empty())
        cfg.public_classes = parse_class_list(public_classes_csv);

      const std::string root = run_root_of(out_dir);
      StageOverrides ov;
      ov.out_dir = out_dir;
      if (fs::exists(dataset_arg)) {
        ov.dataset_train = dataset_arg;
      } else {
        cfg.dataset.kind = dataset_arg;  // preset name, e.g. toy2d
        cfg.dataset.name = dataset_arg;
        stage_dataset(cfg, root);
      }
      stage_partition(cfg, root, nullptr, ov);
      std::cout << "partition written to " << out_dir << "\n";
    } else if (train_public_cmd->parsed()) {
      PipelineConfig cfg = load_config_or_default(config_path);
      StageOverrides ov;
      ov.out_dir = out_dir;
      ov.split_dir = split_dir;
      ov.dataset_train = dataset_arg;
      RunManifest m =
          stage_train_public(cfg, run_root_of(out_dir), nullptr, ov);
      std::cout << "public GAN written to " << out_dir << "\n";
    } else if (invert_cmd->parsed()) {
      PipelineConfig cfg = load_config_or_default(config_path);
      cfg.inversion_method = method_from_name(method);
      StageOverrides ov;
      ov.out_dir = out_dir;
      ov.split_dir = split_dir;
      ov.public_ckpt = ckpt_path;
      ov.dataset_train = dataset_arg;
      stage_invert(cfg, run_root_of(out_dir), nullptr, ov);
      std::cout << "latents written to " << out_dir << "\n";
    } else if (train_dp_cmd->parsed()) {
      PipelineConfig cfg = load_config_or_default(config_path);
      auto& dp = cfg.latent_gan.dp;
      if (train_dp_cmd->count("--epsilon")) dp.epsilon_budget = epsilon;
      if (train_dp_cmd->count("--delta")) dp.delta = delta;
      if (train_dp_cmd->count("--sigma")) dp.noise_multiplier = sigma;
      if (train_dp_cmd->count("--clip")) dp.clip_norm = clip;
      StageOverrides ov;
      ov.out_dir = out_dir;
      ov.latents_dir = latents_dir;
      RunManifest m = stage_train_dp(cfg, run_root_of(out_dir), nullptr, ov);
      std::cout << "DP latent GAN written to " << out_dir
                << " (epsilon=" << m.privacy.epsilon
                << ", steps=" << m.privacy.steps << ")\n";
    } else if (synth_cmd->parsed()) {
      PipelineConfig cfg = load_config_or_default(config_path);
      if (synth_cmd->count("--count") || synth_cmd->count("-n"))
        cfg.synthesis_count = count;
      if (synth_cmd->count("--seed")) cfg.seed = seed;
      if (synth_cmd->count("--quantize")) cfg.synthesis_quantize = quantize;
      StageOverrides ov;
      ov.out_dir = out_dir;
      ov.dp_dir = dp_dir;
      ov.public_ckpt = fs::is_directory(public_dir)
                           ? (fs::path(public_dir) / "generator.ckpt").string()
                           : public_dir;
      stage_synthesize(cfg, run_root_of(out_dir), nullptr, ov);
      std::cout << "synthetic archive written to " << out_dir << "\n";
    } else if (eval_cmd->parsed()) {
      PipelineConfig cfg = load_config_or_default(config_path);
      StageOverrides ov;
      // --out may name the report file or its directory.
      fs::path out_path(out_dir);
      ov.out_dir = out_path.has_extension() ? out_path.parent_path().string()
                                            : out_dir;
      if (ov.out_dir.empty()) ov.out_dir = ".";
      ov.synthesis_dir = synth_dir;
      ov.split_dir = split_dir;
      ov.backbone_ckpt = backbone_path;
      ov.dataset_train = dataset_arg;
      ov.dataset_test = test_path;
      stage_evaluate(cfg, run_root_of(ov.out_dir), nullptr, ov);
      std::cout << "evaluation report written to "
                << (fs::path(ov.out_dir) / "report.txt").string() << "\n";
    } else if (run_cmd->parsed()) {
      PipelineConfig cfg = PipelineConfig::from_file(config_path);
      PipelineResult result = run_pipeline(cfg, run_dir);
      std::cout << result.report;
    } else if (verify_cmd->parsed()) {
      auto violations = verify_manifest_chain(run_dir);
      if (violations.empty()) {
        std::cout << "manifest chain ok\n";
      } else {
        for (const auto& v : violations)
          std::cout << "violation: " << v.message << " (" << v.manifest_path
                    << ")\n";
        return static_cast<int>(ErrorCode::kProvenance);
      }
    } else if (budget_cmd->parsed()) {
      long steps = max_steps_for_budget(epsilon, delta, q, sigma);
      std::cout << steps << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
