#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "nlohmann/json.hpp"

#include "dpgomi/error.hpp"
#include "dpgomi/hash.hpp"
#include "dpgomi/io.hpp"
#include "dpgomi/manifest.hpp"
#include "dpgomi/pipeline.hpp"

using namespace dpgomi;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reduced toy configuration; a full run takes about a second.
json fast_config(std::uint64_t seed, double epsilon) {
  return json{
      {"name", "fast-toy"},
      {"seed", seed},
      {"dataset",
       {{"kind", "toy2d"},
        {"n_train", 800},
        {"n_test", 400},
        {"stddev", 0.05},
        {"centers",
         {{0.2, 0.2}, {0.8, 0.8}, {0.40, 0.60}, {0.60, 0.40}}}}},
      {"partition", {{"label_fraction", 0.3333}, {"public_classes", {0, 1}}}},
      {"public_gan",
       {{"latent_dim", 4},
        {"steps", 300},
        {"batch_size", 32},
        {"critic_steps", 2},
        {"lr", 2e-3},
        {"weight_clip", 0.1},
        {"gen_hidden", {16, 16}},
        {"disc_hidden", {16, 16}}}},
      {"inversion",
       {{"method", "gomi"}, {"iterations", 60}, {"restarts", 1},
        {"learning_rate", 0.05}}},
      {"dp",
       {{"epsilon", epsilon},
        {"delta", 1e-5},
        {"sigma", 2.5},
        {"clip_norm", 1.0},
        {"sample_rate", 0.08}}},
      {"latent_gan",
       {{"inner_latent_dim", 2},
        {"critic_steps", 2},
        {"max_steps", 300},
        {"gen_batch", 32},
        {"lr", 1e-3},
        {"weight_clip", 0.5},
        {"gen_hidden", {16, 16}},
        {"critic_hidden", {16, 16}}}},
      {"synthesis", {{"count", 400}}},
      {"evaluation",
       {{"label_classifier", {{"hidden", {16, 8}}, {"steps", 400}}},
        {"downstream", {{"hidden", {8, 8}}, {"steps", 300}}}}}};
}

std::string fresh_dir(const std::string& name) {
  std::string dir = (fs::temp_directory_path() / name).string();
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("full toy pipeline: budget, replay, audit, chain") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(7, 10.0));
  std::string dir = fresh_dir("dpgomi_pipe_full");
  PipelineResult result = run_pipeline(cfg, dir);

  CHECK(fs::exists(result.report_path));
  CHECK(result.epsilon_spent <= 10.0);
  CHECK(result.fid > 0.0);

  // Accountant replay from the manifest history.
  RunManifest dp_m = RunManifest::read(dir + "/dp_gan/manifest.json");
  CHECK(replay_epsilon(dp_m.accountant_history, dp_m.privacy.delta) ==
        doctest::Approx(dp_m.privacy.epsilon).epsilon(1e-12));

  // Post-processing invariance: synthesis and evaluation echo the record.
  RunManifest synth_m = RunManifest::read(dir + "/synthesis/manifest.json");
  RunManifest eval_m = RunManifest::read(dir + "/evaluation/manifest.json");
  CHECK(synth_m.privacy == dp_m.privacy);
  CHECK(eval_m.privacy == dp_m.privacy);

  // Access audit: the private split is only ever materialized by invert.
  CHECK(result.audit.reads_of("d_s", "invert") > 0);
  CHECK(result.audit.reads_of_tag_excluding("d_s", "invert") == 0);

  // Manifest chain verification passes on an untouched run.
  CHECK(verify_manifest_chain(dir).empty());

  // The write-ahead accountant log has one record per accounted step.
  std::ifstream audit_log(dir + "/dp_gan/audit.log");
  long lines = 0;
  for (std::string line; std::getline(audit_log, line);) ++lines;
  CHECK(lines == dp_m.privacy.steps);
}

TEST_CASE("identical config and seeds replay to an identical report") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(3, 10.0));
  std::string dir_a = fresh_dir("dpgomi_pipe_rep_a");
  std::string dir_b = fresh_dir("dpgomi_pipe_rep_b");
  run_pipeline(cfg, dir_a);
  run_pipeline(cfg, dir_b);
  CHECK(sha256_file(dir_a + "/final_report.txt") ==
        sha256_file(dir_b + "/final_report.txt"));
  CHECK(sha256_file(dir_a + "/synthesis/images.bin") ==
        sha256_file(dir_b + "/synthesis/images.bin"));

  PipelineConfig other = cfg;
  other.seed = 4;
  other.dataset.seed = 4;
  other.public_gan.seed = 4;
  other.inversion.seed = 4;
  other.latent_gan.seed = 4;
  std::string dir_c = fresh_dir("dpgomi_pipe_rep_c");
  run_pipeline(other, dir_c);
  CHECK(sha256_file(dir_a + "/final_report.txt") !=
        sha256_file(dir_c + "/final_report.txt"));
}

TEST_CASE("zero epsilon budget halts at train-dp with budget-exhausted") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(5, 0.0));
  std::string dir = fresh_dir("dpgomi_pipe_zero");
  try {
    run_pipeline(cfg, dir);
    FAIL("expected budget exhaustion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBudgetExhausted);
  }
  // Artifacts of completed stages survive the halt.
  CHECK(fs::exists(dir + "/latents/latents.bin"));
  CHECK_FALSE(fs::exists(dir + "/dp_gan/g_ds.ckpt"));
}

TEST_CASE("tampered privacy record is flagged by chain verification") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(11, 10.0));
  std::string dir = fresh_dir("dpgomi_pipe_tamper");
  run_pipeline(cfg, dir);
  REQUIRE(verify_manifest_chain(dir).empty());

  // Edit epsilon in the synthesis manifest.
  const std::string path = dir + "/synthesis/manifest.json";
  json m = json::parse(read_text_file(path));
  m["privacy"]["epsilon"] = m["privacy"]["epsilon"].get<double>() * 0.5;
  write_text_file(path, m.dump(2) + "\n");

  auto violations = verify_manifest_chain(dir);
  REQUIRE_FALSE(violations.empty());
  bool found = false;
  for (const auto& v : violations) {
    if (v.message.find("privacy record mutated") != std::string::npos)
      found = true;
  }
  CHECK(found);
}

TEST_CASE("tampered artifact bytes are flagged by chain verification") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(13, 10.0));
  std::string dir = fresh_dir("dpgomi_pipe_tamper2");
  run_pipeline(cfg, dir);
  REQUIRE(verify_manifest_chain(dir).empty());

  std::ofstream out(dir + "/latents/mse.txt", std::ios::app);
  out << "0.123\n";
  out.close();
  auto violations = verify_manifest_chain(dir);
  REQUIRE_FALSE(violations.empty());
  bool found = false;
  for (const auto& v : violations) {
    if (v.message.find("checksum mismatch") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("inconsistent accountant history is flagged by replay") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(17, 10.0));
  std::string dir = fresh_dir("dpgomi_pipe_tamper3");
  run_pipeline(cfg, dir);

  const std::string path = dir + "/dp_gan/manifest.json";
  json m = json::parse(read_text_file(path));
  m["accountant_history"][0]["steps"] =
      m["accountant_history"][0]["steps"].get<long>() - 10;
  m["privacy"]["steps"] = m["accountant_history"][0]["steps"].get<long>();
  write_text_file(path, m.dump(2) + "\n");

  auto violations = verify_manifest_chain(dir);
  bool found = false;
  for (const auto& v : violations) {
    if (v.message.find("accountant replay disagrees") != std::string::npos)
      found = true;
  }
  CHECK(found);
}

TEST_CASE("synthesize without the upstream manifest is a provenance error") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(19, 10.0));
  std::string dir = fresh_dir("dpgomi_pipe_missing");
  stage_dataset(cfg, dir);
  stage_partition(cfg, dir);
  stage_train_public(cfg, dir);
  // Skip train-dp entirely; synthesize must refuse.
  try {
    stage_synthesize(cfg, dir);
    FAIL("expected provenance error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kProvenance);
  }
}

TEST_CASE("training on real private data bounds the synthetic score") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(37, 10.0));
  std::string dir = fresh_dir("dpgomi_pipe_ceiling");
  PipelineResult r = run_pipeline(cfg, dir);

  // Debug path: downstream classifier trained directly on the real private
  // split, skipping synthesis entirely.
  LabeledDataset source =
      load_labeled_dataset(dir + "/dataset/train.bin", "toy2d");
  LabeledDataset d_s =
      source.select(read_index_list(dir + "/partition/d_s.idx"));
  LabeledDataset test =
      load_labeled_dataset(dir + "/dataset/test.bin", "toy2d");
  LabeledDataset test_private = split_test_private(test, {2, 3});
  double ceiling = downstream_precision(d_s.images, d_s.labels, test_private,
                                        cfg.downstream);
  CHECK(ceiling + 1e-9 >= r.downstream_macro_precision);
}

TEST_CASE("config hash is stable under json round-trip") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(23, 10.0));
  PipelineConfig back = PipelineConfig::from_json(cfg.to_json());
  CHECK(cfg.config_hash() == back.config_hash());
}

TEST_CASE("partition stage emits sorted index lists and a split manifest") {
  PipelineConfig cfg = PipelineConfig::from_json(fast_config(29, 10.0));
  std::string dir = fresh_dir("dpgomi_pipe_partition");
  stage_dataset(cfg, dir);
  stage_partition(cfg, dir);

  auto d_l = read_index_list(dir + "/partition/d_l.idx");
  auto d_p = read_index_list(dir + "/partition/d_p.idx");
  auto d_s = read_index_list(dir + "/partition/d_s.idx");
  CHECK(std::is_sorted(d_l.begin(), d_l.end()));
  CHECK(std::is_sorted(d_p.begin(), d_p.end()));
  CHECK(std::is_sorted(d_s.begin(), d_s.end()));
  CHECK(d_l.size() + d_p.size() + d_s.size() == 800);

  std::string split_txt = read_text_file(dir + "/partition/split.txt");
  CHECK(split_txt.find("dataset: toy2d") != std::string::npos);
  CHECK(split_txt.find("index_checksum: ") != std::string::npos);
  CHECK(split_txt.find("public_classes: 0,1") != std::string::npos);
}

TEST_CASE("checkpoint round-trips preserve generator behaviour") {
  Rng rng(31, "ckpt");
  Generator gen = make_mlp_generator(3, {8}, {1, 1, 2}, true, rng);
  std::string path =
      (fs::temp_directory_path() / "dpgomi_gen.ckpt").string();
  save_generator(path, gen, "cfg-hash");
  Generator back = load_generator(path);
  CHECK(back.checksum() == gen.checksum());
  CHECK(back.latent_dim == 3);
  Matrix z = sample_prior(LatentPrior{3}, 5, 1);
  CHECK((back.generate(z) - gen.generate(z)).norm() == doctest::Approx(0.0));
  fs::remove(path);
}
