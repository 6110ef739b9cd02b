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

#include "dpgomi/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nlohmann/json.hpp"

#include "dpgomi/error.hpp"
#include "dpgomi/hash.hpp"
#include "dpgomi/io.hpp"
#include "dpgomi/metrics.hpp"
#include "dpgomi/synthesis.hpp"

namespace dpgomi {

namespace fs = std::filesystem;
using nlohmann::json;

long AccessAudit::reads_of(const std::string& tag,
                           const std::string& stage) const {
  auto it = reads.find({tag, stage});
  return it == reads.end() ? 0 : it->second;
}

long AccessAudit::reads_of_tag_excluding(const std::string& tag,
                                         const std::string& stage) const {
  long total = 0;
  for (const auto& [key, n] : reads) {
    if (key.first == tag && key.second != stage) total += n;
  }
  return total;
}

std::string AccessAudit::summary() const {
  std::ostringstream out;
  for (const auto& [key, n] : reads) {
    out << "  " << key.first << " read by " << key.second << ": " << n
        << " examples\n";
  }
  return out.str();
}

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(9) << v;
  return out.str();
}

std::string rel_to_root(const std::string& path, const std::string& root) {
  std::error_code ec;
  fs::path rel = fs::relative(path, root, ec);
  if (ec || rel.empty() || rel.string().starts_with(".."))
    return fs::absolute(path).string();
  return rel.string();
}

ArtifactRef make_ref(const std::string& name, const std::string& path,
                     const std::string& root) {
  return ArtifactRef{name, rel_to_root(path, root), sha256_file(path)};
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

std::string pick(const std::string& override_path, const fs::path& fallback) {
  return override_path.empty() ? fallback.string() : override_path;
}

LabeledDataset load_split_part(const std::string& dataset_path,
                               const std::string& idx_path,
                               const std::string& tag,
                               const std::string& stage, AccessAudit* audit,
                               const std::string& name) {
  LabeledDataset source = load_labeled_dataset(dataset_path, name);
  std::vector<int> indices = read_index_list(idx_path);
  LabeledDataset part = source.select(indices);
  part.name = name + "/" + tag;
  if (audit != nullptr) audit->record(tag, stage, part.n());
  return part;
}

std::set<int> private_class_set(const PipelineConfig& cfg, int num_classes) {
  std::set<int> priv;
  for (int c = 0; c < num_classes; ++c)
    if (cfg.public_classes.count(c) == 0) priv.insert(c);
  return priv;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw io_error("unreadable config: " + path);
  return from_json(j);
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig cfg;
  cfg.name = j.value("name", cfg.name);
  cfg.seed = j.value("seed", cfg.seed);

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    cfg.dataset.kind = d.value("kind", cfg.dataset.kind);
    cfg.dataset.name = d.value("name", cfg.dataset.kind);
    cfg.dataset.n_train = d.value("n_train", cfg.dataset.n_train);
    cfg.dataset.n_test = d.value("n_test", cfg.dataset.n_test);
    cfg.dataset.stddev = d.value("stddev", cfg.dataset.stddev);
    cfg.dataset.seed = d.value("seed", cfg.seed);
    if (d.contains("centers")) {
      cfg.dataset.centers.clear();
      for (const auto& c : d.at("centers"))
        cfg.dataset.centers.push_back({c.at(0).get<double>(),
                                       c.at(1).get<double>()});
    }
    cfg.dataset.train_path = d.value("train", std::string{});
    cfg.dataset.test_path = d.value("test", std::string{});
  } else {
    cfg.dataset.seed = cfg.seed;
  }

  if (j.contains("partition")) {
    const json& p = j.at("partition");
    cfg.label_fraction = p.value("label_fraction", cfg.label_fraction);
    cfg.stratified = p.value("stratified", cfg.stratified);
    if (p.contains("preset")) {
      auto preset = public_class_preset(p.at("preset").get<std::string>());
      DPGOMI_CHECK_ARG(preset.has_value(), "unknown partition preset");
      cfg.public_classes = *preset;
    }
    if (p.contains("public_classes")) {
      cfg.public_classes.clear();
      for (const auto& c : p.at("public_classes"))
        cfg.public_classes.insert(c.get<int>());
    }
  }

  auto stage_seed = [&](const json& block) {
    return block.value("seed", cfg.seed);
  };

  if (j.contains("public_gan")) {
    const json& g = j.at("public_gan");
    auto& c = cfg.public_gan;
    c.objective = g.value("objective", std::string("wasserstein")) == "vanilla"
                      ? GanObjective::vanilla
                      : GanObjective::wasserstein;
    c.latent_dim = g.value("latent_dim", c.latent_dim);
    c.steps = g.value("steps", c.steps);
    c.batch_size = g.value("batch_size", c.batch_size);
    c.critic_steps = g.value("critic_steps", c.critic_steps);
    c.lr = g.value("lr", c.lr);
    c.adam_beta1 = g.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = g.value("adam_beta2", c.adam_beta2);
    c.weight_clip = g.value("weight_clip", c.weight_clip);
    c.gradient_penalty = g.value("gradient_penalty", c.gradient_penalty);
    c.gen_hidden = g.value("gen_hidden", c.gen_hidden);
    c.disc_hidden = g.value("disc_hidden", c.disc_hidden);
    c.seed = stage_seed(g);
  } else {
    cfg.public_gan.seed = cfg.seed;
  }

  if (j.contains("inversion")) {
    const json& v = j.at("inversion");
    auto& c = cfg.inversion;
    cfg.inversion_method =
        method_from_name(v.value("method", std::string("gomi")));
    c.iterations = v.value("iterations", c.iterations);
    c.learning_rate = v.value("learning_rate", c.learning_rate);
    c.adam_beta1 = v.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = v.value("adam_beta2", c.adam_beta2);
    c.epsilon_div = v.value("epsilon_div", c.epsilon_div);
    c.restarts = v.value("restarts", c.restarts);
    c.objective_form =
        v.value("objective_form", std::string("log-surrogate")) ==
                "literal-ratio"
            ? ObjectiveForm::literal_ratio
            : ObjectiveForm::log_surrogate;
    c.seed = stage_seed(v);
  } else {
    cfg.inversion.seed = cfg.seed;
  }

  if (j.contains("dp")) {
    const json& d = j.at("dp");
    auto& c = cfg.latent_gan.dp;
    if (d.contains("epsilon")) {
      // "inf" selects the non-private sentinel.
      c.epsilon_budget = d.at("epsilon").is_string()
                             ? kInfiniteEpsilon
                             : d.at("epsilon").get<double>();
    }
    c.delta = d.value("delta", c.delta);
    c.noise_multiplier = d.value("sigma", c.noise_multiplier);
    c.clip_norm = d.value("clip_norm", c.clip_norm);
    c.sample_rate = d.value("sample_rate", c.sample_rate);
  }

  if (j.contains("latent_gan")) {
    const json& g = j.at("latent_gan");
    auto& c = cfg.latent_gan;
    c.inner_latent_dim = g.value("inner_latent_dim", c.inner_latent_dim);
    c.critic_steps = g.value("critic_steps", c.critic_steps);
    c.max_steps = g.value("max_steps", c.max_steps);
    c.gen_batch = g.value("gen_batch", c.gen_batch);
    c.lr = g.value("lr", c.lr);
    c.adam_beta1 = g.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = g.value("adam_beta2", c.adam_beta2);
    c.weight_clip = g.value("weight_clip", c.weight_clip);
    c.gen_hidden = g.value("gen_hidden", c.gen_hidden);
    c.critic_hidden = g.value("critic_hidden", c.critic_hidden);
    c.seed = stage_seed(g);
  } else {
    cfg.latent_gan.seed = cfg.seed;
  }

  if (j.contains("synthesis")) {
    cfg.synthesis_count = j.at("synthesis").value("count", cfg.synthesis_count);
    cfg.synthesis_quantize =
        j.at("synthesis").value("quantize", cfg.synthesis_quantize);
  }

  auto parse_classifier = [&](const char* key, ClassifierConfig& c) {
    if (!j.contains("evaluation") || !j.at("evaluation").contains(key)) {
      c.seed = cfg.seed;
      return;
    }
    const json& e = j.at("evaluation").at(key);
    c.hidden = e.value("hidden", c.hidden);
    c.steps = e.value("steps", c.steps);
    c.batch_size = e.value("batch_size", c.batch_size);
    c.lr = e.value("lr", c.lr);
    c.holdout_fraction = e.value("holdout_fraction", c.holdout_fraction);
    c.seed = stage_seed(e);
  };
  parse_classifier("label_classifier", cfg.label_classifier);
  parse_classifier("downstream", cfg.downstream);
  return cfg;
}

json PipelineConfig::to_json() const {
  json centers = json::array();
  for (const auto& c : dataset.centers) centers.push_back({c[0], c[1]});
  const auto& dp = latent_gan.dp;
  return json{
      {"name", name},
      {"seed", seed},
      {"dataset",
       {{"kind", dataset.kind},
        {"name", dataset.name},
        {"n_train", dataset.n_train},
        {"n_test", dataset.n_test},
        {"stddev", dataset.stddev},
        {"centers", centers},
        {"seed", dataset.seed},
        {"train", dataset.train_path},
        {"test", dataset.test_path}}},
      {"partition",
       {{"label_fraction", label_fraction},
        {"public_classes", std::vector<int>(public_classes.begin(),
                                            public_classes.end())},
        {"stratified", stratified}}},
      {"public_gan",
       {{"objective", public_gan.objective == GanObjective::vanilla
                          ? "vanilla"
                          : "wasserstein"},
        {"latent_dim", public_gan.latent_dim},
        {"steps", public_gan.steps},
        {"batch_size", public_gan.batch_size},
        {"critic_steps", public_gan.critic_steps},
        {"lr", public_gan.lr},
        {"adam_beta1", public_gan.adam_beta1},
        {"adam_beta2", public_gan.adam_beta2},
        {"weight_clip", public_gan.weight_clip},
        {"gradient_penalty", public_gan.gradient_penalty},
        {"gen_hidden", public_gan.gen_hidden},
        {"disc_hidden", public_gan.disc_hidden},
        {"seed", public_gan.seed}}},
      {"inversion",
       {{"method", method_name(inversion_method)},
        {"iterations", inversion.iterations},
        {"learning_rate", inversion.learning_rate},
        {"adam_beta1", inversion.adam_beta1},
        {"adam_beta2", inversion.adam_beta2},
        {"epsilon_div", inversion.epsilon_div},
        {"objective_form",
         inversion.objective_form == ObjectiveForm::literal_ratio
             ? "literal-ratio"
             : "log-surrogate"},
        {"restarts", inversion.restarts},
        {"seed", inversion.seed}}},
      {"dp",
       {{"epsilon", dp.epsilon_budget == kInfiniteEpsilon
                        ? json("inf")
                        : json(dp.epsilon_budget)},
        {"delta", dp.delta},
        {"sigma", dp.noise_multiplier},
        {"clip_norm", dp.clip_norm},
        {"sample_rate", dp.sample_rate}}},
      {"latent_gan",
       {{"inner_latent_dim", latent_gan.inner_latent_dim},
        {"critic_steps", latent_gan.critic_steps},
        {"max_steps", latent_gan.max_steps},
        {"gen_batch", latent_gan.gen_batch},
        {"lr", latent_gan.lr},
        {"adam_beta1", latent_gan.adam_beta1},
        {"adam_beta2", latent_gan.adam_beta2},
        {"weight_clip", latent_gan.weight_clip},
        {"gen_hidden", latent_gan.gen_hidden},
        {"critic_hidden", latent_gan.critic_hidden},
        {"seed", latent_gan.seed}}},
      {"synthesis",
       {{"count", synthesis_count}, {"quantize", synthesis_quantize}}},
      {"evaluation",
       {{"label_classifier",
         {{"hidden", label_classifier.hidden},
          {"steps", label_classifier.steps},
          {"batch_size", label_classifier.batch_size},
          {"lr", label_classifier.lr},
          {"holdout_fraction", label_classifier.holdout_fraction},
          {"seed", label_classifier.seed}}},
        {"downstream",
         {{"hidden", downstream.hidden},
          {"steps", downstream.steps},
          {"batch_size", downstream.batch_size},
          {"lr", downstream.lr},
          {"holdout_fraction", downstream.holdout_fraction},
          {"seed", downstream.seed}}}}}};
}

std::string PipelineConfig::config_hash() const {
  return sha256_hex(to_json().dump());
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

RunManifest stage_dataset(const PipelineConfig& cfg,
                          const std::string& run_dir,
                          const StageOverrides& ov) {
  const std::string out_dir = pick(ov.out_dir, fs::path(run_dir) / "dataset");
  ensure_dir(out_dir);
  const std::string train_path = out_dir + "/train.bin";
  const std::string test_path = out_dir + "/test.bin";

  if (cfg.dataset.kind == "toy2d") {
    ToyMixtureConfig toy;
    toy.n = cfg.dataset.n_train;
    toy.centers = cfg.dataset.centers;
    toy.stddev = cfg.dataset.stddev;
    toy.seed = cfg.dataset.seed;
    toy.name = cfg.dataset.name;
    LabeledDataset train = make_toy_mixture(toy);
    toy.n = cfg.dataset.n_test;
    toy.seed = cfg.dataset.seed + 1;
    LabeledDataset test = make_toy_mixture(toy);
    save_image_archive(train_path, train.images, train.height, train.width,
                       train.channels, &train.labels);
    save_image_archive(test_path, test.images, test.height, test.width,
                       test.channels, &test.labels);
  } else if (cfg.dataset.kind == "file") {
    DPGOMI_CHECK_ARG(!cfg.dataset.train_path.empty() &&
                         !cfg.dataset.test_path.empty(),
                     "file dataset requires train and test paths");
    fs::copy_file(cfg.dataset.train_path, train_path,
                  fs::copy_options::overwrite_existing);
    fs::copy_file(cfg.dataset.test_path, test_path,
                  fs::copy_options::overwrite_existing);
  } else {
    throw invalid_argument("unknown dataset kind: " + cfg.dataset.kind);
  }

  RunManifest m;
  m.stage = "dataset";
  m.config_hash = cfg.config_hash();
  m.outputs = {make_ref("train", train_path, run_dir),
               make_ref("test", test_path, run_dir)};
  m.seed = cfg.dataset.seed;
  m.timestamp = current_timestamp();
  m.write(out_dir + "/manifest.json");
  return m;
}

RunManifest stage_partition(const PipelineConfig& cfg,
                            const std::string& run_dir, AccessAudit* audit,
                            const StageOverrides& ov) {
  const std::string out_dir =
      pick(ov.out_dir, fs::path(run_dir) / "partition");
  ensure_dir(out_dir);
  const std::string dataset_path =
      pick(ov.dataset_train, fs::path(run_dir) / "dataset" / "train.bin");

  LabeledDataset source = load_labeled_dataset(dataset_path, cfg.dataset.name);
  if (audit != nullptr) audit->record("source", "partition", source.n());

  PartitionOptions options;
  options.label_fraction = cfg.label_fraction;
  options.public_classes = cfg.public_classes;
  options.seed = cfg.seed;
  options.stratified = cfg.stratified;
  DatasetSplit split = partition_dataset(source, options);

  write_index_list(out_dir + "/d_l.idx", split.l_indices);
  write_index_list(out_dir + "/d_p.idx", split.p_indices);
  write_index_list(out_dir + "/d_s.idx", split.s_indices);

  auto class_line = [](const std::set<int>& s) {
    std::ostringstream out;
    bool first = true;
    for (int c : s) {
      if (!first) out << ",";
      out << c;
      first = false;
    }
    return out.str();
  };
  std::ostringstream split_txt;
  split_txt << "dataset: " << cfg.dataset.name << "\n"
            << "seed: " << cfg.seed << "\n"
            << "label_fraction: " << fmt(cfg.label_fraction) << "\n"
            << "public_classes: " << class_line(split.public_classes) << "\n"
            << "private_classes: " << class_line(split.private_classes) << "\n"
            << "count_d_l: " << split.d_l.n() << "\n"
            << "count_d_p: " << split.d_p.n() << "\n"
            << "count_d_s: " << split.d_s.n() << "\n"
            << "index_checksum: " << split.index_checksum() << "\n";
  write_text_file(out_dir + "/split.txt", split_txt.str());

  RunManifest m;
  m.stage = "partition";
  m.config_hash = cfg.config_hash();
  m.inputs = {make_ref("train", dataset_path, run_dir)};
  m.outputs = {make_ref("d_l.idx", out_dir + "/d_l.idx", run_dir),
               make_ref("d_p.idx", out_dir + "/d_p.idx", run_dir),
               make_ref("d_s.idx", out_dir + "/d_s.idx", run_dir),
               make_ref("split.txt", out_dir + "/split.txt", run_dir)};
  m.seed = cfg.seed;
  m.timestamp = current_timestamp();
  m.write(out_dir + "/manifest.json");
  return m;
}

RunManifest stage_train_public(const PipelineConfig& cfg,
                               const std::string& run_dir,
                               AccessAudit* audit,
                               const StageOverrides& ov) {
  const std::string out_dir =
      pick(ov.out_dir, fs::path(run_dir) / "public_gan");
  ensure_dir(out_dir);
  const std::string dataset_path =
      pick(ov.dataset_train, fs::path(run_dir) / "dataset" / "train.bin");
  const std::string split_dir =
      pick(ov.split_dir, fs::path(run_dir) / "partition");
  const std::string idx_path = (fs::path(split_dir) / "d_p.idx").string();

  LabeledDataset d_p = load_split_part(dataset_path, idx_path, "d_p",
                                       "train-public", audit,
                                       cfg.dataset.name);
  PublicGanResult result = train_public_gan(d_p, cfg.public_gan);

  const std::string gen_path = out_dir + "/generator.ckpt";
  const std::string disc_path = out_dir + "/discriminator.ckpt";
  save_generator(gen_path, result.generator, cfg.config_hash());
  save_discriminator(disc_path, result.discriminator, cfg.config_hash());

  RunManifest m;
  m.stage = "train-public";
  m.config_hash = cfg.config_hash();
  m.inputs = {make_ref("train", dataset_path, run_dir),
              make_ref("d_p.idx", idx_path, run_dir)};
  m.outputs = {make_ref("generator.ckpt", gen_path, run_dir),
               make_ref("discriminator.ckpt", disc_path, run_dir)};
  m.seed = cfg.public_gan.seed;
  m.timestamp = current_timestamp();
  m.write(out_dir + "/manifest.json");
  return m;
}

RunManifest stage_invert(const PipelineConfig& cfg, const std::string& run_dir,
                         AccessAudit* audit, const StageOverrides& ov) {
  const std::string out_dir = pick(ov.out_dir, fs::path(run_dir) / "latents");
  ensure_dir(out_dir);
  const std::string dataset_path =
      pick(ov.dataset_train, fs::path(run_dir) / "dataset" / "train.bin");
  const std::string split_dir =
      pick(ov.split_dir, fs::path(run_dir) / "partition");
  const std::string idx_path = (fs::path(split_dir) / "d_s.idx").string();
  const std::string gen_path =
      pick(ov.public_ckpt,
           fs::path(run_dir) / "public_gan" / "generator.ckpt");

  LabeledDataset d_s = load_split_part(dataset_path, idx_path, "d_s", "invert",
                                       audit, cfg.dataset.name);
  Generator gen = load_generator(gen_path);

  InversionBatchReport report;
  LatentDataset latents =
      invert_batch(gen, d_s, cfg.inversion_method, cfg.inversion, &report);

  const std::string latents_path = out_dir + "/latents.bin";
  const std::string mse_path = out_dir + "/mse.txt";
  save_latents(latents_path, latents);
  save_mse_sidecar(mse_path, latents.reconstruction_mse);

  RunManifest m;
  m.stage = "invert";
  m.config_hash = cfg.config_hash();
  m.inputs = {make_ref("train", dataset_path, run_dir),
              make_ref("d_s.idx", idx_path, run_dir),
              make_ref("generator.ckpt", gen_path, run_dir)};
  m.outputs = {make_ref("latents.bin", latents_path, run_dir),
               make_ref("mse.txt", mse_path, run_dir)};
  m.seed = cfg.inversion.seed;
  m.timestamp = current_timestamp();
  m.write(out_dir + "/manifest.json");
  return m;
}

RunManifest stage_train_dp(const PipelineConfig& cfg,
                           const std::string& run_dir, AccessAudit* audit,
                           const StageOverrides& ov) {
  const std::string out_dir = pick(ov.out_dir, fs::path(run_dir) / "dp_gan");
  ensure_dir(out_dir);
  const std::string latents_dir =
      pick(ov.latents_dir, fs::path(run_dir) / "latents");
  const std::string latents_path =
      (fs::path(latents_dir) / "latents.bin").string();

  LatentDataset latents = load_latents(latents_path);
  if (audit != nullptr)
    audit->record("latents", "train-dp", latents.n());

  // Write-ahead accountant log: flushed line by line so that spent budget
  // survives a crash.
  const std::string audit_path = out_dir + "/audit.log";
  std::ofstream audit_log(audit_path, std::ios::trunc);
  if (!audit_log) throw io_error("cannot open audit log: " + audit_path);
  auto audit_line = [&audit_log](const std::string& line) {
    audit_log << line << "\n";
    audit_log.flush();
  };

  DpGanResult result =
      train_dp_latent_gan(latents, cfg.latent_gan, nullptr, audit_line);
  audit_log.close();

  const std::string ckpt_path = out_dir + "/g_ds.ckpt";
  save_generator(ckpt_path, result.g_ds, cfg.config_hash());

  const auto& dp = cfg.latent_gan.dp;
  RunManifest m;
  m.stage = "train-dp";
  m.config_hash = cfg.config_hash();
  m.inputs = {make_ref("latents.bin", latents_path, run_dir)};
  m.outputs = {make_ref("g_ds.ckpt", ckpt_path, run_dir),
               make_ref("audit.log", audit_path, run_dir)};
  m.privacy.is_public = false;
  m.privacy.delta = dp.delta;
  m.privacy.sigma = dp.noise_multiplier;
  m.privacy.clip_norm = dp.clip_norm;
  m.privacy.sample_rate = dp.sample_rate;
  m.privacy.steps = result.report.steps_run;
  m.privacy.epsilon =
      dp.non_private()
          ? kInfiniteEpsilon
          : rdp_to_dp(result.accountant, dp.delta).epsilon;
  m.accountant_history = result.accountant.history;
  m.seed = cfg.latent_gan.seed;
  m.timestamp = current_timestamp();
  m.write(out_dir + "/manifest.json");
  return m;
}

RunManifest stage_synthesize(const PipelineConfig& cfg,
                             const std::string& run_dir, AccessAudit* audit,
                             const StageOverrides& ov) {
  const std::string out_dir =
      pick(ov.out_dir, fs::path(run_dir) / "synthesis");
  ensure_dir(out_dir);
  const std::string dp_dir = pick(ov.dp_dir, fs::path(run_dir) / "dp_gan");
  const std::string dp_ckpt = (fs::path(dp_dir) / "g_ds.ckpt").string();
  const std::string public_ckpt =
      pick(ov.public_ckpt,
           fs::path(run_dir) / "public_gan" / "generator.ckpt");
  const std::string dp_manifest_path =
      (fs::path(dp_dir) / "manifest.json").string();
  if (!fs::exists(dp_manifest_path)) {
    throw Error(ErrorCode::kProvenance,
                "missing upstream manifest: " + dp_manifest_path);
  }
  RunManifest upstream = RunManifest::read(dp_manifest_path);

  Generator g_ds = load_generator(dp_ckpt);
  Generator g_p = load_generator(public_ckpt);
  SyntheticDataset synth = synthesize(g_ds, g_p, cfg.synthesis_count, cfg.seed,
                                      g_p.output_shape);
  (void)audit;  // synthesis touches no dataset

  const std::string images_path = out_dir + "/images.bin";
  save_image_archive(images_path, synth.images01, synth.height, synth.width,
                     synth.channels, nullptr, cfg.synthesis_quantize);

  RunManifest m;
  m.stage = "synthesize";
  m.config_hash = cfg.config_hash();
  m.inputs = {make_ref("g_ds.ckpt", dp_ckpt, run_dir),
              make_ref("generator.ckpt", public_ckpt, run_dir),
              make_ref("dp_gan.manifest", dp_manifest_path, run_dir)};
  m.outputs = {make_ref("images.bin", images_path, run_dir)};
  // Theorem: post-processing adds no privacy cost; the record is copied
  // verbatim from the DP training stage.
  m.privacy = upstream.privacy;
  m.accountant_history = upstream.accountant_history;
  m.seed = cfg.seed;
  m.timestamp = current_timestamp();
  m.write(out_dir + "/manifest.json");
  return m;
}

RunManifest stage_evaluate(const PipelineConfig& cfg,
                           const std::string& run_dir, AccessAudit* audit,
                           const StageOverrides& ov) {
  const std::string out_dir =
      pick(ov.out_dir, fs::path(run_dir) / "evaluation");
  ensure_dir(out_dir);
  const std::string synth_dir =
      pick(ov.synthesis_dir, fs::path(run_dir) / "synthesis");
  const std::string synth_path = (fs::path(synth_dir) / "images.bin").string();
  const std::string synth_manifest_path =
      (fs::path(synth_dir) / "manifest.json").string();
  const std::string dataset_path =
      pick(ov.dataset_train, fs::path(run_dir) / "dataset" / "train.bin");
  const std::string test_path =
      pick(ov.dataset_test, fs::path(run_dir) / "dataset" / "test.bin");
  const std::string split_dir =
      pick(ov.split_dir, fs::path(run_dir) / "partition");
  const std::string idx_path = (fs::path(split_dir) / "d_l.idx").string();

  if (!fs::exists(synth_manifest_path)) {
    throw Error(ErrorCode::kProvenance,
                "missing upstream manifest: " + synth_manifest_path);
  }
  RunManifest upstream = RunManifest::read(synth_manifest_path);

  ImageArchive synth = load_image_archive(synth_path);
  LabeledDataset d_l = load_split_part(dataset_path, idx_path, "d_l",
                                       "evaluate", audit, cfg.dataset.name);
  LabeledDataset test =
      load_labeled_dataset(test_path, cfg.dataset.name + "/test");
  if (audit != nullptr) audit->record("test", "evaluate", test.n());
  std::set<int> private_classes = private_class_set(cfg, test.num_classes);
  LabeledDataset test_private = split_test_private(test, private_classes);

  ClassifierReport backbone_report;
  FeatureBackbone backbone;
  if (ov.backbone_ckpt.empty()) {
    backbone = train_label_classifier(d_l, cfg.label_classifier,
                                      &backbone_report);
  } else {
    backbone = load_backbone(ov.backbone_ckpt);
  }
  const std::string backbone_path = out_dir + "/backbone.ckpt";
  save_backbone(backbone_path, backbone, cfg.config_hash());

  // FID reference: the private half of the test set, keeping the training
  // private split untouched outside inversion.
  Matrix synth_feats = backbone.features(synth.images);
  Matrix real_feats = backbone.features(test_private.images);
  double fid_value =
      fid(summarize_features(synth_feats), summarize_features(real_feats));
  double is_value = inception_score(backbone.probs(synth.images));

  Labeling labeling = label_synthetic(backbone, synth.images);
  std::vector<std::pair<int, double>> per_class;
  double precision = 0.0;
  bool downstream_degenerate = false;
  try {
    precision = downstream_precision(synth.images, labeling.labels,
                                     test_private, cfg.downstream, &per_class);
  } catch (const Error& e) {
    // A release too poor to cover two private classes scores zero rather
    // than aborting the evaluation; FID and IS remain meaningful.
    if (e.code() != ErrorCode::kTrainingFailure) throw;
    downstream_degenerate = true;
  }

  std::map<int, long> label_counts;
  for (int y : labeling.labels) ++label_counts[y];

  std::ostringstream report;
  report << "dpgomi evaluation report\n";
  report << "synthetic_samples: " << synth.images.cols() << "\n";
  report << "real_reference: test/private (n=" << test_private.n() << ")\n";
  report << "backbone_checksum: " << backbone.checksum() << "\n";
  report << "backbone_holdout_accuracy: "
         << fmt(backbone_report.holdout_accuracy) << "\n";
  report << "fid: " << fmt(fid_value) << "\n";
  report << "inception_score: " << fmt(is_value) << "\n";
  report << "downstream_macro_precision: " << fmt(precision) << "\n";
  if (downstream_degenerate)
    report << "downstream_degenerate: synthetic labels cover fewer than two "
              "private classes\n";
  for (const auto& [cls, p] : per_class)
    report << "precision_class_" << cls << ": " << fmt(p) << "\n";
  report << "synthetic_label_counts:";
  for (const auto& [cls, n] : label_counts)
    report << " " << cls << "=" << n;
  report << "\n";
  const auto& priv = upstream.privacy;
  if (priv.is_public) {
    report << "privacy: public\n";
  } else {
    report << "privacy: epsilon=" << fmt(priv.epsilon)
           << " delta=" << fmt(priv.delta) << " sigma=" << fmt(priv.sigma)
           << " clip_norm=" << fmt(priv.clip_norm)
           << " sample_rate=" << fmt(priv.sample_rate)
           << " steps=" << priv.steps << " adjacency=" << priv.adjacency
           << " conversion=" << priv.conversion << "\n";
  }
  const std::string report_path = out_dir + "/report.txt";
  write_text_file(report_path, report.str());

  RunManifest m;
  m.stage = "evaluate";
  m.config_hash = cfg.config_hash();
  m.inputs = {make_ref("images.bin", synth_path, run_dir),
              make_ref("train", dataset_path, run_dir),
              make_ref("test", test_path, run_dir),
              make_ref("d_l.idx", idx_path, run_dir),
              make_ref("synthesis.manifest", synth_manifest_path, run_dir)};
  m.outputs = {make_ref("report.txt", report_path, run_dir),
               make_ref("backbone.ckpt", backbone_path, run_dir)};
  m.privacy = upstream.privacy;
  m.accountant_history = upstream.accountant_history;
  m.seed = cfg.label_classifier.seed;
  m.timestamp = current_timestamp();
  m.write(out_dir + "/manifest.json");
  return m;
}

namespace {

// A stage is reusable when its manifest carries the current config hash and
// every recorded output still checksums correctly.
bool stage_cached(const std::string& run_dir, const std::string& stage_dir,
                  const std::string& cfg_hash, RunManifest* out) {
  const std::string path =
      (fs::path(run_dir) / stage_dir / "manifest.json").string();
  if (!fs::exists(path)) return false;
  RunManifest m = RunManifest::read(path);
  if (m.config_hash != cfg_hash) return false;
  for (const auto& ref : m.outputs) {
    fs::path artifact = fs::path(run_dir) / ref.path;
    if (!fs::exists(artifact) ||
        sha256_file(artifact.string()) != ref.sha256)
      return false;
  }
  if (out != nullptr) *out = std::move(m);
  return true;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const std::string& run_dir) {
  ensure_dir(run_dir);
  PipelineResult result;
  AccessAudit& audit = result.audit;
  const std::string cfg_hash = cfg.config_hash();

  std::vector<std::string> resumed;
  auto run_stage = [&](const std::string& stage_dir,
                       const std::function<RunManifest()>& fn) {
    RunManifest cached;
    if (stage_cached(run_dir, stage_dir, cfg_hash, &cached)) {
      resumed.push_back(stage_dir);
      return cached;
    }
    return fn();
  };

  run_stage("dataset", [&] { return stage_dataset(cfg, run_dir); });
  run_stage("partition", [&] { return stage_partition(cfg, run_dir, &audit); });
  run_stage("public_gan",
            [&] { return stage_train_public(cfg, run_dir, &audit); });
  RunManifest invert_m =
      run_stage("latents", [&] { return stage_invert(cfg, run_dir, &audit); });
  RunManifest dp_m =
      run_stage("dp_gan", [&] { return stage_train_dp(cfg, run_dir, &audit); });
  RunManifest synth_m = run_stage(
      "synthesis", [&] { return stage_synthesize(cfg, run_dir, &audit); });
  RunManifest eval_m = run_stage(
      "evaluation", [&] { return stage_evaluate(cfg, run_dir, &audit); });

  // Replay the accountant from the recorded history as an independent check.
  double replayed_eps = 0.0;
  if (!dp_m.privacy.is_public) {
    replayed_eps = replay_epsilon(dp_m.accountant_history, dp_m.privacy.delta);
  }
  result.epsilon_spent = dp_m.privacy.is_public ? 0.0 : dp_m.privacy.epsilon;

  std::vector<ChainViolation> violations = verify_manifest_chain(run_dir);

  const std::string eval_report =
      read_text_file((fs::path(run_dir) / "evaluation" / "report.txt")
                         .string());
  // Pull headline metrics back out of the evaluation report.
  auto metric_of = [&](const std::string& key) {
    auto pos = eval_report.find(key + ": ");
    if (pos == std::string::npos) return 0.0;
    return std::stod(eval_report.substr(pos + key.size() + 2));
  };
  result.fid = metric_of("fid");
  result.inception = metric_of("inception_score");
  result.downstream_macro_precision =
      metric_of("downstream_macro_precision");

  std::ostringstream report;
  report << "dpgomi pipeline report\n";
  report << "name: " << cfg.name << "\n";
  report << "config_hash: " << cfg.config_hash() << "\n";
  report << "stages: dataset partition train-public invert train-dp "
            "synthesize evaluate\n";
  report << "inversion_method: " << method_name(cfg.inversion_method) << "\n";
  if (dp_m.privacy.is_public) {
    report << "privacy: public (non-private debug mode)\n";
  } else {
    report << "privacy: epsilon=" << fmt(dp_m.privacy.epsilon)
           << " delta=" << fmt(dp_m.privacy.delta)
           << " sigma=" << fmt(dp_m.privacy.sigma)
           << " clip_norm=" << fmt(dp_m.privacy.clip_norm)
           << " sample_rate=" << fmt(dp_m.privacy.sample_rate)
           << " steps=" << dp_m.privacy.steps << "\n";
    report << "epsilon_replay: " << fmt(replayed_eps) << " ("
           << (std::abs(replayed_eps - dp_m.privacy.epsilon) <= 1e-9
                   ? "match"
                   : "MISMATCH")
           << ")\n";
    report << "privacy_after_synthesis: "
           << (synth_m.privacy == dp_m.privacy ? "unchanged" : "MUTATED")
           << "\n";
    report << "privacy_after_evaluation: "
           << (eval_m.privacy == dp_m.privacy ? "unchanged" : "MUTATED")
           << "\n";
  }
  if (!resumed.empty()) {
    report << "resumed_stages:";
    for (const auto& st : resumed) report << " " << st;
    report << "\n";
  }
  report << "access_audit:\n" << audit.summary();
  report << "d_s_reads_outside_invert: "
         << audit.reads_of_tag_excluding("d_s", "invert") << "\n";
  report << "evaluation:\n";
  std::istringstream eval_lines(eval_report);
  for (std::string line; std::getline(eval_lines, line);)
    report << "  " << line << "\n";
  report << "manifest_chain: "
         << (violations.empty()
                 ? "ok"
                 : "violations=" + std::to_string(violations.size()))
         << "\n";
  for (const auto& v : violations)
    report << "  violation: " << v.message << " (" << v.manifest_path << ")\n";

  result.report = report.str();
  result.report_path = (fs::path(run_dir) / "final_report.txt").string();
  write_text_file(result.report_path, result.report);
  (void)invert_m;
  return result;
}

}  // namespace dpgomi
