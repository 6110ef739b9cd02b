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

#include "dpgomi/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"

#include "dpgomi/error.hpp"

namespace dpgomi {

using nlohmann::json;

namespace {

constexpr char kCkptMagic[] = "DPGCKPT1";
constexpr char kLatentMagic[] = "DPGLAT1\n";

void write_net_checkpoint(std::ofstream& out, const Net& net,
                          const json& header) {
  const std::string header_str = header.dump();
  out.write(kCkptMagic, 8);
  std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  Vector params = net.get_params();
  std::uint64_t count = static_cast<std::uint64_t>(params.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
}

std::pair<Net, json> read_net_checkpoint(std::ifstream& in,
                                         const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw io_error("bad checkpoint magic: " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_str(len, '\0');
  in.read(header_str.data(), len);
  json header = json::parse(header_str, nullptr, false);
  if (header.is_discarded())
    throw io_error("unreadable checkpoint header: " + path);
  Net net = Net::from_description(header.at("arch"));
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != net.param_count())
    throw io_error("checkpoint parameter count mismatch: " + path);
  Vector params(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw io_error("truncated checkpoint: " + path);
  net.set_params(params);
  return {std::move(net), std::move(header)};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path);
  return in;
}

}  // namespace

void save_generator(const std::string& path, const Generator& gen,
                    const std::string& config_hash) {
  json header{{"kind", "generator"},
              {"arch", gen.net.describe()},
              {"arch_id", gen.arch_id},
              {"latent_dim", gen.latent_dim},
              {"output_shape", gen.output_shape},
              {"config_hash", config_hash}};
  auto out = open_out(path);
  write_net_checkpoint(out, gen.net, header);
  if (!out) throw io_error("write failed: " + path);
}

Generator load_generator(const std::string& path) {
  auto in = open_in(path);
  auto [net, header] = read_net_checkpoint(in, path);
  if (header.at("kind").get<std::string>() != "generator")
    throw io_error("checkpoint is not a generator: " + path);
  Generator gen;
  gen.net = std::move(net);
  gen.arch_id = header.at("arch_id").get<std::string>();
  gen.latent_dim = header.at("latent_dim").get<int>();
  gen.output_shape = header.at("output_shape").get<std::vector<int>>();
  return gen;
}

void save_discriminator(const std::string& path, const Discriminator& disc,
                        const std::string& config_hash) {
  json header{{"kind", "discriminator"},
              {"arch", disc.net.describe()},
              {"arch_id", disc.arch_id},
              {"mode", disc.mode == DiscMode::vanilla ? "vanilla"
                                                      : "wasserstein"},
              {"input_shape", disc.input_shape},
              {"config_hash", config_hash}};
  auto out = open_out(path);
  write_net_checkpoint(out, disc.net, header);
  if (!out) throw io_error("write failed: " + path);
}

Discriminator load_discriminator(const std::string& path) {
  auto in = open_in(path);
  auto [net, header] = read_net_checkpoint(in, path);
  if (header.at("kind").get<std::string>() != "discriminator")
    throw io_error("checkpoint is not a discriminator: " + path);
  Discriminator disc;
  disc.net = std::move(net);
  disc.arch_id = header.at("arch_id").get<std::string>();
  disc.mode = header.at("mode").get<std::string>() == "vanilla"
                  ? DiscMode::vanilla
                  : DiscMode::wasserstein;
  disc.input_shape = header.at("input_shape").get<std::vector<int>>();
  return disc;
}

void save_backbone(const std::string& path, const FeatureBackbone& backbone,
                   const std::string& config_hash) {
  json header{{"kind", "backbone"},
              {"arch", backbone.net.describe()},
              {"arch_id", backbone.arch_id},
              {"num_classes", backbone.num_classes},
              {"feature_dim", backbone.feature_dim},
              {"provenance", backbone.provenance},
              {"config_hash", config_hash}};
  auto out = open_out(path);
  write_net_checkpoint(out, backbone.net, header);
  if (!out) throw io_error("write failed: " + path);
}

FeatureBackbone load_backbone(const std::string& path) {
  auto in = open_in(path);
  auto [net, header] = read_net_checkpoint(in, path);
  if (header.at("kind").get<std::string>() != "backbone")
    throw io_error("checkpoint is not a backbone: " + path);
  FeatureBackbone backbone;
  backbone.net = std::move(net);
  backbone.arch_id = header.at("arch_id").get<std::string>();
  backbone.num_classes = header.at("num_classes").get<int>();
  backbone.feature_dim = header.at("feature_dim").get<int>();
  backbone.provenance = header.at("provenance").get<std::string>();
  return backbone;
}

void save_latents(const std::string& path, const LatentDataset& latents) {
  latents.validate();
  auto out = open_out(path);
  out.write(kLatentMagic, 8);
  std::uint32_t d = static_cast<std::uint32_t>(latents.dim());
  std::uint32_t count = static_cast<std::uint32_t>(latents.n());
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  auto write_string = [&](const std::string& s) {
    std::uint32_t len = static_cast<std::uint32_t>(s.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  write_string(latents.method);
  write_string(latents.source_generator_checksum);
  for (int j = 0; j < latents.n(); ++j) {
    for (int i = 0; i < latents.dim(); ++i) {
      float v = static_cast<float>(latents.vectors(i, j));
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  std::uint8_t has_labels = latents.labels.empty() ? 0 : 1;
  out.write(reinterpret_cast<const char*>(&has_labels), sizeof(has_labels));
  for (int y : latents.labels) {
    std::int32_t v = y;
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  if (!out) throw io_error("write failed: " + path);
}

LatentDataset load_latents(const std::string& path) {
  auto in = open_in(path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kLatentMagic, 8) != 0)
    throw io_error("bad latent store magic: " + path);
  std::uint32_t d = 0, count = 0;
  in.read(reinterpret_cast<char*>(&d), sizeof(d));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  auto read_string = [&]() {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string s(len, '\0');
    in.read(s.data(), len);
    return s;
  };
  LatentDataset latents;
  latents.method = read_string();
  latents.source_generator_checksum = read_string();
  latents.vectors.resize(d, count);
  for (std::uint32_t j = 0; j < count; ++j) {
    for (std::uint32_t i = 0; i < d; ++i) {
      float v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      latents.vectors(i, j) = static_cast<double>(v);
    }
  }
  std::uint8_t has_labels = 0;
  in.read(reinterpret_cast<char*>(&has_labels), sizeof(has_labels));
  if (has_labels != 0) {
    latents.labels.resize(count);
    for (std::uint32_t j = 0; j < count; ++j) {
      std::int32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      latents.labels[j] = v;
    }
  }
  if (!in) throw io_error("truncated latent store: " + path);
  return latents;
}

void save_mse_sidecar(const std::string& path,
                      const std::vector<double>& mse) {
  std::ostringstream out;
  out.precision(17);
  for (double m : mse) out << m << "\n";
  write_text_file(path, out.str());
}

std::vector<double> load_mse_sidecar(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw io_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_index_list(const std::string& path,
                      const std::vector<int>& indices) {
  std::ostringstream out;
  for (int i : indices) out << i << "\n";
  write_text_file(path, out.str());
}

std::vector<int> read_index_list(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<int> out;
  long v;
  while (in >> v) out.push_back(static_cast<int>(v));
  return out;
}

}  // namespace dpgomi
