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

#ifndef DPGOMI_IO_HPP
#define DPGOMI_IO_HPP

#include <string>
#include <vector>

#include "dpgomi/evaluation.hpp"
#include "dpgomi/gan.hpp"
#include "dpgomi/inversion.hpp"

namespace dpgomi {

// Generator / discriminator checkpoints: JSON header (arch description,
// dims, arch_id, config hash) followed by the raw float64 parameter blob.
void save_generator(const std::string& path, const Generator& gen,
                    const std::string& config_hash);
Generator load_generator(const std::string& path);

void save_discriminator(const std::string& path, const Discriminator& disc,
                        const std::string& config_hash);
Discriminator load_discriminator(const std::string& path);

void save_backbone(const std::string& path, const FeatureBackbone& backbone,
                   const std::string& config_hash);
FeatureBackbone load_backbone(const std::string& path);

// Latent store: header (d, count, generator checksum, method), float32
// vector payload, int32 labels. The per-image mse sidecar is a separate
// text file.
void save_latents(const std::string& path, const LatentDataset& latents);
LatentDataset load_latents(const std::string& path);

void save_mse_sidecar(const std::string& path,
                      const std::vector<double>& mse);
std::vector<double> load_mse_sidecar(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

void write_index_list(const std::string& path, const std::vector<int>& indices);
std::vector<int> read_index_list(const std::string& path);

}  // namespace dpgomi

#endif  // DPGOMI_IO_HPP
