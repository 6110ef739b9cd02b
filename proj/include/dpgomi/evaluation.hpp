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

#ifndef DPGOMI_EVALUATION_HPP
#define DPGOMI_EVALUATION_HPP

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dpgomi/dataset.hpp"
#include "dpgomi/metrics.hpp"
#include "dpgomi/nn.hpp"
#include "dpgomi/synthesis.hpp"

namespace dpgomi {

struct ClassifierConfig {
  std::vector<int> hidden = {64, 32};
  int steps = 1500;
  int batch_size = 64;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// K-way classifier with a designated feature layer (the last hidden
// activation). FID/IS scores are only comparable within one backbone, so
// the checksum travels with every report.
struct FeatureBackbone {
  Net net;  // logits head; softmax applied externally
  int num_classes = 0;
  int feature_dim = 0;
  std::string arch_id;
  std::string provenance;

  // Penultimate activations, one column per sample.
  Matrix features(const Matrix& images01) const;
  // Softmax probabilities, one column per sample.
  Matrix probs(const Matrix& images01) const;
  std::string checksum() const { return net.checksum(); }
};

struct ClassifierReport {
  double holdout_accuracy = 0.0;
  long steps_run = 0;
};

// Trains the labeling classifier on d_l. Requires every class present.
FeatureBackbone train_label_classifier(const LabeledDataset& d_l,
                                       const ClassifierConfig& config,
                                       ClassifierReport* report = nullptr);

struct Labeling {
  std::vector<int> labels;
  Vector confidence;
};

// Argmax labels with ties broken toward the lowest class id.
Labeling label_synthetic(const FeatureBackbone& backbone,
                         const Matrix& images01);

// Trains a fresh classifier over the private classes on labeled synthetic
// data and reports macro precision on the private test set.
double downstream_precision(
    const Matrix& synthetic01, const std::vector<int>& synthetic_labels,
    const LabeledDataset& private_test, const ClassifierConfig& config,
    std::vector<std::pair<int, double>>* per_class = nullptr);

}  // namespace dpgomi

#endif  // DPGOMI_EVALUATION_HPP
