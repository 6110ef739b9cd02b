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

#ifndef DPGOMI_PARTITION_HPP
#define DPGOMI_PARTITION_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dpgomi/dataset.hpp"

namespace dpgomi {

// Labeled / public / private split. Index lists refer into the source
// dataset, are sorted ascending and pairwise disjoint, and together cover
// every source example.
struct DatasetSplit {
  LabeledDataset d_l;  // labeling set
  LabeledDataset d_p;  // public set
  LabeledDataset d_s;  // private set
  std::set<int> public_classes;
  std::set<int> private_classes;
  std::uint64_t seed = 0;
  std::vector<int> l_indices, p_indices, s_indices;
  std::string source_name;

  // Digest over the three sorted index lists; recorded in the split manifest.
  std::string index_checksum() const;
};

struct PartitionOptions {
  double label_fraction = 1.0 / 3.0;
  std::set<int> public_classes;
  std::uint64_t seed = 0;
  // Uniform draw over all classes by default; stratified draws the labeling
  // set per class in proportion to class counts.
  bool stratified = false;
};

DatasetSplit partition_dataset(const LabeledDataset& source,
                               const PartitionOptions& options);

// Order-preserving filter of the test set down to private-class examples.
// An empty result signals a preset/class mismatch and is an error.
LabeledDataset split_test_private(const LabeledDataset& test,
                                  const std::set<int>& private_classes);

// Shipped class presets (public-class sets keyed by dataset name).
std::optional<std::set<int>> public_class_preset(const std::string& name);

}  // namespace dpgomi

#endif  // DPGOMI_PARTITION_HPP
