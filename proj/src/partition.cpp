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

#include "dpgomi/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpgomi/error.hpp"
#include "dpgomi/hash.hpp"
#include "dpgomi/rng.hpp"

namespace dpgomi {

namespace {

// Largest-remainder apportionment of n_total across per-class pools.
std::vector<int> stratified_targets(const std::vector<std::vector<int>>& pools,
                                    int n_total, int n_source) {
  std::vector<int> targets(pools.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < pools.size(); ++k) {
    double exact =
        static_cast<double>(pools[k].size()) * n_total / n_source;
    targets[k] = static_cast<int>(std::floor(exact));
    assigned += targets[k];
    remainders.push_back({exact - targets[k], k});
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  for (int i = 0; assigned < n_total && i < static_cast<int>(remainders.size());
       ++i) {
    std::size_t k = remainders[i].second;
    if (targets[k] < static_cast<int>(pools[k].size())) {
      ++targets[k];
      ++assigned;
    }
  }
  return targets;
}

}  // namespace

std::string DatasetSplit::index_checksum() const {
  Sha256 h;
  for (const auto* list : {&l_indices, &p_indices, &s_indices}) {
    h.update_u64(list->size());
    for (int idx : *list) h.update_u64(static_cast<std::uint64_t>(idx));
  }
  return h.hex_digest();
}

DatasetSplit partition_dataset(const LabeledDataset& source,
                               const PartitionOptions& options) {
  source.validate();
  DPGOMI_CHECK_ARG(options.label_fraction > 0.0 && options.label_fraction < 1.0,
                   "label_fraction must lie in (0, 1)");
  const std::set<int> universe = source.class_universe();
  DPGOMI_CHECK_ARG(!options.public_classes.empty(),
                   "public_classes must be nonempty");
  DPGOMI_CHECK_ARG(options.public_classes != universe,
                   "public_classes must not equal the full class set");
  for (int c : options.public_classes) {
    DPGOMI_CHECK_ARG(universe.count(c) == 1,
                     "public class not present in the source dataset");
  }

  const int n = source.n();
  const int n_l = static_cast<int>(std::llround(options.label_fraction * n));
  DPGOMI_CHECK_ARG(n_l >= 1 && n_l < n,
                   "label_fraction leaves an empty split");

  Rng rng(options.seed, "partition");
  std::vector<int> label_idx;
  if (!options.stratified) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    label_idx.assign(perm.begin(), perm.begin() + n_l);
  } else {
    std::vector<std::vector<int>> pools;
    for (int c : universe) {
      std::vector<int> pool;
      for (int i = 0; i < n; ++i)
        if (source.labels[i] == c) pool.push_back(i);
      pools.push_back(std::move(pool));
    }
    std::vector<int> targets = stratified_targets(pools, n_l, n);
    for (std::size_t k = 0; k < pools.size(); ++k) {
      rng.shuffle(pools[k]);
      label_idx.insert(label_idx.end(), pools[k].begin(),
                       pools[k].begin() + targets[k]);
    }
  }
  std::sort(label_idx.begin(), label_idx.end());

  std::vector<char> in_label(n, 0);
  for (int i : label_idx) in_label[i] = 1;

  DatasetSplit split;
  split.public_classes = options.public_classes;
  for (int c : universe) {
    if (options.public_classes.count(c) == 0) split.private_classes.insert(c);
  }
  split.seed = options.seed;
  split.source_name = source.name;
  split.l_indices = label_idx;
  for (int i = 0; i < n; ++i) {
    if (in_label[i]) continue;
    if (options.public_classes.count(source.labels[i]) == 1) {
      split.p_indices.push_back(i);
    } else {
      split.s_indices.push_back(i);
    }
  }

  split.d_l = source.select(split.l_indices);
  split.d_l.name = source.name + "/d_l";
  split.d_p = source.select(split.p_indices);
  split.d_p.name = source.name + "/d_p";
  split.d_s = source.select(split.s_indices);
  split.d_s.name = source.name + "/d_s";
  return split;
}

LabeledDataset split_test_private(const LabeledDataset& test,
                                  const std::set<int>& private_classes) {
  test.validate();
  DPGOMI_CHECK_ARG(!private_classes.empty(),
                   "private_classes must be nonempty");
  std::vector<int> keep;
  for (int i = 0; i < test.n(); ++i) {
    if (private_classes.count(test.labels[i]) == 1) keep.push_back(i);
  }
  if (keep.empty()) {
    throw Error(ErrorCode::kEmptyResult,
                "no test example carries a private label; check the class "
                "preset");
  }
  LabeledDataset out = test.select(keep);
  out.name = test.name + "/private";
  return out;
}

std::optional<std::set<int>> public_class_preset(const std::string& name) {
  // CIFAR10 class ids: airplane 0, automobile 1, bird 2, cat 3, deer 4,
  // dog 5, frog 6, horse 7, ship 8, truck 9. Public side: automobile, bird,
  // cat, deer, dog. SVHN public digits: 1, 5, 7, 8, 9.
  if (name == "cifar10") return std::set<int>{1, 2, 3, 4, 5};
  if (name == "svhn") return std::set<int>{1, 5, 7, 8, 9};
  return std::nullopt;
}

}  // namespace dpgomi
