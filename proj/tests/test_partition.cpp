#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>
#include <set>

#include "dpgomi/dataset.hpp"
#include "dpgomi/error.hpp"
#include "dpgomi/partition.hpp"

using namespace dpgomi;

namespace {

// Label-only dataset with trivially small images; class c gets count[c]
// examples.
LabeledDataset make_labeled(const std::vector<int>& counts) {
  LabeledDataset d;
  d.height = d.width = d.channels = 1;
  d.num_classes = static_cast<int>(counts.size());
  int n = std::accumulate(counts.begin(), counts.end(), 0);
  d.images = Eigen::MatrixXd::Constant(1, n, 0.5);
  d.labels.reserve(n);
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (int i = 0; i < counts[c]; ++i) d.labels.push_back(static_cast<int>(c));
  d.name = "synthetic";
  return d;
}

}  // namespace

TEST_CASE("class presets carry the published public/private sets") {
  auto cifar = public_class_preset("cifar10");
  REQUIRE(cifar.has_value());
  // automobile, bird, cat, deer, dog are public; frog, horse, ship, truck,
  // airplane end up private.
  CHECK(*cifar == std::set<int>{1, 2, 3, 4, 5});

  auto svhn = public_class_preset("svhn");
  REQUIRE(svhn.has_value());
  CHECK(*svhn == std::set<int>{1, 5, 7, 8, 9});

  CHECK_FALSE(public_class_preset("mnist").has_value());
}

TEST_CASE("partition respects the preset class routing") {
  LabeledDataset source = make_labeled({100, 100, 100, 100});
  PartitionOptions opt;
  opt.public_classes = {0, 1};
  opt.seed = 3;
  DatasetSplit split = partition_dataset(source, opt);

  CHECK(split.private_classes == std::set<int>{2, 3});
  for (int y : split.d_p.labels) CHECK(split.public_classes.count(y) == 1);
  for (int y : split.d_s.labels) CHECK(split.private_classes.count(y) == 1);
}

TEST_CASE("splits partition the source index set") {
  LabeledDataset source = make_labeled({120, 80, 95, 105});
  PartitionOptions opt;
  opt.public_classes = {1, 3};
  opt.seed = 17;
  DatasetSplit split = partition_dataset(source, opt);

  std::set<int> all;
  std::size_t total = 0;
  for (const auto* list : {&split.l_indices, &split.p_indices,
                           &split.s_indices}) {
    all.insert(list->begin(), list->end());
    total += list->size();
  }
  CHECK(total == static_cast<std::size_t>(source.n()));  // pairwise disjoint
  CHECK(static_cast<int>(all.size()) == source.n());     // full coverage
  CHECK(std::is_sorted(split.l_indices.begin(), split.l_indices.end()));
}

TEST_CASE("one-third of 50000 routes 16667 examples to the labeling set") {
  LabeledDataset source = make_labeled(std::vector<int>(10, 5000));
  PartitionOptions opt;
  opt.public_classes = {1, 2, 3, 4, 5};
  opt.label_fraction = 1.0 / 3.0;
  opt.seed = 1;
  DatasetSplit split = partition_dataset(source, opt);
  CHECK(split.d_l.n() == 16667);
  CHECK(split.d_p.n() + split.d_s.n() == 33333);
  // Fraction accuracy within 1/n.
  CHECK(std::abs(static_cast<double>(split.d_l.n()) / 50000.0 - 1.0 / 3.0) <=
        1.0 / 50000.0);
}

TEST_CASE("identical inputs and seed give byte-identical splits") {
  LabeledDataset source = make_labeled({60, 70, 50, 40});
  PartitionOptions opt;
  opt.public_classes = {0, 2};
  opt.seed = 99;
  DatasetSplit a = partition_dataset(source, opt);
  DatasetSplit b = partition_dataset(source, opt);
  CHECK(a.l_indices == b.l_indices);
  CHECK(a.index_checksum() == b.index_checksum());

  opt.seed = 100;
  DatasetSplit c = partition_dataset(source, opt);
  CHECK(a.index_checksum() != c.index_checksum());
}

TEST_CASE("stratified labeling draw matches class proportions") {
  LabeledDataset source = make_labeled({300, 100, 100, 100});
  PartitionOptions opt;
  opt.public_classes = {0, 1};
  opt.label_fraction = 0.25;
  opt.stratified = true;
  opt.seed = 5;
  DatasetSplit split = partition_dataset(source, opt);
  std::map<int, int> per_class;
  for (int y : split.d_l.labels) ++per_class[y];
  CHECK(split.d_l.n() == 150);
  CHECK(per_class[0] == 75);  // 300 * 0.25
  CHECK(per_class[1] == 25);
}

TEST_CASE("invalid partition arguments are rejected") {
  LabeledDataset source = make_labeled({50, 50});
  PartitionOptions opt;
  opt.seed = 1;

  opt.public_classes = {};
  CHECK_THROWS_AS(partition_dataset(source, opt), Error);

  opt.public_classes = {0, 1};  // equals full class set
  CHECK_THROWS_AS(partition_dataset(source, opt), Error);

  opt.public_classes = {0, 7};  // 7 not in universe
  CHECK_THROWS_AS(partition_dataset(source, opt), Error);

  opt.public_classes = {0};
  opt.label_fraction = 0.0;
  CHECK_THROWS_AS(partition_dataset(source, opt), Error);
  opt.label_fraction = 1.0;
  CHECK_THROWS_AS(partition_dataset(source, opt), Error);
}

TEST_CASE("split_test_private filters order-preserving") {
  LabeledDataset test = make_labeled({10, 10, 10});
  LabeledDataset priv = split_test_private(test, {1});
  CHECK(priv.n() == 10);
  for (int y : priv.labels) CHECK(y == 1);

  // All classes private: everything passes through in order.
  LabeledDataset full = split_test_private(test, {0, 1, 2});
  CHECK(full.n() == test.n());
  CHECK(full.labels == test.labels);
}

TEST_CASE("split_test_private with no private example is an error") {
  LabeledDataset test = make_labeled({10, 10});
  CHECK_THROWS_AS(split_test_private(test, {5}), Error);
  CHECK_THROWS_AS(split_test_private(test, {}), Error);
  try {
    split_test_private(test, {5});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyResult);
  }
}

TEST_CASE("toy mixture dataset is valid, balanced and deterministic") {
  ToyMixtureConfig cfg;
  cfg.n = 400;
  cfg.seed = 12;
  LabeledDataset a = make_toy_mixture(cfg);
  a.validate();
  CHECK(a.num_classes == 4);
  std::map<int, int> counts;
  for (int y : a.labels) ++counts[y];
  CHECK(counts[0] == 100);
  CHECK(counts[3] == 100);

  LabeledDataset b = make_toy_mixture(cfg);
  CHECK(a.images == b.images);
}
