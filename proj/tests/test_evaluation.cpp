// Metric tests against closed forms and independent spectral/summation
// oracles.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dpgomi/dataset.hpp"
#include "dpgomi/error.hpp"
#include "dpgomi/evaluation.hpp"
#include "dpgomi/metrics.hpp"
#include "dpgomi/rng.hpp"

using namespace dpgomi;

namespace {

Matrix random_psd(int dim, Rng& rng) {
  Matrix a(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) a(i, j) = rng.gaussian();
  return a * a.transpose() / dim + 0.05 * Matrix::Identity(dim, dim);
}

// Independent oracle: Tr((Sa Sb)^(1/2)) via the (nonsymmetric) product's
// eigenvalues, which are real and nonnegative for PSD factors.
double tr_sqrt_product_oracle(const Matrix& sa, const Matrix& sb) {
  Eigen::EigenSolver<Matrix> es(sa * sb);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()[i].real();
    acc += std::sqrt(std::max(0.0, ev));
  }
  return acc;
}

double fid_oracle(const GaussianSummary& a, const GaussianSummary& b) {
  return (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() -
         2.0 * tr_sqrt_product_oracle(a.cov, b.cov);
}

}  // namespace

TEST_CASE("fid of identical summaries is zero") {
  Rng rng(1, "fid");
  GaussianSummary s;
  s.cov = random_psd(5, rng);
  s.mean = Vector::Zero(5);
  for (int i = 0; i < 5; ++i) s.mean[i] = rng.gaussian();
  CHECK(fid(s, s) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("1-D analytic case: unit means apart, equal unit variance") {
  GaussianSummary a, b;
  a.mean = Vector::Zero(1);
  b.mean = Vector::Ones(1);
  a.cov = Matrix::Identity(1, 1);
  b.cov = Matrix::Identity(1, 1);
  CHECK(fid(a, b) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fid matches the spectral oracle on random PSD pairs") {
  Rng rng(7, "fid-oracle");
  for (int trial = 0; trial < 20; ++trial) {
    GaussianSummary a, b;
    a.cov = random_psd(5, rng);
    b.cov = random_psd(5, rng);
    a.mean = Vector(5);
    b.mean = Vector(5);
    for (int i = 0; i < 5; ++i) {
      a.mean[i] = rng.gaussian();
      b.mean[i] = rng.gaussian();
    }
    CHECK(fid(a, b) == doctest::Approx(fid_oracle(a, b)).epsilon(1e-6));
  }
}

TEST_CASE("fid is symmetric and monotone under mean translation") {
  Rng rng(9, "fid-sym");
  GaussianSummary a, b;
  a.cov = random_psd(4, rng);
  b.cov = random_psd(4, rng);
  a.mean = Vector::Zero(4);
  b.mean = Vector::Zero(4);
  CHECK(fid(a, b) == doctest::Approx(fid(b, a)).epsilon(1e-8));

  double prev = fid(a, b);
  for (double shift : {0.5, 1.0, 2.0}) {
    GaussianSummary moved = b;
    moved.mean = Vector::Constant(4, shift);
    double cur = fid(a, moved);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("fid rejects non-finite and mismatched summaries") {
  GaussianSummary a, b;
  a.mean = Vector::Zero(2);
  a.cov = Matrix::Identity(2, 2);
  b = a;
  b.mean[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fid(a, b), Error);
  GaussianSummary c;
  c.mean = Vector::Zero(3);
  c.cov = Matrix::Identity(3, 3);
  CHECK_THROWS_AS(fid(a, c), Error);
}

TEST_CASE("inception score of uniform rows is 1") {
  Matrix probs = Matrix::Constant(4, 10, 0.25);
  CHECK(inception_score(probs) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inception score of balanced one-hot rows is K") {
  const int k = 5;
  Matrix probs = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) probs(i, i) = 1.0;
  bool floored = false;
  CHECK(inception_score(probs, &floored) ==
        doctest::Approx(static_cast<double>(k)).epsilon(1e-6));
  CHECK(floored);  // exact zeros hit the floor
}

TEST_CASE("inception score matches a hand-summed KL oracle") {
  Matrix probs(2, 3);
  probs << 0.9, 0.8, 0.1,
           0.1, 0.2, 0.9;
  // Direct summation oracle.
  Vector marginal = probs.rowwise().mean();
  double mean_kl = 0.0;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 2; ++k)
      mean_kl += probs(k, j) *
                 (std::log(probs(k, j)) - std::log(marginal[k])) / 3.0;
  }
  double oracle = std::exp(mean_kl);
  CHECK(inception_score(probs) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("inception score stays within [1, K] on random tables") {
  Rng rng(5, "is-bounds");
  for (int trial = 0; trial < 30; ++trial) {
    int k = 2 + static_cast<int>(rng.uniform_int(6));
    int n = 1 + static_cast<int>(rng.uniform_int(40));
    Matrix probs(k, n);
    for (int j = 0; j < n; ++j) {
      double sum = 0.0;
      for (int i = 0; i < k; ++i) {
        probs(i, j) = -std::log(1.0 - rng.uniform() + 1e-12);
        sum += probs(i, j);
      }
      probs.col(j) /= sum;
    }
    double is = inception_score(probs);
    CHECK(is >= 1.0 - 1e-9);
    CHECK(is <= k + 1e-9);
  }
}

TEST_CASE("inception score validates its input") {
  Matrix bad = Matrix::Constant(3, 2, 0.5);  // columns sum to 1.5
  CHECK_THROWS_AS(inception_score(bad), Error);
}

TEST_CASE("label classifier separates a linearly separable toy") {
  ToyMixtureConfig toy;
  toy.n = 600;
  toy.centers = {{0.2, 0.2}, {0.8, 0.8}};
  toy.stddev = 0.05;
  toy.seed = 3;
  LabeledDataset d_l = make_toy_mixture(toy);

  ClassifierConfig cfg;
  cfg.hidden = {16, 8};
  cfg.steps = 800;
  cfg.seed = 5;
  ClassifierReport report;
  FeatureBackbone backbone = train_label_classifier(d_l, cfg, &report);
  CHECK(report.holdout_accuracy >= 0.95);
  CHECK(backbone.feature_dim == 8);
  CHECK(backbone.num_classes == 2);

  // Feature layer emits the penultimate activation.
  Matrix feats = backbone.features(d_l.images);
  CHECK(feats.rows() == 8);
  Matrix probs = backbone.probs(d_l.images);
  for (int j = 0; j < 5; ++j)
    CHECK(probs.col(j).sum() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("untrained classifier sits at the chance baseline") {
  // Labels carry no positional information here, so any fixed predictor
  // lands at 1/K up to sampling noise.
  ToyMixtureConfig toy;
  toy.n = 2000;
  toy.seed = 8;
  toy.centers = {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  toy.stddev = 0.15;
  LabeledDataset d_l = make_toy_mixture(toy);
  ClassifierConfig cfg;
  cfg.steps = 0;
  cfg.holdout_fraction = 0.5;
  cfg.seed = 7;
  ClassifierReport report;
  train_label_classifier(d_l, cfg, &report);
  CHECK(report.holdout_accuracy == doctest::Approx(0.25).epsilon(0.25));
  CHECK(std::abs(report.holdout_accuracy - 0.25) <= 0.05 + 1e-12);
}

TEST_CASE("classifier training replays deterministically") {
  ToyMixtureConfig toy;
  toy.n = 300;
  toy.seed = 2;
  LabeledDataset d_l = make_toy_mixture(toy);
  ClassifierConfig cfg;
  cfg.steps = 100;
  cfg.seed = 11;
  FeatureBackbone a = train_label_classifier(d_l, cfg);
  FeatureBackbone b = train_label_classifier(d_l, cfg);
  CHECK(a.checksum() == b.checksum());
}

TEST_CASE("classifier requires every class present") {
  ToyMixtureConfig toy;
  toy.n = 100;
  toy.seed = 2;
  LabeledDataset d_l = make_toy_mixture(toy);
  d_l.num_classes = 5;  // class 4 never occurs
  CHECK_THROWS_AS(train_label_classifier(d_l, ClassifierConfig{}), Error);
}

TEST_CASE("argmax labeling breaks ties toward the lowest class id") {
  // Constant-logit backbone: zero weights, fixed bias.
  FeatureBackbone backbone;
  auto dense = std::make_unique<DenseLayer>(2, 3);
  backbone.net.add(std::move(dense));
  Vector p = Vector::Zero(2 * 3 + 3);
  p[6] = 0.3;  // biases: class probabilities (0.2, 0.5, 0.3) after softmax
  p[7] = 1.216395324324493;  // log-ratios chosen to land on (0.2, 0.5, 0.3)
  p[8] = 0.7054651081081644;
  backbone.net.set_params(p);
  backbone.num_classes = 3;
  backbone.feature_dim = 2;

  Matrix images = Matrix::Constant(2, 1, 0.5);
  Labeling lab = label_synthetic(backbone, images);
  CHECK(lab.labels[0] == 1);  // argmax of (0.2, 0.5, 0.3)

  // Exact tie between classes 0 and 1.
  Vector tie = Vector::Zero(2 * 3 + 3);
  tie[8] = -50.0;  // class 2 suppressed, classes 0/1 tied
  backbone.net.set_params(tie);
  lab = label_synthetic(backbone, images);
  CHECK(lab.labels[0] == 0);

  // Positive rescaling of logits keeps the labels.
  Vector scaled = tie * 3.0;
  backbone.net.set_params(scaled);
  Labeling lab2 = label_synthetic(backbone, images);
  CHECK(lab2.labels == lab.labels);
}

TEST_CASE("uniform random predictions score chance-level macro precision") {
  Rng rng(13, "chance");
  const int k = 5, n = 5000;
  std::vector<int> y_true(n), y_pred(n);
  std::set<int> classes;
  for (int c = 0; c < k; ++c) classes.insert(c);
  for (int i = 0; i < n; ++i) {
    y_true[i] = i % k;  // balanced
    y_pred[i] = static_cast<int>(rng.uniform_int(k));
  }
  double p = macro_precision(y_true, y_pred, classes);
  CHECK(p == doctest::Approx(0.2).epsilon(0.15));
  CHECK(std::abs(p - 0.2) < 0.03);
}

TEST_CASE("downstream precision separates a separable private toy") {
  // Synthetic training points: two private blobs; test drawn from the same
  // mixture.
  ToyMixtureConfig toy;
  toy.n = 600;
  toy.centers = {{0.3, 0.7}, {0.7, 0.3}};
  toy.stddev = 0.04;
  toy.seed = 21;
  LabeledDataset synth_src = make_toy_mixture(toy);
  // Map toy labels {0,1} onto private ids {2,3}.
  std::vector<int> labels(synth_src.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = synth_src.labels[i] + 2;

  toy.seed = 22;
  toy.n = 400;
  LabeledDataset test = make_toy_mixture(toy);
  for (auto& y : test.labels) y += 2;
  test.num_classes = 4;

  ClassifierConfig cfg;
  cfg.steps = 500;
  cfg.seed = 3;
  std::vector<std::pair<int, double>> per_class;
  double p = downstream_precision(synth_src.images, labels, test, cfg,
                                  &per_class);
  CHECK(p > 0.9);
  CHECK(per_class.size() == 2);
  CHECK(per_class[0].first == 2);

  // Single-class labels degenerate.
  std::vector<int> collapsed(labels.size(), 2);
  CHECK_THROWS_AS(downstream_precision(synth_src.images, collapsed, test, cfg),
                  Error);
}
