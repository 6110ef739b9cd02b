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

#include "dpgomi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpgomi/error.hpp"

namespace dpgomi {

void ClassifierConfig::validate() const {
  DPGOMI_CHECK_ARG(!hidden.empty(), "classifier needs >= 1 hidden layer");
  DPGOMI_CHECK_ARG(steps >= 0, "steps must be nonnegative");
  DPGOMI_CHECK_ARG(batch_size >= 1, "batch_size must be positive");
  DPGOMI_CHECK_ARG(lr > 0.0, "learning rate must be positive");
  DPGOMI_CHECK_ARG(holdout_fraction >= 0.0 && holdout_fraction < 1.0,
                   "holdout_fraction must lie in [0, 1)");
}

namespace {

Matrix softmax_cols(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Vector col = logits.col(j);
    double m = col.maxCoeff();
    Vector e = (col.array() - m).exp();
    out.col(j) = e / e.sum();
  }
  return out;
}

// Inputs move to the classifiers' [-1, 1] range.
Matrix to_net_range(const Matrix& images01) {
  return 2.0 * images01.array() - 1.0;
}

struct TrainedClassifier {
  Net net;
  double holdout_accuracy = 0.0;
};

double accuracy(const Net& net, const Matrix& x, const std::vector<int>& y) {
  if (y.empty()) return 0.0;
  Matrix logits = net.forward(x);
  long correct = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    int arg = 0;
    for (Eigen::Index k = 1; k < logits.rows(); ++k)
      if (logits(k, j) > logits(arg, j)) arg = static_cast<int>(k);
    if (arg == y[static_cast<std::size_t>(j)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

// Softmax cross-entropy training with a deterministic holdout slice.
TrainedClassifier train_softmax_classifier(const Matrix& images01,
                                           const std::vector<int>& labels,
                                           int num_classes,
                                           const ClassifierConfig& config,
                                           const std::string& rng_label) {
  const int n_total = static_cast<int>(images01.cols());
  DPGOMI_CHECK_ARG(n_total >= 2, "classifier needs at least two examples");

  Matrix x = to_net_range(images01);
  Rng rng(config.seed, rng_label);

  // Shuffled split: the tail becomes the holdout slice.
  std::vector<int> order(n_total);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  int n_holdout = static_cast<int>(std::floor(config.holdout_fraction * n_total));
  int n_train = n_total - n_holdout;
  DPGOMI_CHECK_ARG(n_train >= 1, "no training examples after holdout");

  Matrix x_train(x.rows(), n_train), x_hold(x.rows(), n_holdout);
  std::vector<int> y_train(n_train), y_hold(n_holdout);
  for (int i = 0; i < n_train; ++i) {
    x_train.col(i) = x.col(order[i]);
    y_train[i] = labels[order[i]];
  }
  for (int i = 0; i < n_holdout; ++i) {
    x_hold.col(i) = x.col(order[n_train + i]);
    y_hold[i] = labels[order[n_train + i]];
  }

  TrainedClassifier tc;
  tc.net = make_mlp(static_cast<int>(x.rows()), config.hidden, num_classes,
                    Act::relu, Act::identity);
  tc.net.init_params(rng);
  AdamOptimizer opt(tc.net.param_count(), config.lr, config.adam_beta1,
                    config.adam_beta2);

  const int batch = std::min(config.batch_size, n_train);
  for (int step = 0; step < config.steps; ++step) {
    Matrix xb(x.rows(), batch);
    std::vector<int> yb(batch);
    for (int j = 0; j < batch; ++j) {
      auto idx = rng.uniform_int(static_cast<std::uint64_t>(n_train));
      xb.col(j) = x_train.col(static_cast<Eigen::Index>(idx));
      yb[j] = y_train[idx];
    }
    std::vector<Matrix> cache;
    Matrix logits = tc.net.forward_cached(xb, cache);
    Matrix probs = softmax_cols(logits);
    // dL/dlogits = (softmax - onehot) / batch
    Matrix dlogits = probs;
    for (int j = 0; j < batch; ++j) dlogits(yb[j], j) -= 1.0;
    dlogits /= static_cast<double>(batch);

    Vector grad = Vector::Zero(tc.net.param_count());
    tc.net.backward(cache, dlogits,
                    std::span<double>(grad.data(),
                                      static_cast<std::size_t>(grad.size())));
    Vector params = tc.net.get_params();
    opt.step(params, grad);
    tc.net.set_params(params);
  }

  tc.holdout_accuracy = n_holdout > 0 ? accuracy(tc.net, x_hold, y_hold)
                                      : accuracy(tc.net, x_train, y_train);
  return tc;
}

}  // namespace

Matrix FeatureBackbone::features(const Matrix& images01) const {
  // All layers but the final logits projection.
  return net.forward_prefix(to_net_range(images01), net.size() - 1);
}

Matrix FeatureBackbone::probs(const Matrix& images01) const {
  return softmax_cols(net.forward(to_net_range(images01)));
}

FeatureBackbone train_label_classifier(const LabeledDataset& d_l,
                                       const ClassifierConfig& config,
                                       ClassifierReport* report) {
  config.validate();
  d_l.validate();
  DPGOMI_CHECK_ARG(d_l.n() > 0, "labeling set is empty");
  std::set<int> present = d_l.class_universe();
  DPGOMI_CHECK_ARG(static_cast<int>(present.size()) == d_l.num_classes,
                   "labeling set must contain every class");

  TrainedClassifier tc = train_softmax_classifier(
      d_l.images, d_l.labels, d_l.num_classes, config, "label-classifier");

  FeatureBackbone backbone;
  backbone.net = std::move(tc.net);
  backbone.num_classes = d_l.num_classes;
  backbone.feature_dim = config.hidden.back();
  backbone.arch_id = "mlp-backbone";
  backbone.provenance =
      "trained on " + d_l.name + " (n=" + std::to_string(d_l.n()) + ")";
  if (report != nullptr) {
    report->holdout_accuracy = tc.holdout_accuracy;
    report->steps_run = config.steps;
  }
  return backbone;
}

Labeling label_synthetic(const FeatureBackbone& backbone,
                         const Matrix& images01) {
  Matrix p = backbone.probs(images01);
  Labeling out;
  out.labels.resize(static_cast<std::size_t>(p.cols()));
  out.confidence.resize(p.cols());
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    int arg = 0;
    for (Eigen::Index k = 1; k < p.rows(); ++k) {
      // Strict inequality keeps ties at the lowest class id.
      if (p(k, j) > p(arg, j)) arg = static_cast<int>(k);
    }
    out.labels[static_cast<std::size_t>(j)] = arg;
    out.confidence[j] = p(arg, j);
  }
  return out;
}

double downstream_precision(
    const Matrix& synthetic01, const std::vector<int>& synthetic_labels,
    const LabeledDataset& private_test, const ClassifierConfig& config,
    std::vector<std::pair<int, double>>* per_class) {
  config.validate();
  private_test.validate();
  DPGOMI_CHECK_ARG(synthetic01.cols() ==
                       static_cast<Eigen::Index>(synthetic_labels.size()),
                   "synthetic label count mismatch");

  const std::set<int> test_classes = private_test.class_universe();

  // Keep only synthetic examples labeled with a private class; compact the
  // label space for training.
  std::vector<int> class_list(test_classes.begin(), test_classes.end());
  std::vector<int> keep;
  for (std::size_t i = 0; i < synthetic_labels.size(); ++i) {
    if (test_classes.count(synthetic_labels[i]) == 1)
      keep.push_back(static_cast<int>(i));
  }
  std::set<int> covered;
  for (int i : keep) covered.insert(synthetic_labels[i]);
  if (covered.size() < 2) {
    throw Error(ErrorCode::kTrainingFailure,
                "synthetic labels cover fewer than two private classes; "
                "downstream training is degenerate");
  }

  Matrix x(synthetic01.rows(), keep.size());
  std::vector<int> y(keep.size());
  auto compact = [&](int cls) {
    return static_cast<int>(std::find(class_list.begin(), class_list.end(),
                                      cls) -
                            class_list.begin());
  };
  for (std::size_t i = 0; i < keep.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = synthetic01.col(keep[i]);
    y[i] = compact(synthetic_labels[keep[i]]);
  }

  TrainedClassifier tc = train_softmax_classifier(
      x, y, static_cast<int>(class_list.size()), config, "downstream");

  // Evaluate on the private test half.
  Matrix logits = tc.net.forward(to_net_range(private_test.images));
  std::vector<int> y_pred(private_test.n());
  for (int j = 0; j < private_test.n(); ++j) {
    int arg = 0;
    for (Eigen::Index k = 1; k < logits.rows(); ++k)
      if (logits(k, j) > logits(arg, j)) arg = static_cast<int>(k);
    y_pred[j] = class_list[arg];
  }
  return macro_precision(private_test.labels, y_pred, test_classes, per_class);
}

}  // namespace dpgomi
