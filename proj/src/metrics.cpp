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

#include "dpgomi/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>

#include "dpgomi/error.hpp"

namespace dpgomi {

GaussianSummary summarize_features(const Matrix& features) {
  DPGOMI_CHECK_ARG(features.cols() >= 2,
                   "need at least two samples for a covariance estimate");
  GaussianSummary s;
  s.mean = features.rowwise().mean();
  Matrix centered = features.colwise() - s.mean;
  s.cov = centered * centered.transpose() /
          static_cast<double>(features.cols() - 1);
  return s;
}

namespace {

// PSD square root via self-adjoint eigendecomposition; eigenvalues below
// zero (numerical noise) are clamped.
Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector evals = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * evals.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

double fid(const GaussianSummary& a, const GaussianSummary& b) {
  DPGOMI_CHECK_ARG(a.mean.size() == b.mean.size() &&
                       a.cov.rows() == b.cov.rows() &&
                       a.cov.cols() == b.cov.cols(),
                   "summary dimension mismatch");
  DPGOMI_CHECK_ARG(a.mean.allFinite() && b.mean.allFinite() &&
                       a.cov.allFinite() && b.cov.allFinite(),
                   "summaries must be finite");

  const double mean_term = (a.mean - b.mean).squaredNorm();

  // Tr((Sa Sb)^(1/2)) via the symmetric similarity
  // Sa^(1/2) Sb Sa^(1/2), which shares its spectrum with Sa Sb.
  Matrix root_a = psd_sqrt(a.cov);
  Matrix inner = root_a * b.cov * root_a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (inner + inner.transpose()));
  DPGOMI_CHECK_ARG(es.eigenvalues().minCoeff() > -1e-6 * std::max(
                       1.0, es.eigenvalues().cwiseAbs().maxCoeff()),
                   "covariance product is far from PSD");
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, value);
}

double inception_score(const Matrix& probs, bool* zero_floored) {
  DPGOMI_CHECK_ARG(probs.rows() >= 1 && probs.cols() >= 1,
                   "probability table must be nonempty");
  constexpr double kFloor = 1e-12;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    double sum = probs.col(j).sum();
    DPGOMI_CHECK_ARG(std::abs(sum - 1.0) <= 1e-5,
                     "probability column does not sum to 1");
    DPGOMI_CHECK_ARG(probs.col(j).minCoeff() >= 0.0,
                     "probabilities must be nonnegative");
  }
  if (zero_floored != nullptr)
    *zero_floored = probs.minCoeff() < kFloor;

  Vector marginal = probs.rowwise().mean().cwiseMax(kFloor);
  Vector log_marginal = marginal.array().log();
  double mean_kl = 0.0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    double kl = 0.0;
    for (Eigen::Index k = 0; k < probs.rows(); ++k) {
      double p = std::max(probs(k, j), kFloor);
      kl += p * (std::log(p) - log_marginal[k]);
    }
    mean_kl += kl;
  }
  mean_kl /= static_cast<double>(probs.cols());
  return std::exp(mean_kl);
}

double macro_precision(const std::vector<int>& y_true,
                       const std::vector<int>& y_pred,
                       const std::set<int>& classes,
                       std::vector<std::pair<int, double>>* per_class) {
  DPGOMI_CHECK_ARG(y_true.size() == y_pred.size(),
                   "prediction/label count mismatch");
  DPGOMI_CHECK_ARG(!classes.empty(), "class set must be nonempty");
  std::map<int, long> tp, predicted;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ++predicted[y_pred[i]];
    if (y_pred[i] == y_true[i]) ++tp[y_true[i]];
  }
  if (per_class != nullptr) per_class->clear();
  double total = 0.0;
  for (int c : classes) {
    double p = predicted[c] > 0
                   ? static_cast<double>(tp[c]) / predicted[c]
                   : 0.0;
    total += p;
    if (per_class != nullptr) per_class->push_back({c, p});
  }
  return total / static_cast<double>(classes.size());
}

}  // namespace dpgomi
