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

#ifndef DPGOMI_METRICS_HPP
#define DPGOMI_METRICS_HPP

#include <set>
#include <vector>

#include "dpgomi/nn.hpp"

namespace dpgomi {

// Gaussian fit of a feature cloud: mean and (n-1)-normalized covariance.
struct GaussianSummary {
  Vector mean;
  Matrix cov;
};

// features: m x n, one column per sample; needs n >= 2.
GaussianSummary summarize_features(const Matrix& features);

// Frechet distance between Gaussian fits:
//   ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2)).
// The matrix square root is taken through the symmetrized product
// Sa^(1/2) Sb Sa^(1/2) with small negative eigenvalues clamped to zero.
double fid(const GaussianSummary& a, const GaussianSummary& b);

// exp(mean_i KL(p(y|x_i) || mean_j p(y|x_j))), computed in log space.
// probs: K x n, one probability column per sample, each summing to 1
// within 1e-5. Zero entries are floored at 1e-12 and flagged through
// zero_floored when given.
double inception_score(const Matrix& probs, bool* zero_floored = nullptr);

// Macro-averaged precision over the given class set. A class never
// predicted contributes zero precision.
double macro_precision(const std::vector<int>& y_true,
                       const std::vector<int>& y_pred,
                       const std::set<int>& classes,
                       std::vector<std::pair<int, double>>* per_class = nullptr);

}  // namespace dpgomi

#endif  // DPGOMI_METRICS_HPP
