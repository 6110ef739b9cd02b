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

#ifndef DPGOMI_DP_HPP
#define DPGOMI_DP_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "dpgomi/rng.hpp"

namespace dpgomi {

// Order grid {1.25, 1.5, ..., 63} plus integers 64..256.
std::vector<double> default_rdp_orders();

struct DpConfig {
  double clip_norm = 1.0;         // C
  double noise_multiplier = 1.0;  // sigma; 0 selects the non-private debug mode
  double sample_rate = 0.01;      // q, Poisson inclusion probability
  double delta = 1e-5;
  double epsilon_budget = 10.0;   // +inf sentinel allowed in non-private mode
  std::vector<double> rdp_orders = default_rdp_orders();

  // Non-private debug mode: sigma == 0 disables accounting and requires an
  // infinite epsilon budget.
  bool non_private() const { return noise_multiplier == 0.0; }
  void validate() const;
};

// Per-sample l2 clipping: each column g is replaced by g * min(1, C/||g||).
Eigen::MatrixXd clip_per_sample(const Eigen::MatrixXd& per_sample_grads,
                                double clip_norm);

// Noisy aggregate: sum of columns plus N(0, (sigma*C)^2) per coordinate.
// Inputs must already satisfy the clip bound; violations are a contract error.
Eigen::VectorXd privatize_sum(const Eigen::MatrixXd& clipped_batch,
                              double clip_norm, double sigma, Rng& rng);

// Renyi divergence of the subsampled Gaussian mechanism at one order.
// Integer orders use the binomial series; fractional orders the two-sided
// numerical series. q == 1 collapses to the Gaussian closed form
// order / (2 sigma^2).
double rdp_subsampled_gaussian(double q, double sigma, double order);

struct AccountantEpoch {
  double q = 0.0;
  double sigma = 0.0;
  long steps = 0;
  bool operator==(const AccountantEpoch&) const = default;
};

// Cumulative RDP curve over a fixed order grid. The curve is recomputed from
// the (merged) epoch history on every composition step, so states built from
// equivalent histories compare exactly equal.
struct AccountantState {
  std::vector<double> orders;
  std::vector<double> rdp;  // cumulative Renyi divergence per order
  long steps_taken = 0;
  std::vector<AccountantEpoch> history;

  static AccountantState fresh(std::vector<double> orders = default_rdp_orders());
  bool operator==(const AccountantState&) const = default;
};

// Composes n_steps of the subsampled Gaussian mechanism onto the state.
AccountantState rdp_step(const AccountantState& state, double q, double sigma,
                         long n_steps);

struct DpConversion {
  double epsilon = 0.0;
  double order = 0.0;  // argmin order
};

// Classic RDP->(epsilon, delta) conversion:
//   epsilon = min over orders a of rdp(a) + log(1/delta) / (a - 1).
DpConversion rdp_to_dp(const AccountantState& state, double delta);

// Largest n with eps(n) <= eps_budget under the given mechanism parameters;
// 0 when a single step already exceeds the budget.
long max_steps_for_budget(double eps_budget, double delta, double q,
                          double sigma,
                          const std::vector<double>& orders = default_rdp_orders());

// Recomputes epsilon from an epoch history; used for manifest replay audits.
double replay_epsilon(const std::vector<AccountantEpoch>& history, double delta,
                      const std::vector<double>& orders = default_rdp_orders());

constexpr double kInfiniteEpsilon = std::numeric_limits<double>::infinity();

}  // namespace dpgomi

#endif  // DPGOMI_DP_HPP
