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

#include "dpgomi/dp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "dpgomi/error.hpp"

namespace dpgomi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// log(exp(a) - exp(b)) for a >= b.
double log_sub(double a, double b) {
  if (b == kNegInf) return a;
  if (a < b) {
    throw Error(ErrorCode::kGeneric,
                "RDP series produced a negative partial sum");
  }
  if (a == b) return kNegInf;
  return a + std::log1p(-std::exp(b - a));
}

// log(erfc(x)), using the Laurent tail expansion once erfc underflows.
double log_erfc(double x) {
  double r = std::erfc(x);
  if (r > 0.0) return std::log(r);
  double x2 = x * x;
  return -0.5 * std::log(M_PI) - std::log(x) - x2 - 0.5 / x2 +
         0.625 / (x2 * x2) - 37.0 / 24.0 / (x2 * x2 * x2) +
         353.0 / 64.0 / (x2 * x2 * x2 * x2);
}

double log_binom(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

bool is_integer_order(double order) {
  return std::abs(order - std::round(order)) < 1e-9;
}

// Integer-order binomial series for the sampled Gaussian mechanism:
// log A(a) = logsumexp_k [ log C(a,k) + k log q + (a-k) log(1-q)
//                          + (k^2 - k) / (2 sigma^2) ].
double log_a_int(double q, double sigma, long alpha) {
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  double acc = kNegInf;
  for (long k = 0; k <= alpha; ++k) {
    double term = log_binom(static_cast<double>(alpha), static_cast<double>(k)) +
                  k * log_q + (alpha - k) * log_1mq +
                  (static_cast<double>(k) * k - k) / (2.0 * sigma * sigma);
    acc = log_add(acc, term);
  }
  return acc;
}

// Fractional-order series: the two one-sided integrals around
// z0 = sigma^2 log(1/q - 1) + 1/2, accumulated in log space with signed
// generalized binomial coefficients.
double log_a_frac(double q, double sigma, double alpha) {
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  const double sqrt2_sigma = std::sqrt(2.0) * sigma;

  double log_a0 = kNegInf;
  double log_a1 = kNegInf;
  double log_coef_abs = 0.0;  // log |C(alpha, 0)|
  int sign = 1;

  for (long i = 0; i < 100000; ++i) {
    const double di = static_cast<double>(i);
    const double j = alpha - di;

    double log_t0 = log_coef_abs + di * log_q + j * log_1mq;
    double log_t1 = log_coef_abs + j * log_q + di * log_1mq;
    double log_e0 = std::log(0.5) + log_erfc((di - z0) / sqrt2_sigma);
    double log_e1 = std::log(0.5) + log_erfc((z0 - j) / sqrt2_sigma);
    double log_s0 = log_t0 + (di * di - di) / (2.0 * sigma * sigma) + log_e0;
    double log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;

    if (sign > 0) {
      log_a0 = log_add(log_a0, log_s0);
      log_a1 = log_add(log_a1, log_s1);
    } else {
      log_a0 = log_sub(log_a0, log_s0);
      log_a1 = log_sub(log_a1, log_s1);
    }

    if (std::max(log_s0, log_s1) < -30.0) break;

    // C(alpha, i+1) = C(alpha, i) * (alpha - i) / (i + 1)
    double factor = alpha - di;
    log_coef_abs += std::log(std::abs(factor)) - std::log(di + 1.0);
    if (factor < 0.0) sign = -sign;
  }
  return log_add(log_a0, log_a1);
}

}  // namespace

std::vector<double> default_rdp_orders() {
  std::vector<double> orders;
  for (int i = 0; 1.25 + 0.25 * i <= 63.0 + 1e-12; ++i)
    orders.push_back(1.25 + 0.25 * i);
  for (int a = 64; a <= 256; ++a) orders.push_back(static_cast<double>(a));
  return orders;
}

void DpConfig::validate() const {
  DPGOMI_CHECK_ARG(clip_norm > 0.0, "clip_norm must be positive");
  DPGOMI_CHECK_ARG(sample_rate > 0.0 && sample_rate <= 1.0,
                   "sample_rate must lie in (0, 1]");
  DPGOMI_CHECK_ARG(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  DPGOMI_CHECK_ARG(!rdp_orders.empty(), "order grid must be nonempty");
  DPGOMI_CHECK_ARG(std::is_sorted(rdp_orders.begin(), rdp_orders.end()),
                   "order grid must be sorted ascending");
  DPGOMI_CHECK_ARG(rdp_orders.front() > 1.0, "all orders must exceed 1");
  if (non_private()) {
    DPGOMI_CHECK_ARG(epsilon_budget == kInfiniteEpsilon,
                     "sigma == 0 requires an infinite epsilon budget");
  } else {
    DPGOMI_CHECK_ARG(noise_multiplier > 0.0,
                     "noise_multiplier must be nonnegative");
    DPGOMI_CHECK_ARG(epsilon_budget > 0.0, "epsilon_budget must be positive");
  }
}

Eigen::MatrixXd clip_per_sample(const Eigen::MatrixXd& per_sample_grads,
                                double clip_norm) {
  DPGOMI_CHECK_ARG(clip_norm > 0.0, "clip_norm must be positive");
  Eigen::MatrixXd out = per_sample_grads;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    double norm = out.col(i).norm();
    if (norm > clip_norm) out.col(i) *= clip_norm / norm;
  }
  return out;
}

Eigen::VectorXd privatize_sum(const Eigen::MatrixXd& clipped_batch,
                              double clip_norm, double sigma, Rng& rng) {
  DPGOMI_CHECK_ARG(clip_norm > 0.0, "clip_norm must be positive");
  DPGOMI_CHECK_ARG(sigma >= 0.0, "sigma must be nonnegative");
  const double tol = clip_norm * 1e-9 + 1e-12;
  for (Eigen::Index i = 0; i < clipped_batch.cols(); ++i) {
    if (clipped_batch.col(i).norm() > clip_norm + tol) {
      throw contract_violation(
          "privatize_sum received a gradient above the clip bound");
    }
  }
  Eigen::VectorXd sum = clipped_batch.cols() > 0
                            ? Eigen::VectorXd(clipped_batch.rowwise().sum())
                            : Eigen::VectorXd::Zero(clipped_batch.rows());
  if (sigma > 0.0) {
    const double std_dev = sigma * clip_norm;
    for (Eigen::Index i = 0; i < sum.size(); ++i)
      sum[i] += std_dev * rng.gaussian();
  }
  return sum;
}

double rdp_subsampled_gaussian(double q, double sigma, double order) {
  DPGOMI_CHECK_ARG(q >= 0.0 && q <= 1.0, "q must lie in [0, 1]");
  DPGOMI_CHECK_ARG(sigma > 0.0, "sigma must be positive");
  DPGOMI_CHECK_ARG(order > 1.0, "order must exceed 1");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return order / (2.0 * sigma * sigma);

  // Per-step composition during training hits the same (q, sigma, order)
  // thousands of times; memoize the series evaluation.
  thread_local std::map<std::tuple<double, double, double>, double> memo;
  auto key = std::make_tuple(q, sigma, order);
  if (auto it = memo.find(key); it != memo.end()) return it->second;

  double log_a;
  if (is_integer_order(order) && order >= 2.0) {
    log_a = log_a_int(q, sigma, std::lround(order));
  } else {
    log_a = log_a_frac(q, sigma, order);
  }
  double rdp = std::max(0.0, log_a / (order - 1.0));
  memo.emplace(key, rdp);
  return rdp;
}

AccountantState AccountantState::fresh(std::vector<double> orders) {
  DPGOMI_CHECK_ARG(!orders.empty(), "order grid must be nonempty");
  DPGOMI_CHECK_ARG(std::is_sorted(orders.begin(), orders.end()),
                   "order grid must be sorted ascending");
  DPGOMI_CHECK_ARG(orders.front() > 1.0, "all orders must exceed 1");
  AccountantState s;
  s.rdp.assign(orders.size(), 0.0);
  s.orders = std::move(orders);
  return s;
}

AccountantState rdp_step(const AccountantState& state, double q, double sigma,
                         long n_steps) {
  DPGOMI_CHECK_ARG(q > 0.0 && q <= 1.0, "q must lie in (0, 1]");
  DPGOMI_CHECK_ARG(sigma > 0.0, "sigma must be positive");
  DPGOMI_CHECK_ARG(n_steps >= 1, "n_steps must be at least 1");

  AccountantState next = state;
  if (!next.history.empty() && next.history.back().q == q &&
      next.history.back().sigma == sigma) {
    next.history.back().steps += n_steps;
  } else {
    next.history.push_back({q, sigma, n_steps});
  }
  next.steps_taken = 0;
  for (const auto& e : next.history) next.steps_taken += e.steps;

  // Rebuild the cumulative curve from the merged history so that state
  // equality is exact regardless of how steps were chunked across calls.
  next.rdp.assign(next.orders.size(), 0.0);
  for (const auto& e : next.history) {
    for (std::size_t i = 0; i < next.orders.size(); ++i) {
      next.rdp[i] += static_cast<double>(e.steps) *
                     rdp_subsampled_gaussian(e.q, e.sigma, next.orders[i]);
    }
  }
  return next;
}

DpConversion rdp_to_dp(const AccountantState& state, double delta) {
  DPGOMI_CHECK_ARG(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  DPGOMI_CHECK_ARG(!state.orders.empty(), "order grid must be nonempty");
  const double log_inv_delta = std::log(1.0 / delta);
  DpConversion best{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < state.orders.size(); ++i) {
    double eps = state.rdp[i] + log_inv_delta / (state.orders[i] - 1.0);
    if (eps < best.epsilon) best = {eps, state.orders[i]};
  }
  best.epsilon = std::max(0.0, best.epsilon);
  return best;
}

long max_steps_for_budget(double eps_budget, double delta, double q,
                          double sigma, const std::vector<double>& orders) {
  DPGOMI_CHECK_ARG(eps_budget > 0.0, "epsilon budget must be positive");
  DPGOMI_CHECK_ARG(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  DPGOMI_CHECK_ARG(q > 0.0 && q <= 1.0, "q must lie in (0, 1]");
  DPGOMI_CHECK_ARG(sigma > 0.0, "sigma must be positive");
  DPGOMI_CHECK_ARG(!orders.empty(), "order grid must be nonempty");

  std::vector<double> per_step(orders.size());
  for (std::size_t i = 0; i < orders.size(); ++i)
    per_step[i] = rdp_subsampled_gaussian(q, sigma, orders[i]);

  const double log_inv_delta = std::log(1.0 / delta);
  auto eps_at = [&](long n) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < orders.size(); ++i) {
      best = std::min(best, static_cast<double>(n) * per_step[i] +
                                log_inv_delta / (orders[i] - 1.0));
    }
    return best;
  };

  if (eps_at(1) > eps_budget) return 0;

  constexpr long kMaxSteps = 1000000000000L;  // 1e12 cap
  long lo = 1, hi = 2;
  while (hi < kMaxSteps && eps_at(hi) <= eps_budget) {
    lo = hi;
    hi *= 2;
  }
  if (hi >= kMaxSteps) return kMaxSteps;
  // Invariant: eps(lo) <= budget < eps(hi).
  while (hi - lo > 1) {
    long mid = lo + (hi - lo) / 2;
    if (eps_at(mid) <= eps_budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double replay_epsilon(const std::vector<AccountantEpoch>& history, double delta,
                      const std::vector<double>& orders) {
  AccountantState s = AccountantState::fresh(orders);
  for (const auto& e : history) s = rdp_step(s, e.q, e.sigma, e.steps);
  return rdp_to_dp(s, delta).epsilon;
}

}  // namespace dpgomi
