// DPSGD mechanism and RDP accountant tests. Expected values come from
// independent oracles: numerical Renyi-divergence quadrature, dense-grid
// conversion scans, and sample statistics.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dpgomi/dp.hpp"
#include "dpgomi/error.hpp"
#include "dpgomi/rng.hpp"

using namespace dpgomi;

namespace {

// Oracle: Renyi divergence D_a(N(1, s^2) || N(0, s^2)) by Simpson
// quadrature of p^a q^(1-a) over a wide bracket. The closed form is
// a / (2 s^2); the quadrature must reproduce it without using it.
double renyi_divergence_quadrature(double sigma, double order) {
  const double lo = -60.0 * sigma;
  const double hi = 1.0 + 60.0 * sigma;
  const int n = 400001;  // odd for Simpson
  const double h = (hi - lo) / (n - 1);
  auto log_p = [&](double x) {  // N(1, sigma^2)
    double d = (x - 1.0) / sigma;
    return -0.5 * d * d - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
  };
  auto log_q = [&](double x) {  // N(0, sigma^2)
    double d = x / sigma;
    return -0.5 * d * d - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
  };
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = lo + h * i;
    double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * std::exp(order * log_p(x) + (1.0 - order) * log_q(x));
  }
  acc *= h / 3.0;
  return std::log(acc) / (order - 1.0);
}

}  // namespace

TEST_CASE("clip_per_sample rescales norms to the bound") {
  Eigen::MatrixXd g(2, 1);
  g << 3.0, 4.0;
  Eigen::MatrixXd clipped = clip_per_sample(g, 1.0);
  CHECK(clipped(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(clipped(1, 0) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("clip_per_sample passes short vectors through") {
  Eigen::MatrixXd g(2, 1);
  g << 0.3, 0.4;  // norm 0.5
  Eigen::MatrixXd clipped = clip_per_sample(g, 1.0);
  CHECK(clipped == g);

  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(4, 2);
  CHECK(clip_per_sample(zero, 1.0) == zero);
}

TEST_CASE("clip_per_sample norm audit over random batches") {
  Rng rng(7, "clip-test");
  const double c = 0.7;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd g(8, 20);
    for (int j = 0; j < 20; ++j) {
      double scale = std::pow(10.0, rng.uniform() * 13.0 - 1.0);  // up to 1e12
      for (int i = 0; i < 8; ++i) g(i, j) = scale * rng.gaussian();
    }
    Eigen::MatrixXd clipped = clip_per_sample(g, c);
    for (int j = 0; j < 20; ++j) CHECK(clipped.col(j).norm() <= c + 1e-6);
  }
}

TEST_CASE("privatize_sum with sigma 0 is the exact sum") {
  Rng rng(3, "noise-test");
  Eigen::MatrixXd batch(3, 4);
  batch.setRandom();
  batch = clip_per_sample(batch, 1.0);
  Eigen::VectorXd sum = privatize_sum(batch, 1.0, 0.0, rng);
  CHECK((sum - batch.rowwise().sum()).norm() == doctest::Approx(0.0));
}

TEST_CASE("privatize_sum rejects unclipped input") {
  Rng rng(3, "noise-test");
  Eigen::MatrixXd batch(2, 1);
  batch << 3.0, 4.0;  // norm 5 > C = 1
  CHECK_THROWS_AS(privatize_sum(batch, 1.0, 1.0, rng), Error);
}

TEST_CASE("privatize_sum empty batch is pure noise with std sigma*C") {
  Rng rng(11, "noise-std");
  const double sigma = 1.0, c = 1.0;
  Eigen::MatrixXd empty(1, 0);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = privatize_sum(empty, c, sigma, rng)[0];
    sum += v;
    sum_sq += v * v;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::sqrt(var) > 0.97);
  CHECK(std::sqrt(var) < 1.03);
}

TEST_CASE("replace-one sensitivity of the clipped sum is at most 2C") {
  Rng rng(9, "sens-test");
  const double c = 1.3;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd batch(6, 10);
    for (int j = 0; j < 10; ++j)
      for (int i = 0; i < 6; ++i)
        batch(i, j) = 5.0 * rng.gaussian();
    Eigen::MatrixXd clipped = clip_per_sample(batch, c);
    Eigen::VectorXd base = clipped.rowwise().sum();
    // Replace sample 0 by a fresh clipped vector.
    Eigen::MatrixXd other(6, 1);
    for (int i = 0; i < 6; ++i) other(i, 0) = 5.0 * rng.gaussian();
    Eigen::MatrixXd other_clipped = clip_per_sample(other, c);
    Eigen::VectorXd swapped = base - clipped.col(0) + other_clipped.col(0);
    CHECK((swapped - base).norm() <= 2.0 * c + 1e-9);
  }
}

TEST_CASE("q = 1 RDP matches the Gaussian closed form and quadrature") {
  const double sigma = 2.0;
  for (double order : {1.5, 2.0, 3.0, 8.0, 32.0}) {
    double rdp = rdp_subsampled_gaussian(1.0, sigma, order);
    CHECK(rdp == doctest::Approx(order / (2.0 * sigma * sigma))
                     .epsilon(1e-12));
  }
  // Independent oracle: numerical Renyi divergence between N(1, s^2) and
  // N(0, s^2).
  for (double order : {2.0, 4.0}) {
    double oracle = renyi_divergence_quadrature(sigma, order);
    CHECK(rdp_subsampled_gaussian(1.0, sigma, order) ==
          doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("subsampled RDP matches direct quadrature of the mixture") {
  // Oracle: D_a(mix || base) with mix = (1-q) N(0,s^2) + q N(1,s^2) and
  // base = N(0,s^2), integrated by Simpson's rule. Covers both the
  // integer-order binomial series and the fractional-order series.
  const double q = 0.1, sigma = 1.5;
  auto oracle = [&](double order) {
    const double lo = -60.0 * sigma;
    const double hi = 1.0 + 60.0 * sigma;
    const int n = 800001;
    const double h = (hi - lo) / (n - 1);
    const double log_norm = -std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
    auto log_base = [&](double x) {
      return -0.5 * x * x / (sigma * sigma) + log_norm;
    };
    auto log_mix = [&](double x) {
      double a = std::log1p(-q) + log_base(x);
      double b = std::log(q) - 0.5 * (x - 1.0) * (x - 1.0) / (sigma * sigma) +
                 log_norm;
      double hi2 = std::max(a, b);
      return hi2 + std::log1p(std::exp(std::min(a, b) - hi2));
    };
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      double x = lo + h * i;
      double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      acc += w * std::exp(order * log_mix(x) + (1.0 - order) * log_base(x));
    }
    acc *= h / 3.0;
    return std::log(acc) / (order - 1.0);
  };
  for (double order : {2.0, 3.0, 2.5, 7.25}) {
    CHECK(rdp_subsampled_gaussian(q, sigma, order) ==
          doctest::Approx(oracle(order)).epsilon(1e-8));
  }
}

TEST_CASE("subsampled RDP: fractional and integer orders are consistent") {
  // The curve should be smooth across the integer/fractional boundary.
  const double q = 0.02, sigma = 1.1;
  double at_3 = rdp_subsampled_gaussian(q, sigma, 3.0);
  double at_2_75 = rdp_subsampled_gaussian(q, sigma, 2.75);
  double at_3_25 = rdp_subsampled_gaussian(q, sigma, 3.25);
  CHECK(at_2_75 <= at_3);
  CHECK(at_3 <= at_3_25);
  CHECK(at_3 == doctest::Approx(0.5 * (at_2_75 + at_3_25)).epsilon(0.05));
}

TEST_CASE("rdp_step composes additively and merges equal epochs") {
  AccountantState fresh = AccountantState::fresh();
  CHECK_THROWS_AS(rdp_step(fresh, 0.01, 1.0, 0), Error);

  AccountantState two_calls = rdp_step(fresh, 0.01, 1.0, 50);
  two_calls = rdp_step(two_calls, 0.01, 1.0, 50);
  AccountantState one_call = rdp_step(fresh, 0.01, 1.0, 100);
  CHECK(two_calls == one_call);
  CHECK(two_calls.steps_taken == 100);
  CHECK(two_calls.history.size() == 1);
}

TEST_CASE("fresh state converts to epsilon = log(1/delta)/(a_max - 1)") {
  AccountantState fresh = AccountantState::fresh();
  DpConversion conv = rdp_to_dp(fresh, 1e-5);
  const double a_max = fresh.orders.back();
  CHECK(conv.epsilon ==
        doctest::Approx(std::log(1e5) / (a_max - 1.0)).epsilon(1e-12));
  CHECK(conv.order == a_max);
}

TEST_CASE("conversion matches a dense-grid oracle reimplementation") {
  // Same conversion formula, reimplemented and scanned over a dense order
  // grid shared with the accountant state.
  std::vector<double> dense;
  for (double a = 1.05; a <= 500.0; a += 0.005) dense.push_back(a);
  const double sigma = 4.0, delta = 1e-5;
  AccountantState state = AccountantState::fresh(dense);
  state = rdp_step(state, 1.0, sigma, 1);
  double eps = rdp_to_dp(state, delta).epsilon;

  double oracle = std::numeric_limits<double>::infinity();
  for (double a : dense) {
    double candidate = a / (2.0 * sigma * sigma) + std::log(1.0 / delta) / (a - 1.0);
    oracle = std::min(oracle, candidate);
  }
  CHECK(eps == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("epsilon is monotone in sigma, delta and steps") {
  Rng rng(21, "mono");
  for (int trial = 0; trial < 10; ++trial) {
    double q = 0.005 + 0.1 * rng.uniform();
    double sigma = 0.8 + 2.0 * rng.uniform();
    long steps = 1 + static_cast<long>(rng.uniform_int(200));
    double delta = 1e-6;

    AccountantState base = rdp_step(AccountantState::fresh(), q, sigma, steps);
    double eps = rdp_to_dp(base, delta).epsilon;

    // Nonincreasing in sigma.
    AccountantState higher_sigma =
        rdp_step(AccountantState::fresh(), q, sigma * 2.0, steps);
    CHECK(rdp_to_dp(higher_sigma, delta).epsilon <= eps + 1e-12);

    // Nonincreasing in delta.
    CHECK(rdp_to_dp(base, delta * 100.0).epsilon <= eps + 1e-12);

    // Nondecreasing in steps.
    AccountantState more_steps = rdp_step(base, q, sigma, steps);
    CHECK(rdp_to_dp(more_steps, delta).epsilon >= eps - 1e-12);
  }
}

TEST_CASE("RDP is nondecreasing in the order on the default grid") {
  for (double q : {0.01, 0.2}) {
    for (double sigma : {0.9, 2.5}) {
      auto orders = default_rdp_orders();
      double prev = 0.0;
      for (double a : orders) {
        double cur = rdp_subsampled_gaussian(q, sigma, a);
        CHECK(cur >= prev - 1e-12);
        prev = cur;
      }
    }
  }
}

TEST_CASE("max_steps_for_budget brackets the budget") {
  const double eps_budget = 2.0, delta = 1e-5, q = 0.02, sigma = 1.2;
  long n = max_steps_for_budget(eps_budget, delta, q, sigma);
  REQUIRE(n >= 1);
  AccountantState at_n =
      rdp_step(AccountantState::fresh(), q, sigma, n);
  AccountantState at_n1 =
      rdp_step(AccountantState::fresh(), q, sigma, n + 1);
  CHECK(rdp_to_dp(at_n, delta).epsilon <= eps_budget);
  CHECK(rdp_to_dp(at_n1, delta).epsilon > eps_budget);
}

TEST_CASE("one-step budget smaller than a single step yields zero") {
  // sigma small enough that even one full-batch step exceeds eps = 0.01.
  long n = max_steps_for_budget(0.01, 1e-5, 1.0, 0.5);
  CHECK(n == 0);
}

TEST_CASE("doubling sigma never decreases max steps") {
  Rng rng(5, "budget-mono");
  for (int trial = 0; trial < 5; ++trial) {
    double q = 0.01 + 0.2 * rng.uniform();
    double sigma = 0.8 + 1.5 * rng.uniform();
    double eps = 0.5 + 5.0 * rng.uniform();
    long a = max_steps_for_budget(eps, 1e-5, q, sigma);
    long b = max_steps_for_budget(eps, 1e-5, q, sigma * 2.0);
    CHECK(b >= a);
  }
}

TEST_CASE("replay_epsilon reproduces a composed history") {
  AccountantState s = AccountantState::fresh();
  s = rdp_step(s, 0.05, 1.0, 120);
  s = rdp_step(s, 0.02, 1.5, 40);
  double direct = rdp_to_dp(s, 1e-5).epsilon;
  CHECK(replay_epsilon(s.history, 1e-5) == doctest::Approx(direct));
}

TEST_CASE("DpConfig validation") {
  DpConfig ok;
  ok.validate();

  DpConfig bad = ok;
  bad.sample_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ok;
  bad.delta = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ok;
  bad.noise_multiplier = 0.0;  // requires infinite budget
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.epsilon_budget = kInfiniteEpsilon;
  bad.validate();  // non-private debug mode
}
