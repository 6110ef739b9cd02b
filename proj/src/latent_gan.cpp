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

#include "dpgomi/latent_gan.hpp"

#include <cmath>
#include <sstream>

#include "dpgomi/error.hpp"

namespace dpgomi {

void DpGanConfig::validate() const {
  DPGOMI_CHECK_ARG(inner_latent_dim >= 1, "inner latent dim must be >= 1");
  DPGOMI_CHECK_ARG(critic_steps >= 1, "critic_steps must be >= 1");
  DPGOMI_CHECK_ARG(max_steps >= 1, "max_steps must be >= 1");
  DPGOMI_CHECK_ARG(gen_batch >= 1, "gen_batch must be >= 1");
  DPGOMI_CHECK_ARG(lr > 0.0, "learning rate must be positive");
  DPGOMI_CHECK_ARG(weight_clip > 0.0, "weight_clip must be positive");
  DPGOMI_CHECK_ARG(snapshot_interval >= 1, "snapshot_interval must be >= 1");
  dp.validate();
}

DpTrainingFailureError::DpTrainingFailureError(
    const std::string& msg, std::shared_ptr<AccountantState> accountant)
    : Error(ErrorCode::kTrainingFailure, msg),
      accountant_(std::move(accountant)) {}

DpGanResult train_dp_latent_gan(
    const LatentDataset& latents, const DpGanConfig& config,
    const LatentAccessHook& access_hook,
    const std::function<void(const std::string&)>& audit_line) {
  // A non-positive finite budget is exhausted before training starts, not a
  // malformed configuration.
  if (!config.dp.non_private() && config.dp.epsilon_budget <= 0.0) {
    throw Error(ErrorCode::kBudgetExhausted,
                "epsilon budget does not cover a single critic step");
  }
  config.validate();
  latents.validate();
  DPGOMI_CHECK_ARG(latents.n() > 0, "latent dataset is empty");

  const int d = latents.dim();
  const int n = latents.n();
  const double q = config.dp.sample_rate;
  const double sigma = config.dp.noise_multiplier;
  const double clip = config.dp.clip_norm;

  long planned = config.max_steps;
  if (!config.dp.non_private()) {
    long budget_steps =
        max_steps_for_budget(config.dp.epsilon_budget, config.dp.delta, q,
                             sigma, config.dp.rdp_orders);
    if (budget_steps == 0) {
      throw Error(ErrorCode::kBudgetExhausted,
                  "epsilon budget does not cover a single critic step");
    }
    planned = std::min(planned, budget_steps);
  }

  Rng init_rng(config.seed, "dp-gan-init");
  Generator gen;
  gen.net = make_mlp(config.inner_latent_dim, config.gen_hidden, d, Act::relu,
                     Act::identity);
  gen.net.init_params(init_rng);
  gen.latent_dim = config.inner_latent_dim;
  gen.output_shape = {d};
  gen.arch_id = "mlp-latent-gen";

  Net critic = make_mlp(d, config.critic_hidden, 1, Act::leaky_relu,
                        Act::identity);
  critic.init_params(init_rng);

  Rng poisson_rng(config.seed, "dp-gan-poisson");
  Rng z_rng(config.seed, "dp-gan-z");
  // DP noise comes from its own dedicated stream.
  Rng noise_rng(config.seed, "dp-gan-noise");

  AdamOptimizer gen_opt(gen.net.param_count(), config.lr, config.adam_beta1,
                        config.adam_beta2);
  AdamOptimizer critic_opt(critic.param_count(), config.lr, config.adam_beta1,
                           config.adam_beta2);

  AccountantState accountant = AccountantState::fresh(config.dp.rdp_orders);
  DpGanResult result;
  result.planned_steps = planned;

  LatentPrior inner_prior{config.inner_latent_dim};
  // Fixed denominator: the expected Poisson lot size.
  const double lot = std::max(1.0, q * static_cast<double>(n));

  auto read_latent = [&](int idx, TrainPhase phase) -> Vector {
    if (access_hook) access_hook(phase, idx);
    return latents.vectors.col(idx);
  };

  TrainReport report;
  long critic_steps_done = 0;
  double last_gen_loss = 0.0;

  while (critic_steps_done < planned) {
    const int round_critic_steps = static_cast<int>(
        std::min<long>(config.critic_steps, planned - critic_steps_done));
    for (int cs = 0; cs < round_critic_steps; ++cs) {
      // Poisson-sampled lot: each private latent joins independently with
      // probability q (matches the accountant's subsampling semantics).
      std::vector<int> batch;
      for (int i = 0; i < n; ++i) {
        if (poisson_rng.uniform() < q) batch.push_back(i);
      }

      Matrix per_sample(critic.param_count(), batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        Vector real = read_latent(batch[b], TrainPhase::critic_update);
        Matrix z = sample_prior(inner_prior, 1, z_rng);
        Matrix fake = gen.net.forward(z);

        // Per-sample critic loss -f(x_i) + f(G(z_i)); both terms belong to
        // the clipped gradient (conservative pairing).
        Vector grad = Vector::Zero(critic.param_count());
        auto gspan = std::span<double>(
            grad.data(), static_cast<std::size_t>(grad.size()));
        std::vector<Matrix> cache_r, cache_f;
        critic.forward_cached(real, cache_r);
        critic.forward_cached(fake, cache_f);
        critic.backward(cache_r, Matrix::Constant(1, 1, -1.0), gspan);
        critic.backward(cache_f, Matrix::Constant(1, 1, 1.0), gspan);
        per_sample.col(static_cast<Eigen::Index>(b)) = grad;
      }

      Matrix clipped = clip_per_sample(per_sample, clip);
      Vector noisy = privatize_sum(clipped, clip, sigma, noise_rng);
      Vector mean_grad = noisy / lot;

      Vector params = critic.get_params();
      critic_opt.step(params, mean_grad);
      critic.set_params(params);
      clip_params(critic, config.weight_clip);

      ++critic_steps_done;
      if (!config.dp.non_private()) {
        accountant = rdp_step(accountant, q, sigma, 1);
        double eps_now = rdp_to_dp(accountant, config.dp.delta).epsilon;
        result.audit.push_back({critic_steps_done, q, sigma, eps_now});
        if (audit_line) {
          std::ostringstream line;
          line << "step=" << critic_steps_done << " q=" << q
               << " sigma=" << sigma << " steps_taken="
               << accountant.steps_taken << " epsilon=" << eps_now
               << " delta=" << config.dp.delta;
          audit_line(line.str());
        }
      }
    }

    // Generator update: only critic scores of generated samples flow back;
    // the private latents are never read in this phase.
    {
      Matrix z = sample_prior(inner_prior, config.gen_batch, z_rng);
      std::vector<Matrix> cache_gen, cache_critic;
      Matrix fake = gen.net.forward_cached(z, cache_gen);
      Matrix scores = critic.forward_cached(fake, cache_critic);
      last_gen_loss = -scores.row(0).mean();

      Matrix dscore =
          Matrix::Constant(1, config.gen_batch, -1.0 / config.gen_batch);
      Vector scratch = Vector::Zero(critic.param_count());
      Matrix dfake = critic.backward(
          cache_critic, dscore,
          std::span<double>(scratch.data(),
                            static_cast<std::size_t>(scratch.size())));
      Vector dtheta = Vector::Zero(gen.net.param_count());
      gen.net.backward(cache_gen, dfake,
                       std::span<double>(dtheta.data(),
                                         static_cast<std::size_t>(
                                             dtheta.size())));
      Vector params = gen.net.get_params();
      gen_opt.step(params, dtheta);
      gen.net.set_params(params);
    }

    if (!std::isfinite(last_gen_loss)) {
      throw DpTrainingFailureError(
          "latent DP-GAN objective became non-finite after " +
              std::to_string(critic_steps_done) + " critic steps",
          std::make_shared<AccountantState>(accountant));
    }
    if (critic_steps_done % config.snapshot_interval == 0) {
      report.objective_trace.push_back(last_gen_loss);
    }
  }

  report.steps_run = critic_steps_done;
  report.final_objective = last_gen_loss;
  result.g_ds = std::move(gen);
  result.accountant = std::move(accountant);
  result.report = std::move(report);
  return result;
}

}  // namespace dpgomi
