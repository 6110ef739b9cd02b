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

#include "dpgomi/gan.hpp"

#include <cmath>

#include "dpgomi/conv.hpp"
#include <numeric>

#include "dpgomi/error.hpp"

namespace dpgomi {

double LatentPrior::log_density(const Vector& z) const {
  DPGOMI_CHECK_ARG(z.size() == dim, "latent dimension mismatch");
  return -0.5 * dim * std::log(2.0 * M_PI) - 0.5 * z.squaredNorm();
}

Matrix sample_prior(const LatentPrior& prior, int n, Rng& rng) {
  DPGOMI_CHECK_ARG(prior.dim > 0, "prior dim must be positive");
  DPGOMI_CHECK_ARG(n >= 1, "sample count must be at least 1");
  Matrix z(prior.dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < prior.dim; ++i) z(i, j) = rng.gaussian();
  return z;
}

Matrix sample_prior(const LatentPrior& prior, int n, std::uint64_t seed) {
  Rng rng(seed, "prior");
  return sample_prior(prior, n, rng);
}

int Generator::output_dim() const {
  int d = 1;
  for (int s : output_shape) d *= s;
  return d;
}

int Discriminator::input_dim() const {
  int d = 1;
  for (int s : input_shape) d *= s;
  return d;
}

double gan_value(const Discriminator& disc, const Generator& gen,
                 const Matrix& real_batch, const Matrix& z_batch,
                 GanValueDiagnostics* diag, double prob_floor) {
  DPGOMI_CHECK_ARG(disc.mode == DiscMode::vanilla,
                   "gan_value requires a vanilla discriminator");
  DPGOMI_CHECK_ARG(real_batch.rows() == disc.input_dim(),
                   "real batch dim mismatch");
  DPGOMI_CHECK_ARG(z_batch.rows() == gen.latent_dim, "latent dim mismatch");
  DPGOMI_CHECK_ARG(real_batch.cols() > 0 && z_batch.cols() > 0,
                   "batches must be nonempty");

  bool clamped = false;
  auto clamp_prob = [&](double p) {
    if (p < prob_floor || p > 1.0 - prob_floor) clamped = true;
    return std::clamp(p, prob_floor, 1.0 - prob_floor);
  };

  Matrix p_real = disc.score(real_batch);
  Matrix p_fake = disc.score(gen.generate(z_batch));
  double v = 0.0;
  for (Eigen::Index i = 0; i < p_real.cols(); ++i)
    v += std::log(clamp_prob(p_real(0, i))) / p_real.cols();
  for (Eigen::Index i = 0; i < p_fake.cols(); ++i)
    v += std::log1p(-clamp_prob(p_fake(0, i))) / p_fake.cols();
  if (diag != nullptr) diag->clamped = clamped;
  return v;
}

double wgan_value(const Discriminator& critic, const Generator& gen,
                  const Matrix& real_batch, const Matrix& z_batch) {
  DPGOMI_CHECK_ARG(critic.mode == DiscMode::wasserstein,
                   "wgan_value requires a wasserstein critic");
  DPGOMI_CHECK_ARG(real_batch.rows() == critic.input_dim(),
                   "real batch dim mismatch");
  DPGOMI_CHECK_ARG(z_batch.rows() == gen.latent_dim, "latent dim mismatch");
  DPGOMI_CHECK_ARG(real_batch.cols() > 0 && z_batch.cols() > 0,
                   "batches must be nonempty");
  Matrix s_real = critic.score(real_batch);
  Matrix s_fake = critic.score(gen.generate(z_batch));
  return s_real.row(0).mean() - s_fake.row(0).mean();
}

void GanTrainConfig::validate() const {
  DPGOMI_CHECK_ARG(latent_dim >= 1, "latent_dim must be positive");
  DPGOMI_CHECK_ARG(steps >= 0, "steps must be nonnegative");
  DPGOMI_CHECK_ARG(batch_size >= 1, "batch_size must be positive");
  DPGOMI_CHECK_ARG(critic_steps >= 1, "critic_steps must be positive");
  DPGOMI_CHECK_ARG(lr > 0.0, "learning rate must be positive");
  DPGOMI_CHECK_ARG(weight_clip > 0.0 || gradient_penalty > 0.0 ||
                       objective == GanObjective::vanilla,
                   "wasserstein mode needs weight_clip or gradient_penalty");
  DPGOMI_CHECK_ARG(snapshot_interval >= 1, "snapshot_interval must be >= 1");
}

Generator make_mlp_generator(int latent_dim, const std::vector<int>& hidden,
                             const std::vector<int>& output_shape,
                             bool tanh_head, Rng& rng) {
  int out_dim = 1;
  for (int s : output_shape) out_dim *= s;
  Generator gen;
  gen.net = make_mlp(latent_dim, hidden, out_dim, Act::relu,
                     tanh_head ? Act::tanh : Act::identity);
  gen.net.init_params(rng);
  gen.latent_dim = latent_dim;
  gen.output_shape = output_shape;
  gen.arch_id = "mlp-gen";
  return gen;
}

Discriminator make_mlp_discriminator(const std::vector<int>& input_shape,
                                     const std::vector<int>& hidden,
                                     DiscMode mode, Rng& rng) {
  int in_dim = 1;
  for (int s : input_shape) in_dim *= s;
  Discriminator disc;
  disc.net = make_mlp(in_dim, hidden, 1, Act::leaky_relu,
                      mode == DiscMode::vanilla ? Act::sigmoid : Act::identity);
  disc.net.init_params(rng);
  disc.input_shape = input_shape;
  disc.mode = mode;
  disc.arch_id = mode == DiscMode::vanilla ? "mlp-disc" : "mlp-critic";
  return disc;
}

Generator make_identity_generator(int dim) {
  Generator gen;
  gen.net.add(std::make_unique<IdentityLayer>());
  gen.latent_dim = dim;
  gen.output_shape = {dim};
  gen.arch_id = "identity";
  return gen;
}

namespace {

Matrix sample_columns(const Matrix& data, int count, Rng& rng) {
  Matrix out(data.rows(), count);
  for (int j = 0; j < count; ++j) {
    auto idx = rng.uniform_int(static_cast<std::uint64_t>(data.cols()));
    out.col(j) = data.col(static_cast<Eigen::Index>(idx));
  }
  return out;
}

struct ActDerivs {
  double first;
  double second;
};

ActDerivs act_derivs(Act kind, double z) {
  switch (kind) {
    case Act::identity:
      return {1.0, 0.0};
    case Act::relu:
      return {z > 0.0 ? 1.0 : 0.0, 0.0};
    case Act::leaky_relu:
      return {z > 0.0 ? 1.0 : 0.2, 0.0};
    case Act::tanh: {
      double t = std::tanh(z);
      return {1.0 - t * t, -2.0 * t * (1.0 - t * t)};
    }
    case Act::sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-z));
      return {s * (1.0 - s), s * (1.0 - s) * (1.0 - 2.0 * s)};
    }
  }
  return {1.0, 0.0};
}

}  // namespace

double gradient_penalty_param_grad(const Net& critic, const Vector& x_hat,
                                   std::span<double> dtheta) {
  DPGOMI_CHECK_ARG(dtheta.size() == critic.param_count(),
                   "gradient buffer size mismatch");
  const auto& layers = critic.layers();
  const std::size_t n_layers = layers.size();

  // Primal pass, caching each layer input.
  std::vector<Vector> a(n_layers + 1);
  a[0] = x_hat;
  for (std::size_t l = 0; l < n_layers; ++l)
    a[l + 1] = layers[l]->forward(a[l]);
  DPGOMI_CHECK_ARG(a[n_layers].size() == 1, "critic must emit a scalar");

  // Input-gradient pass: g = grad_x f(x_hat).
  std::vector<Vector> v(n_layers + 1);
  v[n_layers] = Vector::Ones(1);
  for (std::size_t l = n_layers; l-- > 0;) {
    if (auto* dense = dynamic_cast<const DenseLayer*>(layers[l].get())) {
      v[l] = dense->weights().transpose() * v[l + 1];
    } else if (auto* act = dynamic_cast<const ActivationLayer*>(layers[l].get())) {
      v[l] = v[l + 1];
      for (Eigen::Index i = 0; i < v[l].size(); ++i)
        v[l][i] *= act_derivs(act->kind(), a[l][i]).first;
    } else if (dynamic_cast<const IdentityLayer*>(layers[l].get()) != nullptr) {
      v[l] = v[l + 1];
    } else {
      throw invalid_argument(
          "gradient penalty supports dense/activation critics only");
    }
  }
  const Vector g = v[0];
  const double g_norm = g.norm();
  const double penalty = (g_norm - 1.0) * (g_norm - 1.0);
  if (g_norm == 0.0) return penalty;

  // The penalty's parameter gradient equals grad_theta of the directional
  // derivative D_r f(x_hat) with r = dP/dg held fixed.
  const Vector r = (2.0 * (g_norm - 1.0) / g_norm) * g;

  // Tangent pass: t' propagates r through the linearized net.
  std::vector<Vector> t(n_layers + 1);
  t[0] = r;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (auto* dense = dynamic_cast<const DenseLayer*>(layers[l].get())) {
      t[l + 1] = dense->weights() * t[l];
    } else if (auto* act = dynamic_cast<const ActivationLayer*>(layers[l].get())) {
      t[l + 1] = t[l];
      for (Eigen::Index i = 0; i < t[l + 1].size(); ++i)
        t[l + 1][i] *= act_derivs(act->kind(), a[l][i]).first;
    } else {
      t[l + 1] = t[l];
    }
  }

  // Adjoint pass over the joint (primal, tangent) graph; the scalar output
  // is the tangent's last entry.
  std::vector<std::size_t> offsets(n_layers + 1, 0);
  for (std::size_t l = 0; l < n_layers; ++l)
    offsets[l + 1] = offsets[l] + layers[l]->param_count();

  Vector a_bar = Vector::Zero(a[n_layers].size());
  Vector t_bar = Vector::Ones(1);
  for (std::size_t l = n_layers; l-- > 0;) {
    if (auto* dense = dynamic_cast<const DenseLayer*>(layers[l].get())) {
      Eigen::Map<Matrix> dw(dtheta.data() + offsets[l], dense->out_dim(),
                            dense->in_dim());
      Eigen::Map<Vector> db(dtheta.data() + offsets[l] +
                                static_cast<std::size_t>(dense->out_dim()) *
                                    dense->in_dim(),
                            dense->out_dim());
      dw.noalias() += a_bar * a[l].transpose() + t_bar * t[l].transpose();
      db.noalias() += a_bar;
      Vector a_prev = dense->weights().transpose() * a_bar;
      Vector t_prev = dense->weights().transpose() * t_bar;
      a_bar = std::move(a_prev);
      t_bar = std::move(t_prev);
    } else if (auto* act = dynamic_cast<const ActivationLayer*>(layers[l].get())) {
      Vector a_prev(a[l].size());
      Vector t_prev(a[l].size());
      for (Eigen::Index i = 0; i < a[l].size(); ++i) {
        auto d = act_derivs(act->kind(), a[l][i]);
        a_prev[i] = d.first * a_bar[i] + d.second * t[l][i] * t_bar[i];
        t_prev[i] = d.first * t_bar[i];
      }
      a_bar = std::move(a_prev);
      t_bar = std::move(t_prev);
    }
    // IdentityLayer: adjoints pass through unchanged.
  }
  return penalty;
}

TrainingFailureError::TrainingFailureError(
    const std::string& msg, std::shared_ptr<PublicGanResult> last_good)
    : Error(ErrorCode::kTrainingFailure, msg),
      last_good_(std::move(last_good)) {}

PublicGanResult train_public_gan(const LabeledDataset& d_p,
                                 const GanTrainConfig& config) {
  config.validate();
  d_p.validate();
  DPGOMI_CHECK_ARG(d_p.n() >= 1, "public split is empty");
  DPGOMI_CHECK_ARG(config.arch == "mlp" || config.arch == "dcgan32",
                   "unknown architecture: " + config.arch);

  // Pixels move to the generator's [-1, 1] range.
  Matrix x = 2.0 * d_p.images.array() - 1.0;

  Rng init_rng(config.seed, "public-gan-init");
  const DiscMode mode = config.objective == GanObjective::wasserstein
                            ? DiscMode::wasserstein
                            : DiscMode::vanilla;
  Generator gen;
  Discriminator disc;
  if (config.arch == "dcgan32") {
    DPGOMI_CHECK_ARG(d_p.height == 32 && d_p.width == 32,
                     "dcgan32 requires 32x32 images");
    DPGOMI_CHECK_ARG(config.gradient_penalty == 0.0,
                     "gradient penalty supports dense critics only");
    gen = make_dcgan32_generator(config.latent_dim, d_p.channels,
                                 config.conv_base_width, init_rng);
    disc = make_dcgan32_discriminator(d_p.channels, config.conv_base_width,
                                      mode, init_rng);
  } else {
    gen = make_mlp_generator(config.latent_dim, config.gen_hidden,
                             {d_p.height, d_p.width, d_p.channels},
                             /*tanh_head=*/true, init_rng);
    disc = make_mlp_discriminator({d_p.height, d_p.width, d_p.channels},
                                  config.disc_hidden, mode, init_rng);
  }

  Rng batch_rng(config.seed, "public-gan-batch");
  Rng z_rng(config.seed, "public-gan-z");
  Rng gp_rng(config.seed, "public-gan-gp");
  LatentPrior prior{config.latent_dim};

  AdamOptimizer gen_opt(gen.net.param_count(), config.lr, config.adam_beta1,
                        config.adam_beta2);
  AdamOptimizer disc_opt(disc.net.param_count(), config.lr, config.adam_beta1,
                         config.adam_beta2);

  PublicGanResult snapshot{gen, disc, {}};
  TrainReport report;
  const int n = config.batch_size;
  const bool use_gp =
      config.gradient_penalty > 0.0 && mode == DiscMode::wasserstein;

  for (int step = 0; step < config.steps; ++step) {
    for (int cs = 0; cs < config.critic_steps; ++cs) {
      Matrix real = sample_columns(x, n, batch_rng);
      Matrix z = sample_prior(prior, n, z_rng);
      Matrix fake = gen.generate(z);

      std::vector<Matrix> cache_real, cache_fake;
      Matrix s_real = disc.net.forward_cached(real, cache_real);
      Matrix s_fake = disc.net.forward_cached(fake, cache_fake);

      Vector dtheta = Vector::Zero(disc.net.param_count());
      auto dspan = std::span<double>(dtheta.data(),
                                     static_cast<std::size_t>(dtheta.size()));
      if (mode == DiscMode::wasserstein) {
        // Critic loss: -(mean f(real) - mean f(fake)).
        Matrix d_real = Matrix::Constant(1, n, -1.0 / n);
        Matrix d_fake = Matrix::Constant(1, n, 1.0 / n);
        disc.net.backward(cache_real, d_real, dspan);
        disc.net.backward(cache_fake, d_fake, dspan);
        if (use_gp) {
          for (int j = 0; j < n; ++j) {
            double mix = gp_rng.uniform();
            Vector x_hat = mix * real.col(j) + (1.0 - mix) * fake.col(j);
            Vector gp_grad = Vector::Zero(dtheta.size());
            gradient_penalty_param_grad(
                disc.net, x_hat,
                std::span<double>(gp_grad.data(),
                                  static_cast<std::size_t>(gp_grad.size())));
            dtheta += (config.gradient_penalty / n) * gp_grad;
          }
        }
      } else {
        // Discriminator loss: -(mean log C(real) + mean log(1 - C(fake))).
        Matrix d_real(1, n), d_fake(1, n);
        for (int j = 0; j < n; ++j) {
          double pr = std::clamp(s_real(0, j), config.prob_floor,
                                 1.0 - config.prob_floor);
          double pf = std::clamp(s_fake(0, j), config.prob_floor,
                                 1.0 - config.prob_floor);
          d_real(0, j) = -1.0 / (pr * n);
          d_fake(0, j) = 1.0 / ((1.0 - pf) * n);
        }
        disc.net.backward(cache_real, d_real, dspan);
        disc.net.backward(cache_fake, d_fake, dspan);
      }
      Vector params = disc.net.get_params();
      disc_opt.step(params, dtheta);
      disc.net.set_params(params);
      if (mode == DiscMode::wasserstein && !use_gp)
        clip_params(disc.net, config.weight_clip);
    }

    // Generator update; parameter gradients of the critic are discarded.
    {
      Matrix z = sample_prior(prior, n, z_rng);
      std::vector<Matrix> cache_gen, cache_disc;
      Matrix fake = gen.net.forward_cached(z, cache_gen);
      Matrix s_fake = disc.net.forward_cached(fake, cache_disc);

      Matrix d_score(1, n);
      if (mode == DiscMode::wasserstein) {
        // Generator loss: -mean f(fake).
        d_score.setConstant(-1.0 / n);
      } else {
        // Non-saturating loss: -mean log C(fake).
        for (int j = 0; j < n; ++j) {
          double pf = std::clamp(s_fake(0, j), config.prob_floor,
                                 1.0 - config.prob_floor);
          d_score(0, j) = -1.0 / (pf * n);
        }
      }
      Vector scratch = Vector::Zero(disc.net.param_count());
      Matrix d_fake = disc.net.backward(
          cache_disc, d_score,
          std::span<double>(scratch.data(),
                            static_cast<std::size_t>(scratch.size())));
      Vector dtheta_g = Vector::Zero(gen.net.param_count());
      gen.net.backward(cache_gen, d_fake,
                       std::span<double>(dtheta_g.data(),
                                         static_cast<std::size_t>(
                                             dtheta_g.size())));
      Vector params = gen.net.get_params();
      gen_opt.step(params, dtheta_g);
      gen.net.set_params(params);
    }

    if ((step + 1) % config.snapshot_interval == 0 ||
        step + 1 == config.steps) {
      Matrix real = sample_columns(x, n, batch_rng);
      Matrix z = sample_prior(prior, n, z_rng);
      double value = mode == DiscMode::wasserstein
                         ? wgan_value(disc, gen, real, z)
                         : gan_value(disc, gen, real, z, nullptr,
                                     config.prob_floor);
      if (!std::isfinite(value)) {
        throw TrainingFailureError(
            "public GAN objective became non-finite at step " +
                std::to_string(step + 1),
            std::make_shared<PublicGanResult>(snapshot));
      }
      report.objective_trace.push_back(value);
      report.final_objective = value;
      report.steps_run = step + 1;
      snapshot = PublicGanResult{gen, disc, report};
    }
  }

  report.steps_run = config.steps;
  return PublicGanResult{std::move(gen), std::move(disc), std::move(report)};
}

}  // namespace dpgomi
