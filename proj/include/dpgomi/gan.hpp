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

#ifndef DPGOMI_GAN_HPP
#define DPGOMI_GAN_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpgomi/dataset.hpp"
#include "dpgomi/error.hpp"
#include "dpgomi/nn.hpp"

namespace dpgomi {

// Separable standard normal prior over the latent space.
struct LatentPrior {
  int dim = 0;
  // log P_Z(z) = -d/2 log(2 pi) - ||z||^2 / 2
  double log_density(const Vector& z) const;
};

// Draws an (dim x n) batch of iid standard normal latents, deterministic
// under the seed.
Matrix sample_prior(const LatentPrior& prior, int n, std::uint64_t seed);
Matrix sample_prior(const LatentPrior& prior, int n, Rng& rng);

// Frozen or trainable mapping z -> output. Image generators end in a tanh
// head and emit values in [-1, 1]; latent generators end linear.
struct Generator {
  Net net;
  int latent_dim = 0;
  std::vector<int> output_shape;  // {h, w, c} for images, {d} for latents
  std::string arch_id;

  int output_dim() const;
  Matrix generate(const Matrix& z) const { return net.forward(z); }
  std::string checksum() const { return net.checksum(); }
};

enum class DiscMode { vanilla, wasserstein };

struct Discriminator {
  Net net;
  std::vector<int> input_shape;
  DiscMode mode = DiscMode::wasserstein;
  std::string arch_id;

  int input_dim() const;
  // Vanilla mode emits probabilities in (0, 1); wasserstein an unbounded
  // score.
  Matrix score(const Matrix& x) const { return net.forward(x); }
  std::string checksum() const { return net.checksum(); }
};

struct GanValueDiagnostics {
  bool clamped = false;  // probability hit the configured floor
};

// Minimax value mean log C(x) + mean log(1 - C(G(z))). Probabilities are
// clamped to [floor, 1 - floor] and the clamp is flagged.
double gan_value(const Discriminator& disc, const Generator& gen,
                 const Matrix& real_batch, const Matrix& z_batch,
                 GanValueDiagnostics* diag = nullptr, double prob_floor = 1e-7);

// Wasserstein value mean f(x) - mean f(G(z)).
double wgan_value(const Discriminator& critic, const Generator& gen,
                  const Matrix& real_batch, const Matrix& z_batch);

enum class GanObjective { vanilla, wasserstein };

struct GanTrainConfig {
  GanObjective objective = GanObjective::wasserstein;
  int latent_dim = 64;
  int steps = 2000;  // generator updates
  int batch_size = 64;
  int critic_steps = 3;
  double lr = 1e-3;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double weight_clip = 0.05;      // wasserstein + clipping mode
  double gradient_penalty = 0.0;  // > 0 replaces clipping with a penalty
  std::vector<int> gen_hidden = {64, 64};
  std::vector<int> disc_hidden = {64, 64};
  std::string arch = "mlp";  // "mlp" | "dcgan32"
  int conv_base_width = 64;  // dcgan32 channel multiplier
  std::uint64_t seed = 0;
  int snapshot_interval = 50;  // divergence-recovery checkpoint cadence
  double prob_floor = 1e-7;

  void validate() const;
};

struct TrainReport {
  long steps_run = 0;
  double final_objective = 0.0;
  std::vector<double> objective_trace;  // sampled at snapshot cadence
  bool diverged = false;
};

struct PublicGanResult {
  Generator generator;
  Discriminator discriminator;
  TrainReport report;
};

// Divergence error carrying the last good checkpoint.
class TrainingFailureError : public Error {
 public:
  TrainingFailureError(const std::string& msg,
                       std::shared_ptr<PublicGanResult> last_good = nullptr);
  const std::shared_ptr<PublicGanResult>& last_good() const {
    return last_good_;
  }

 private:
  std::shared_ptr<PublicGanResult> last_good_;
};

// Trains the non-private GAN on the public split. Images are mapped to
// [-1, 1] internally. Divergence (non-finite objective) raises
// training-failure carrying the last snapshot via the exception message;
// the caller owns manifest writing.
PublicGanResult train_public_gan(const LabeledDataset& d_p,
                                 const GanTrainConfig& config);

// Gradient-penalty term (||grad_x f(x_hat)|| - 1)^2 for one sample:
// accumulates the parameter gradient of the penalty into dtheta and returns
// the penalty value. Requires a dense/activation critic.
double gradient_penalty_param_grad(const Net& critic, const Vector& x_hat,
                                   std::span<double> dtheta);

Generator make_mlp_generator(int latent_dim, const std::vector<int>& hidden,
                             const std::vector<int>& output_shape,
                             bool tanh_head, Rng& rng);
Discriminator make_mlp_discriminator(const std::vector<int>& input_shape,
                                     const std::vector<int>& hidden,
                                     DiscMode mode, Rng& rng);
// Debug stub: emits its latent input unchanged.
Generator make_identity_generator(int dim);

}  // namespace dpgomi

#endif  // DPGOMI_GAN_HPP
