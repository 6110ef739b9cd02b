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

#ifndef DPGOMI_LATENT_GAN_HPP
#define DPGOMI_LATENT_GAN_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dpgomi/dp.hpp"
#include "dpgomi/gan.hpp"
#include "dpgomi/inversion.hpp"

namespace dpgomi {

enum class TrainPhase { idle, critic_update, generator_update };

// Test hook: every private-latent read is reported together with the phase
// the trainer was in, so the taint invariant (generator updates never touch
// the data) is directly assertable.
using LatentAccessHook = std::function<void(TrainPhase, int index)>;

struct DpGanConfig {
  int inner_latent_dim = 16;  // d''
  int critic_steps = 1;       // critic updates per generator update
  long max_steps = 1000;      // requested critic updates (budget may cut this)
  int gen_batch = 64;
  double lr = 1e-3;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double weight_clip = 0.1;
  std::vector<int> gen_hidden = {32, 32, 32};
  std::vector<int> critic_hidden = {32, 32, 32};
  DpConfig dp;
  std::uint64_t seed = 0;
  int snapshot_interval = 100;

  void validate() const;
};

struct AccountantAuditEntry {
  long step = 0;
  double q = 0.0;
  double sigma = 0.0;
  double epsilon_so_far = 0.0;
};

struct DpGanResult {
  Generator g_ds;  // d'' -> d
  AccountantState accountant;
  TrainReport report;
  long planned_steps = 0;  // budget-limited critic-step plan
  std::vector<AccountantAuditEntry> audit;
};

// Divergence error preserving the accountant state: privacy spent is spent.
class DpTrainingFailureError : public Error {
 public:
  DpTrainingFailureError(const std::string& msg,
                         std::shared_ptr<AccountantState> accountant);
  const std::shared_ptr<AccountantState>& accountant() const {
    return accountant_;
  }

 private:
  std::shared_ptr<AccountantState> accountant_;
};

// Wasserstein training over private latent vectors. Every critic update
// runs per-sample clipping + Gaussian privatization over a Poisson-sampled
// batch; generator updates see only critic scores of generated samples.
// Training halts within max_steps_for_budget. The audit_line callback, when
// set, receives one formatted record per accounted step (write-ahead log).
DpGanResult train_dp_latent_gan(
    const LatentDataset& latents, const DpGanConfig& config,
    const LatentAccessHook& access_hook = nullptr,
    const std::function<void(const std::string&)>& audit_line = nullptr);

}  // namespace dpgomi

#endif  // DPGOMI_LATENT_GAN_HPP
