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

#ifndef DPGOMI_INVERSION_HPP
#define DPGOMI_INVERSION_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpgomi/dataset.hpp"
#include "dpgomi/gan.hpp"

namespace dpgomi {

enum class InversionMethod { mi, gomi };
std::string method_name(InversionMethod m);
InversionMethod method_from_name(const std::string& name);

// The inversion cost ||G(z) - x||^2 / P_Z(z) is optimized in one of two
// numerically equivalent shapes. literal_ratio drops the constant
// (2 pi)^{-d/2} and evaluates f(z) * exp(||z||^2 / 2); log_surrogate
// optimizes log(f(z) + e) + ||z||^2 / 2, which shares its minimizers and
// stays in floating-point range for any latent dimension.
enum class ObjectiveForm { literal_ratio, log_surrogate };

struct InversionConfig {
  int iterations = 1000;        // N
  double learning_rate = 0.05;  // alpha
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double epsilon_div = 1e-8;    // e: Adam denominator and surrogate offset
  ObjectiveForm objective_form = ObjectiveForm::log_surrogate;
  int restarts = 4;
  std::uint64_t seed = 0;
  // Warm start for the first restart; replaces the prior draw.
  std::optional<Vector> init_override;

  void validate() const;
};

struct ObjectiveEval {
  double value = 0.0;        // in the requested form
  double log_scale = 0.0;    // log f + ||z||^2/2; -inf at zero residual
  double residual_sq = 0.0;  // f(z) = ||G(z) - x||^2
  bool overflow_fallback = false;
};

ObjectiveEval gomi_objective_eval(const Generator& gen, const Vector& z,
                                  const Vector& target, ObjectiveForm form,
                                  double epsilon_div);

// Scalar objective value; on literal-ratio overflow the log-surrogate value
// is returned and *overflow is set.
double gomi_objective(const Generator& gen, const Vector& z,
                      const Vector& target, ObjectiveForm form,
                      double epsilon_div = 1e-8, bool* overflow = nullptr);

Vector gomi_gradient(const Generator& gen, const Vector& z,
                     const Vector& target, ObjectiveForm form,
                     double epsilon_div = 1e-8);

struct InversionResult {
  Vector z;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double reconstruction_mse = 0.0;
  int restart_index = 0;
  bool overflow_fallback = false;
};

// Adam descent on the Gaussian-modulated objective; the best iterate of the
// best restart is returned, so final_objective <= initial_objective.
InversionResult invert_gomi(const Generator& gen, const Vector& target,
                            const InversionConfig& config,
                            std::uint64_t stream_index = 0);

// Baseline: minimize the reconstruction error subject to
// P_Z(z) >= P_Z(z0), i.e. the ball ||z|| <= ||z0||, by projected Adam steps;
// z0 is drawn fresh per restart.
InversionResult invert_mi(const Generator& gen, const Vector& target,
                          const InversionConfig& config,
                          std::uint64_t stream_index = 0);

struct LatentDataset {
  Matrix vectors;  // d x n
  std::vector<int> labels;
  std::vector<double> reconstruction_mse;
  std::string source_generator_checksum;
  std::string method;

  int n() const { return static_cast<int>(vectors.cols()); }
  int dim() const { return static_cast<int>(vectors.rows()); }
  void validate() const;
};

struct InversionBatchReport {
  int attempted = 0;
  int failed = 0;
  double mean_mse = 0.0;
  double median_mse = 0.0;
};

// One independent inversion per private image. Per-image failures are
// skipped and counted; more than 10% failures aborts the batch.
LatentDataset invert_batch(const Generator& gen, const LabeledDataset& d_s,
                           InversionMethod method,
                           const InversionConfig& config,
                           InversionBatchReport* report = nullptr);

}  // namespace dpgomi

#endif  // DPGOMI_INVERSION_HPP
