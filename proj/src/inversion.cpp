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

#include "dpgomi/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "dpgomi/error.hpp"

namespace dpgomi {

namespace {
// exp(s) stays finite below this; beyond it the literal ratio overflows.
constexpr double kExpOverflow = 690.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

std::string method_name(InversionMethod m) {
  return m == InversionMethod::gomi ? "gomi" : "mi";
}

InversionMethod method_from_name(const std::string& name) {
  if (name == "gomi") return InversionMethod::gomi;
  if (name == "mi") return InversionMethod::mi;
  throw invalid_argument("unknown inversion method: " + name);
}

void InversionConfig::validate() const {
  DPGOMI_CHECK_ARG(iterations >= 1, "iterations must be at least 1");
  DPGOMI_CHECK_ARG(learning_rate > 0.0, "learning rate must be positive");
  DPGOMI_CHECK_ARG(adam_beta1 >= 0.0 && adam_beta1 < 1.0,
                   "beta1 must lie in [0, 1)");
  DPGOMI_CHECK_ARG(adam_beta2 >= 0.0 && adam_beta2 < 1.0,
                   "beta2 must lie in [0, 1)");
  DPGOMI_CHECK_ARG(epsilon_div > 0.0, "epsilon_div must be positive");
  DPGOMI_CHECK_ARG(restarts >= 1, "restarts must be at least 1");
}

ObjectiveEval gomi_objective_eval(const Generator& gen, const Vector& z,
                                  const Vector& target, ObjectiveForm form,
                                  double epsilon_div) {
  DPGOMI_CHECK_ARG(z.size() == gen.latent_dim, "latent dimension mismatch");
  Vector out = gen.net.forward(z);
  DPGOMI_CHECK_ARG(out.size() == target.size(), "target dimension mismatch");
  const double f = (out - target).squaredNorm();
  const double s = 0.5 * z.squaredNorm();

  ObjectiveEval eval;
  eval.residual_sq = f;
  eval.log_scale = f > 0.0 ? std::log(f) + s : kNegInf;
  if (form == ObjectiveForm::literal_ratio) {
    if (s > kExpOverflow) {
      eval.value = std::log(f + epsilon_div) + s;
      eval.overflow_fallback = true;
    } else {
      eval.value = f * std::exp(s);
    }
  } else {
    eval.value = std::log(f + epsilon_div) + s;
  }
  return eval;
}

double gomi_objective(const Generator& gen, const Vector& z,
                      const Vector& target, ObjectiveForm form,
                      double epsilon_div, bool* overflow) {
  ObjectiveEval eval = gomi_objective_eval(gen, z, target, form, epsilon_div);
  if (overflow != nullptr) *overflow = eval.overflow_fallback;
  return eval.value;
}

namespace {

struct GradEval {
  ObjectiveEval eval;
  Vector grad;
};

// One generator forward/backward yields both the objective and its latent
// gradient. grad f = 2 J_G(z)^T (G(z) - x).
GradEval objective_and_gradient(const Generator& gen, const Vector& z,
                                const Vector& target, ObjectiveForm form,
                                double epsilon_div) {
  std::vector<Matrix> cache;
  Matrix out = gen.net.forward_cached(z, cache);
  DPGOMI_CHECK_ARG(out.rows() == target.size(), "target dimension mismatch");
  Vector residual = out.col(0) - target;
  const double f = residual.squaredNorm();
  const double s = 0.5 * z.squaredNorm();

  Vector scratch = Vector::Zero(gen.net.param_count());
  Matrix dout = 2.0 * residual;
  Vector grad_f =
      gen.net.backward(cache, dout,
                       std::span<double>(scratch.data(),
                                         static_cast<std::size_t>(
                                             scratch.size())))
          .col(0);

  GradEval ge;
  ge.eval.residual_sq = f;
  ge.eval.log_scale = f > 0.0 ? std::log(f) + s : kNegInf;
  if (form == ObjectiveForm::literal_ratio && s <= kExpOverflow) {
    const double es = std::exp(s);
    ge.eval.value = f * es;
    ge.grad = es * (grad_f + f * z);
  } else {
    if (form == ObjectiveForm::literal_ratio) ge.eval.overflow_fallback = true;
    ge.eval.value = std::log(f + epsilon_div) + s;
    ge.grad = grad_f / (f + epsilon_div) + z;
  }
  return ge;
}

// Comparison key: literal values can overflow, so restarts are ranked on the
// log scale for the literal form and on the surrogate value otherwise.
double tracking_key(const ObjectiveEval& eval, ObjectiveForm form) {
  return form == ObjectiveForm::literal_ratio ? eval.log_scale : eval.value;
}

struct RestartOutcome {
  bool ok = false;
  Vector best_z;
  double best_key = 0.0;
  ObjectiveEval best_eval;
  ObjectiveEval initial_eval;
  bool overflow_seen = false;
};

Vector gomi_gradient_impl(const Generator& gen, const Vector& z,
                          const Vector& target, ObjectiveForm form,
                          double epsilon_div) {
  return objective_and_gradient(gen, z, target, form, epsilon_div).grad;
}

}  // namespace

Vector gomi_gradient(const Generator& gen, const Vector& z,
                     const Vector& target, ObjectiveForm form,
                     double epsilon_div) {
  return gomi_gradient_impl(gen, z, target, form, epsilon_div);
}

namespace {

// Shared Adam loop for both inversion methods. project == nullptr runs the
// unconstrained GOMI objective; otherwise the reconstruction error is
// minimized and each step is pulled back into the constraint set.
RestartOutcome run_restart(const Generator& gen, const Vector& target,
                           const InversionConfig& config, Vector z,
                           ObjectiveForm form,
                           const std::function<void(Vector&)>* project) {
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double e = config.epsilon_div;
  const int dim = gen.latent_dim;

  RestartOutcome out;
  Vector m = Vector::Zero(dim);
  Vector v = Vector::Zero(dim);

  auto evaluate = [&](const Vector& at) {
    if (project == nullptr)
      return gomi_objective_eval(gen, at, target, form, e);
    ObjectiveEval ev;
    Vector pred = gen.net.forward(at);
    ev.residual_sq = (pred.col(0) - target).squaredNorm();
    ev.value = ev.residual_sq;
    ev.log_scale = ev.value;
    return ev;
  };

  ObjectiveEval first = evaluate(z);
  if (!std::isfinite(first.residual_sq)) return out;
  out.initial_eval = first;
  out.best_eval = first;
  out.best_key =
      project == nullptr ? tracking_key(first, form) : first.value;
  out.best_z = z;
  out.overflow_seen = first.overflow_fallback;

  for (int i = 1; i <= config.iterations; ++i) {
    Vector g;
    ObjectiveEval eval;
    if (project == nullptr) {
      GradEval ge = objective_and_gradient(gen, z, target, form, e);
      g = std::move(ge.grad);
      eval = ge.eval;
      out.overflow_seen = out.overflow_seen || eval.overflow_fallback;
    } else {
      std::vector<Matrix> cache;
      Matrix pred = gen.net.forward_cached(z, cache);
      Vector residual = pred.col(0) - target;
      eval.residual_sq = residual.squaredNorm();
      eval.value = eval.residual_sq;
      eval.log_scale = eval.value;
      Vector scratch = Vector::Zero(gen.net.param_count());
      g = gen.net
              .backward(cache, Matrix(2.0 * residual),
                        std::span<double>(scratch.data(),
                                          static_cast<std::size_t>(
                                              scratch.size())))
              .col(0);
    }
    if (!g.allFinite()) return out.ok ? out : RestartOutcome{};

    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const Vector m_hat = m / (1.0 - std::pow(b1, i));
    const Vector v_hat = v / (1.0 - std::pow(b2, i));
    z -= config.learning_rate *
         m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + e).matrix());
    if (project != nullptr) (*project)(z);

    ObjectiveEval stepped = evaluate(z);
    if (!std::isfinite(stepped.residual_sq)) break;
    double key = project == nullptr ? tracking_key(stepped, form)
                                    : stepped.value;
    if (key < out.best_key) {
      out.best_key = key;
      out.best_eval = stepped;
      out.best_z = z;
    }
    out.overflow_seen = out.overflow_seen || stepped.overflow_fallback;
  }
  out.ok = std::isfinite(out.best_eval.residual_sq);
  return out;
}

InversionResult select_result(const Generator& gen,
                              std::vector<RestartOutcome>& outcomes,
                              const Vector& target) {
  int best = -1;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (!outcomes[r].ok) continue;
    if (best < 0 || outcomes[r].best_key < outcomes[best].best_key)
      best = static_cast<int>(r);
  }
  if (best < 0) {
    throw Error(ErrorCode::kInversionFailure,
                "all restarts ended with a non-finite objective");
  }
  const RestartOutcome& chosen = outcomes[best];
  InversionResult result;
  result.z = chosen.best_z;
  result.initial_objective = chosen.initial_eval.value;
  result.final_objective = chosen.best_eval.value;
  result.restart_index = best;
  result.overflow_fallback = chosen.overflow_seen;
  const Eigen::Index pixels = target.size();
  result.reconstruction_mse =
      chosen.best_eval.residual_sq / static_cast<double>(pixels);
  (void)gen;
  return result;
}

}  // namespace

InversionResult invert_gomi(const Generator& gen, const Vector& target,
                            const InversionConfig& config,
                            std::uint64_t stream_index) {
  config.validate();
  Rng base(config.seed, "invert-gomi", stream_index);
  std::vector<RestartOutcome> outcomes;
  for (int r = 0; r < config.restarts; ++r) {
    Vector z0;
    if (r == 0 && config.init_override.has_value()) {
      z0 = *config.init_override;
      DPGOMI_CHECK_ARG(z0.size() == gen.latent_dim,
                       "init_override dimension mismatch");
    } else {
      Rng rng = base.derive("restart", static_cast<std::uint64_t>(r));
      z0 = Vector(gen.latent_dim);
      for (int i = 0; i < gen.latent_dim; ++i) z0[i] = rng.gaussian();
    }
    outcomes.push_back(run_restart(gen, target, config, std::move(z0),
                                   config.objective_form, nullptr));
  }
  return select_result(gen, outcomes, target);
}

InversionResult invert_mi(const Generator& gen, const Vector& target,
                          const InversionConfig& config,
                          std::uint64_t stream_index) {
  config.validate();
  Rng base(config.seed, "invert-mi", stream_index);
  std::vector<RestartOutcome> outcomes;
  for (int r = 0; r < config.restarts; ++r) {
    Vector z0;
    if (r == 0 && config.init_override.has_value()) {
      z0 = *config.init_override;
      DPGOMI_CHECK_ARG(z0.size() == gen.latent_dim,
                       "init_override dimension mismatch");
    } else {
      Rng rng = base.derive("restart", static_cast<std::uint64_t>(r));
      z0 = Vector(gen.latent_dim);
      for (int i = 0; i < gen.latent_dim; ++i) z0[i] = rng.gaussian();
    }
    // P_Z(z) >= P_Z(z0) is exactly the ball ||z|| <= ||z0||; the projection
    // rescales radially.
    const double radius = z0.norm();
    std::function<void(Vector&)> project = [radius](Vector& z) {
      double n = z.norm();
      if (n > radius && n > 0.0) z *= radius / n;
    };
    outcomes.push_back(run_restart(gen, target, config, std::move(z0),
                                   ObjectiveForm::log_surrogate, &project));
  }
  return select_result(gen, outcomes, target);
}

void LatentDataset::validate() const {
  DPGOMI_CHECK_ARG(vectors.allFinite(), "latent vectors must be finite");
  DPGOMI_CHECK_ARG(labels.empty() ||
                       labels.size() == static_cast<std::size_t>(n()),
                   "label count mismatch");
  DPGOMI_CHECK_ARG(reconstruction_mse.empty() ||
                       reconstruction_mse.size() ==
                           static_cast<std::size_t>(n()),
                   "mse sidecar count mismatch");
}

LatentDataset invert_batch(const Generator& gen, const LabeledDataset& d_s,
                           InversionMethod method,
                           const InversionConfig& config,
                           InversionBatchReport* report) {
  config.validate();
  LatentDataset out;
  out.method = method_name(method);
  out.source_generator_checksum = gen.checksum();
  out.vectors.resize(gen.latent_dim, 0);

  InversionBatchReport rep;
  rep.attempted = d_s.n();

  std::vector<Vector> latents;
  std::vector<int> labels;
  std::vector<double> mses;
  for (int i = 0; i < d_s.n(); ++i) {
    Vector target = 2.0 * d_s.images.col(i).array() - 1.0;
    try {
      InversionResult res =
          method == InversionMethod::gomi
              ? invert_gomi(gen, target, config, static_cast<std::uint64_t>(i))
              : invert_mi(gen, target, config, static_cast<std::uint64_t>(i));
      latents.push_back(std::move(res.z));
      labels.push_back(d_s.labels[i]);
      mses.push_back(res.reconstruction_mse);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInversionFailure) throw;
      ++rep.failed;
    }
  }

  if (rep.attempted > 0 &&
      rep.failed * 10 > rep.attempted) {  // > 10% failures
    throw Error(ErrorCode::kInversionFailure,
                "inversion batch failure: " + std::to_string(rep.failed) +
                    " of " + std::to_string(rep.attempted) +
                    " images failed");
  }

  out.vectors.resize(gen.latent_dim,
                     static_cast<Eigen::Index>(latents.size()));
  for (std::size_t i = 0; i < latents.size(); ++i)
    out.vectors.col(static_cast<Eigen::Index>(i)) = latents[i];
  out.labels = std::move(labels);
  out.reconstruction_mse = std::move(mses);

  if (!out.reconstruction_mse.empty()) {
    std::vector<double> sorted = out.reconstruction_mse;
    std::sort(sorted.begin(), sorted.end());
    rep.median_mse = sorted[sorted.size() / 2];
    double sum = 0.0;
    for (double m : out.reconstruction_mse) sum += m;
    rep.mean_mse = sum / static_cast<double>(out.reconstruction_mse.size());
  }
  if (report != nullptr) *report = rep;
  return out;
}

}  // namespace dpgomi
