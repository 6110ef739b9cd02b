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

#ifndef DPGOMI_NN_HPP
#define DPGOMI_NN_HPP

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"

#include "dpgomi/rng.hpp"

namespace dpgomi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Act { identity, relu, leaky_relu, tanh, sigmoid };

std::string act_name(Act a);
Act act_from_name(const std::string& name);

// Batches are stored one sample per column. Layers are stateless with
// respect to activations: forward caches live with the caller, so a frozen
// net can serve many optimizations concurrently.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix forward(const Matrix& x) const = 0;
  // Backward pass for the cached input x. Accumulates parameter gradients
  // into dparams (layer-local layout) and returns dL/dx.
  virtual Matrix backward(const Matrix& x, const Matrix& dy,
                          std::span<double> dparams) const = 0;
  virtual std::size_t param_count() const { return 0; }
  virtual void write_params(std::span<double> out) const { (void)out; }
  virtual void read_params(std::span<const double> in) { (void)in; }
  virtual void init_params(Rng& rng) { (void)rng; }
  virtual int output_dim(int input_dim) const = 0;
  virtual nlohmann::json describe() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(int in_dim, int out_dim);

  Matrix forward(const Matrix& x) const override;
  Matrix backward(const Matrix& x, const Matrix& dy,
                  std::span<double> dparams) const override;
  std::size_t param_count() const override;
  void write_params(std::span<double> out) const override;
  void read_params(std::span<const double> in) override;
  void init_params(Rng& rng) override;
  int output_dim(int input_dim) const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override;

  int in_dim() const { return static_cast<int>(weights_.cols()); }
  int out_dim() const { return static_cast<int>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }

 private:
  Matrix weights_;  // out x in
  Vector bias_;
};

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(Act kind) : kind_(kind) {}

  Matrix forward(const Matrix& x) const override;
  Matrix backward(const Matrix& x, const Matrix& dy,
                  std::span<double> dparams) const override;
  int output_dim(int input_dim) const override { return input_dim; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override;

  Act kind() const { return kind_; }

 private:
  Act kind_;
};

// Passes input through unchanged; used for debug generators.
class IdentityLayer final : public Layer {
 public:
  Matrix forward(const Matrix& x) const override { return x; }
  Matrix backward(const Matrix&, const Matrix& dy,
                  std::span<double>) const override {
    return dy;
  }
  int output_dim(int input_dim) const override { return input_dim; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<IdentityLayer>();
  }
};

class Net {
 public:
  Net() = default;
  Net(Net&&) = default;
  Net& operator=(Net&&) = default;
  Net(const Net& other) { *this = other; }
  Net& operator=(const Net& other);

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }

  Matrix forward(const Matrix& x) const;
  // Runs the first n_layers only; used for feature extraction.
  Matrix forward_prefix(const Matrix& x, std::size_t n_layers) const;
  // cache[i] receives the input of layer i.
  Matrix forward_cached(const Matrix& x, std::vector<Matrix>& cache) const;
  // Accumulates parameter gradients (flat layout, layer by layer) and
  // returns dL/dinput.
  Matrix backward(const std::vector<Matrix>& cache, const Matrix& dy,
                  std::span<double> dparams) const;

  std::size_t param_count() const;
  Vector get_params() const;
  void set_params(const Vector& params);
  void init_params(Rng& rng);

  nlohmann::json describe() const;
  static Net from_description(const nlohmann::json& desc);

  // Digest over architecture and parameter bytes.
  std::string checksum() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

Net make_mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
             Act hidden_act, Act out_act);

// First-moment/second-moment adaptive optimizer over a flat parameter
// vector, with the standard bias corrections.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);
  void step(Vector& params, const Vector& grad);
  void reset();

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long t_ = 0;
  Vector m_, v_;
};

// Parameter clamp to [-c, c]; Lipschitz control for Wasserstein critics.
void clip_params(Net& net, double c);

}  // namespace dpgomi

#endif  // DPGOMI_NN_HPP
