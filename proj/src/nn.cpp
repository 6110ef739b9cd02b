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

#include "dpgomi/nn.hpp"

#include <cmath>

#include "dpgomi/conv.hpp"

#include "nlohmann/json.hpp"

#include "dpgomi/error.hpp"
#include "dpgomi/hash.hpp"

namespace dpgomi {

using nlohmann::json;

std::string act_name(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::relu: return "relu";
    case Act::leaky_relu: return "leaky_relu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
  }
  return "identity";
}

Act act_from_name(const std::string& name) {
  if (name == "identity") return Act::identity;
  if (name == "relu") return Act::relu;
  if (name == "leaky_relu") return Act::leaky_relu;
  if (name == "tanh") return Act::tanh;
  if (name == "sigmoid") return Act::sigmoid;
  throw invalid_argument("unknown activation: " + name);
}

namespace {
constexpr double kLeakySlope = 0.2;

double act_apply(Act kind, double v) {
  switch (kind) {
    case Act::identity: return v;
    case Act::relu: return v > 0.0 ? v : 0.0;
    case Act::leaky_relu: return v > 0.0 ? v : kLeakySlope * v;
    case Act::tanh: return std::tanh(v);
    case Act::sigmoid: return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

double act_grad(Act kind, double pre) {
  switch (kind) {
    case Act::identity: return 1.0;
    case Act::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Act::leaky_relu: return pre > 0.0 ? 1.0 : kLeakySlope;
    case Act::tanh: {
      double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Act::sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-pre));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}
}  // namespace

DenseLayer::DenseLayer(int in_dim, int out_dim) {
  DPGOMI_CHECK_ARG(in_dim > 0 && out_dim > 0, "dense dims must be positive");
  weights_ = Matrix::Zero(out_dim, in_dim);
  bias_ = Vector::Zero(out_dim);
}

Matrix DenseLayer::forward(const Matrix& x) const {
  DPGOMI_CHECK_ARG(x.rows() == weights_.cols(), "dense input dim mismatch");
  return (weights_ * x).colwise() + bias_;
}

Matrix DenseLayer::backward(const Matrix& x, const Matrix& dy,
                            std::span<double> dparams) const {
  const std::size_t w_count = static_cast<std::size_t>(weights_.size());
  Eigen::Map<Matrix> dw(dparams.data(), weights_.rows(), weights_.cols());
  Eigen::Map<Vector> db(dparams.data() + w_count, bias_.size());
  dw.noalias() += dy * x.transpose();
  db.noalias() += dy.rowwise().sum();
  return weights_.transpose() * dy;
}

std::size_t DenseLayer::param_count() const {
  return static_cast<std::size_t>(weights_.size() + bias_.size());
}

void DenseLayer::write_params(std::span<double> out) const {
  Eigen::Map<Matrix>(out.data(), weights_.rows(), weights_.cols()) = weights_;
  Eigen::Map<Vector>(out.data() + weights_.size(), bias_.size()) = bias_;
}

void DenseLayer::read_params(std::span<const double> in) {
  weights_ = Eigen::Map<const Matrix>(in.data(), weights_.rows(),
                                      weights_.cols());
  bias_ = Eigen::Map<const Vector>(in.data() + weights_.size(), bias_.size());
}

void DenseLayer::init_params(Rng& rng) {
  // Glorot-normal; adequate across the small nets used here.
  const double scale =
      std::sqrt(2.0 / static_cast<double>(weights_.rows() + weights_.cols()));
  for (Eigen::Index j = 0; j < weights_.cols(); ++j)
    for (Eigen::Index i = 0; i < weights_.rows(); ++i)
      weights_(i, j) = scale * rng.gaussian();
  bias_.setZero();
}

int DenseLayer::output_dim(int input_dim) const {
  DPGOMI_CHECK_ARG(input_dim == in_dim(), "dense input dim mismatch");
  return out_dim();
}

json DenseLayer::describe() const {
  return json{{"type", "dense"}, {"in", in_dim()}, {"out", out_dim()}};
}

std::unique_ptr<Layer> DenseLayer::clone() const {
  auto copy = std::make_unique<DenseLayer>(in_dim(), out_dim());
  copy->weights_ = weights_;
  copy->bias_ = bias_;
  return copy;
}

Matrix ActivationLayer::forward(const Matrix& x) const {
  return x.unaryExpr([this](double v) { return act_apply(kind_, v); });
}

Matrix ActivationLayer::backward(const Matrix& x, const Matrix& dy,
                                 std::span<double>) const {
  return dy.cwiseProduct(
      x.unaryExpr([this](double v) { return act_grad(kind_, v); }));
}

json ActivationLayer::describe() const {
  return json{{"type", "act"}, {"kind", act_name(kind_)}};
}

std::unique_ptr<Layer> ActivationLayer::clone() const {
  return std::make_unique<ActivationLayer>(kind_);
}

json IdentityLayer::describe() const { return json{{"type", "identity"}}; }

Net& Net::operator=(const Net& other) {
  layers_.clear();
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
  return *this;
}

Matrix Net::forward(const Matrix& x) const {
  Matrix cur = x;
  for (const auto& layer : layers_) cur = layer->forward(cur);
  return cur;
}

Matrix Net::forward_prefix(const Matrix& x, std::size_t n_layers) const {
  DPGOMI_CHECK_ARG(n_layers <= layers_.size(), "prefix exceeds layer count");
  Matrix cur = x;
  for (std::size_t i = 0; i < n_layers; ++i) cur = layers_[i]->forward(cur);
  return cur;
}

Matrix Net::forward_cached(const Matrix& x, std::vector<Matrix>& cache) const {
  cache.resize(layers_.size());
  Matrix cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cache[i] = cur;
    cur = layers_[i]->forward(cur);
  }
  return cur;
}

Matrix Net::backward(const std::vector<Matrix>& cache, const Matrix& dy,
                     std::span<double> dparams) const {
  DPGOMI_CHECK_ARG(cache.size() == layers_.size(), "stale forward cache");
  DPGOMI_CHECK_ARG(dparams.size() == param_count(), "gradient buffer size");
  // Per-layer slices of the flat gradient buffer, in layer order.
  std::vector<std::size_t> offsets(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i)
    offsets[i + 1] = offsets[i] + layers_[i]->param_count();
  Matrix grad = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    grad = layers_[i]->backward(
        cache[i], grad,
        dparams.subspan(offsets[i], layers_[i]->param_count()));
  }
  return grad;
}

std::size_t Net::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer->param_count();
  return n;
}

Vector Net::get_params() const {
  Vector out(param_count());
  std::size_t off = 0;
  for (const auto& layer : layers_) {
    layer->write_params(std::span<double>(out.data() + off,
                                          layer->param_count()));
    off += layer->param_count();
  }
  return out;
}

void Net::set_params(const Vector& params) {
  DPGOMI_CHECK_ARG(static_cast<std::size_t>(params.size()) == param_count(),
                   "parameter vector size mismatch");
  std::size_t off = 0;
  for (const auto& layer : layers_) {
    layer->read_params(std::span<const double>(params.data() + off,
                                               layer->param_count()));
    off += layer->param_count();
  }
}

void Net::init_params(Rng& rng) {
  for (auto& layer : layers_) layer->init_params(rng);
}

json Net::describe() const {
  json layers = json::array();
  for (const auto& layer : layers_) layers.push_back(layer->describe());
  return json{{"layers", layers}};
}

Net Net::from_description(const json& desc) {
  Net net;
  for (const auto& l : desc.at("layers")) {
    const std::string type = l.at("type").get<std::string>();
    if (type == "dense") {
      net.add(std::make_unique<DenseLayer>(l.at("in").get<int>(),
                                           l.at("out").get<int>()));
    } else if (type == "act") {
      net.add(std::make_unique<ActivationLayer>(
          act_from_name(l.at("kind").get<std::string>())));
    } else if (type == "identity") {
      net.add(std::make_unique<IdentityLayer>());
    } else if (type == "conv2d") {
      net.add(std::make_unique<Conv2dLayer>(ConvGeometry{
          l.at("h").get<int>(), l.at("w").get<int>(), l.at("c_in").get<int>(),
          l.at("c_out").get<int>(), l.at("kernel").get<int>(),
          l.at("stride").get<int>(), l.at("pad").get<int>()}));
    } else if (type == "conv_transpose2d") {
      net.add(std::make_unique<ConvTranspose2dLayer>(
          l.at("h").get<int>(), l.at("w").get<int>(), l.at("c_in").get<int>(),
          l.at("c_out").get<int>(), l.at("kernel").get<int>(),
          l.at("stride").get<int>(), l.at("pad").get<int>()));
    } else {
      throw io_error("unknown layer type in description: " + type);
    }
  }
  return net;
}

std::string Net::checksum() const {
  Sha256 h;
  h.update(describe().dump());
  Vector params = get_params();
  h.update_doubles(std::span<const double>(params.data(),
                                           static_cast<std::size_t>(params.size())));
  return h.hex_digest();
}

Net make_mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
             Act hidden_act, Act out_act) {
  Net net;
  int cur = in_dim;
  for (int h : hidden) {
    net.add(std::make_unique<DenseLayer>(cur, h));
    net.add(std::make_unique<ActivationLayer>(hidden_act));
    cur = h;
  }
  net.add(std::make_unique<DenseLayer>(cur, out_dim));
  if (out_act != Act::identity)
    net.add(std::make_unique<ActivationLayer>(out_act));
  return net;
}

AdamOptimizer::AdamOptimizer(std::size_t n, double lr, double beta1,
                             double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  m_ = Vector::Zero(static_cast<Eigen::Index>(n));
  v_ = Vector::Zero(static_cast<Eigen::Index>(n));
}

void AdamOptimizer::step(Vector& params, const Vector& grad) {
  DPGOMI_CHECK_ARG(params.size() == m_.size() && grad.size() == m_.size(),
                   "optimizer size mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params -= (lr_ / bc1) * m_.cwiseQuotient(
                              ((v_ / bc2).cwiseSqrt().array() + epsilon_)
                                  .matrix());
}

void AdamOptimizer::reset() {
  t_ = 0;
  m_.setZero();
  v_.setZero();
}

void clip_params(Net& net, double c) {
  DPGOMI_CHECK_ARG(c > 0.0, "clip bound must be positive");
  Vector params = net.get_params();
  params = params.cwiseMax(-c).cwiseMin(c);
  net.set_params(params);
}

}  // namespace dpgomi
