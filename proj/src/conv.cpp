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

#include "dpgomi/conv.hpp"

#include <cmath>

#include "nlohmann/json.hpp"

#include "dpgomi/error.hpp"

namespace dpgomi {

using nlohmann::json;

void ConvGeometry::validate() const {
  DPGOMI_CHECK_ARG(h_in > 0 && w_in > 0 && c_in > 0 && c_out > 0,
                   "conv dims must be positive");
  DPGOMI_CHECK_ARG(kernel >= 1 && stride >= 1 && pad >= 0,
                   "conv kernel/stride/pad invalid");
  DPGOMI_CHECK_ARG((h_in + 2 * pad - kernel) % stride == 0 &&
                       (w_in + 2 * pad - kernel) % stride == 0,
                   "conv geometry does not tile the input");
  DPGOMI_CHECK_ARG(h_out() > 0 && w_out() > 0, "conv output collapses");
}

namespace {

// Column matrix of receptive fields: (kernel^2 * c_in) x (h_out * w_out).
// Input pixels are interleaved (h, w, c) with channel fastest.
Matrix im2col(const ConvGeometry& g, const Vector& image) {
  Matrix col = Matrix::Zero(g.kernel * g.kernel * g.c_in,
                            g.h_out() * g.w_out());
  for (int oy = 0; oy < g.h_out(); ++oy) {
    for (int ox = 0; ox < g.w_out(); ++ox) {
      const int col_idx = oy * g.w_out() + ox;
      int row = 0;
      for (int ky = 0; ky < g.kernel; ++ky) {
        const int iy = oy * g.stride + ky - g.pad;
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int ix = ox * g.stride + kx - g.pad;
          if (iy >= 0 && iy < g.h_in && ix >= 0 && ix < g.w_in) {
            const int base = (iy * g.w_in + ix) * g.c_in;
            for (int ch = 0; ch < g.c_in; ++ch)
              col(row + ch, col_idx) = image[base + ch];
          }
          row += g.c_in;
        }
      }
    }
  }
  return col;
}

// Adjoint of im2col: scatter-adds column entries back into image space.
Vector col2im(const ConvGeometry& g, const Matrix& col) {
  Vector image = Vector::Zero(g.in_dim());
  for (int oy = 0; oy < g.h_out(); ++oy) {
    for (int ox = 0; ox < g.w_out(); ++ox) {
      const int col_idx = oy * g.w_out() + ox;
      int row = 0;
      for (int ky = 0; ky < g.kernel; ++ky) {
        const int iy = oy * g.stride + ky - g.pad;
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int ix = ox * g.stride + kx - g.pad;
          if (iy >= 0 && iy < g.h_in && ix >= 0 && ix < g.w_in) {
            const int base = (iy * g.w_in + ix) * g.c_in;
            for (int ch = 0; ch < g.c_in; ++ch)
              image[base + ch] += col(row + ch, col_idx);
          }
          row += g.c_in;
        }
      }
    }
  }
  return image;
}

// (c_out x positions) activation map to interleaved (h, w, c) flattening.
Vector interleave(const ConvGeometry& g, const Matrix& feat) {
  Vector out(g.out_dim());
  for (int pos = 0; pos < g.h_out() * g.w_out(); ++pos)
    for (int ch = 0; ch < g.c_out; ++ch)
      out[pos * g.c_out + ch] = feat(ch, pos);
  return out;
}

Matrix deinterleave(const ConvGeometry& g, const Vector& image) {
  Matrix feat(g.c_out, g.h_out() * g.w_out());
  for (int pos = 0; pos < g.h_out() * g.w_out(); ++pos)
    for (int ch = 0; ch < g.c_out; ++ch)
      feat(ch, pos) = image[pos * g.c_out + ch];
  return feat;
}

}  // namespace

Conv2dLayer::Conv2dLayer(const ConvGeometry& geom) : geom_(geom) {
  geom_.validate();
  weights_ = Matrix::Zero(geom_.c_out,
                          geom_.kernel * geom_.kernel * geom_.c_in);
  bias_ = Vector::Zero(geom_.c_out);
}

Matrix Conv2dLayer::forward(const Matrix& x) const {
  DPGOMI_CHECK_ARG(x.rows() == geom_.in_dim(), "conv input dim mismatch");
  Matrix y(geom_.out_dim(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Matrix col = im2col(geom_, x.col(j));
    Matrix feat = (weights_ * col).colwise() + bias_;
    y.col(j) = interleave(geom_, feat);
  }
  return y;
}

Matrix Conv2dLayer::backward(const Matrix& x, const Matrix& dy,
                             std::span<double> dparams) const {
  Eigen::Map<Matrix> dw(dparams.data(), weights_.rows(), weights_.cols());
  Eigen::Map<Vector> db(dparams.data() + weights_.size(), bias_.size());
  Matrix dx(geom_.in_dim(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Matrix col = im2col(geom_, x.col(j));
    Matrix dfeat = deinterleave(geom_, dy.col(j));
    dw.noalias() += dfeat * col.transpose();
    db.noalias() += dfeat.rowwise().sum();
    dx.col(j) = col2im(geom_, weights_.transpose() * dfeat);
  }
  return dx;
}

std::size_t Conv2dLayer::param_count() const {
  return static_cast<std::size_t>(weights_.size() + bias_.size());
}

void Conv2dLayer::write_params(std::span<double> out) const {
  Eigen::Map<Matrix>(out.data(), weights_.rows(), weights_.cols()) = weights_;
  Eigen::Map<Vector>(out.data() + weights_.size(), bias_.size()) = bias_;
}

void Conv2dLayer::read_params(std::span<const double> in) {
  weights_ = Eigen::Map<const Matrix>(in.data(), weights_.rows(),
                                      weights_.cols());
  bias_ = Eigen::Map<const Vector>(in.data() + weights_.size(), bias_.size());
}

void Conv2dLayer::init_params(Rng& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(weights_.cols()));
  for (Eigen::Index j = 0; j < weights_.cols(); ++j)
    for (Eigen::Index i = 0; i < weights_.rows(); ++i)
      weights_(i, j) = scale * rng.gaussian();
  bias_.setZero();
}

int Conv2dLayer::output_dim(int input_dim) const {
  DPGOMI_CHECK_ARG(input_dim == geom_.in_dim(), "conv input dim mismatch");
  return geom_.out_dim();
}

json Conv2dLayer::describe() const {
  return json{{"type", "conv2d"},    {"h", geom_.h_in},
              {"w", geom_.w_in},     {"c_in", geom_.c_in},
              {"c_out", geom_.c_out}, {"kernel", geom_.kernel},
              {"stride", geom_.stride}, {"pad", geom_.pad}};
}

std::unique_ptr<Layer> Conv2dLayer::clone() const {
  auto copy = std::make_unique<Conv2dLayer>(geom_);
  copy->weights_ = weights_;
  copy->bias_ = bias_;
  return copy;
}

ConvTranspose2dLayer::ConvTranspose2dLayer(int in_h, int in_w, int c_in,
                                           int c_out, int kernel, int stride,
                                           int pad)
    : in_h_(in_h), in_w_(in_w), c_in_(c_in), c_out_(c_out) {
  // The adjoint conv runs from this layer's output back to its input.
  conv_.h_in = (in_h - 1) * stride - 2 * pad + kernel;
  conv_.w_in = (in_w - 1) * stride - 2 * pad + kernel;
  conv_.c_in = c_out;
  conv_.c_out = c_in;
  conv_.kernel = kernel;
  conv_.stride = stride;
  conv_.pad = pad;
  conv_.validate();
  DPGOMI_CHECK_ARG(conv_.h_out() == in_h && conv_.w_out() == in_w,
                   "transposed conv geometry inconsistent");
  weights_ = Matrix::Zero(c_in_, kernel * kernel * c_out_);
  bias_ = Vector::Zero(c_out_);
}

Matrix ConvTranspose2dLayer::forward(const Matrix& x) const {
  DPGOMI_CHECK_ARG(x.rows() == in_h_ * in_w_ * c_in_,
                   "transposed conv input dim mismatch");
  Matrix y(conv_.in_dim(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    // x as a (c_in x positions) map plays the conv's output role.
    ConvGeometry as_out = conv_;
    Matrix x_feat(c_in_, in_h_ * in_w_);
    for (int pos = 0; pos < in_h_ * in_w_; ++pos)
      for (int ch = 0; ch < c_in_; ++ch)
        x_feat(ch, pos) = x(pos * c_in_ + ch, j);
    Vector img = col2im(as_out, weights_.transpose() * x_feat);
    // Bias per output channel of this layer (= conv input channel).
    for (int pos = 0; pos < conv_.h_in * conv_.w_in; ++pos)
      for (int ch = 0; ch < c_out_; ++ch)
        img[pos * c_out_ + ch] += bias_[ch];
    y.col(j) = img;
  }
  return y;
}

Matrix ConvTranspose2dLayer::backward(const Matrix& x, const Matrix& dy,
                                      std::span<double> dparams) const {
  Eigen::Map<Matrix> dw(dparams.data(), weights_.rows(), weights_.cols());
  Eigen::Map<Vector> db(dparams.data() + weights_.size(), bias_.size());
  Matrix dx(in_h_ * in_w_ * c_in_, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Matrix dcol = im2col(conv_, dy.col(j));
    Matrix x_feat(c_in_, in_h_ * in_w_);
    for (int pos = 0; pos < in_h_ * in_w_; ++pos)
      for (int ch = 0; ch < c_in_; ++ch)
        x_feat(ch, pos) = x(pos * c_in_ + ch, j);
    dw.noalias() += x_feat * dcol.transpose();
    for (int pos = 0; pos < conv_.h_in * conv_.w_in; ++pos)
      for (int ch = 0; ch < c_out_; ++ch)
        db[ch] += dy(pos * c_out_ + ch, j);
    Matrix dx_feat = weights_ * dcol;
    for (int pos = 0; pos < in_h_ * in_w_; ++pos)
      for (int ch = 0; ch < c_in_; ++ch)
        dx(pos * c_in_ + ch, j) = dx_feat(ch, pos);
  }
  return dx;
}

std::size_t ConvTranspose2dLayer::param_count() const {
  return static_cast<std::size_t>(weights_.size() + bias_.size());
}

void ConvTranspose2dLayer::write_params(std::span<double> out) const {
  Eigen::Map<Matrix>(out.data(), weights_.rows(), weights_.cols()) = weights_;
  Eigen::Map<Vector>(out.data() + weights_.size(), bias_.size()) = bias_;
}

void ConvTranspose2dLayer::read_params(std::span<const double> in) {
  weights_ = Eigen::Map<const Matrix>(in.data(), weights_.rows(),
                                      weights_.cols());
  bias_ = Eigen::Map<const Vector>(in.data() + weights_.size(), bias_.size());
}

void ConvTranspose2dLayer::init_params(Rng& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(weights_.cols()));
  for (Eigen::Index j = 0; j < weights_.cols(); ++j)
    for (Eigen::Index i = 0; i < weights_.rows(); ++i)
      weights_(i, j) = scale * rng.gaussian();
  bias_.setZero();
}

int ConvTranspose2dLayer::output_dim(int input_dim) const {
  DPGOMI_CHECK_ARG(input_dim == in_h_ * in_w_ * c_in_,
                   "transposed conv input dim mismatch");
  return conv_.in_dim();
}

json ConvTranspose2dLayer::describe() const {
  return json{{"type", "conv_transpose2d"},
              {"h", in_h_},
              {"w", in_w_},
              {"c_in", c_in_},
              {"c_out", c_out_},
              {"kernel", conv_.kernel},
              {"stride", conv_.stride},
              {"pad", conv_.pad}};
}

std::unique_ptr<Layer> ConvTranspose2dLayer::clone() const {
  auto copy = std::make_unique<ConvTranspose2dLayer>(
      in_h_, in_w_, c_in_, c_out_, conv_.kernel, conv_.stride, conv_.pad);
  copy->weights_ = weights_;
  copy->bias_ = bias_;
  return copy;
}

Generator make_dcgan32_generator(int latent_dim, int channels, int base_width,
                                 Rng& rng) {
  DPGOMI_CHECK_ARG(base_width >= 1, "base width must be positive");
  const int b = base_width;
  Generator gen;
  gen.net.add(std::make_unique<DenseLayer>(latent_dim, 4 * 4 * 4 * b));
  gen.net.add(std::make_unique<ActivationLayer>(Act::relu));
  gen.net.add(
      std::make_unique<ConvTranspose2dLayer>(4, 4, 4 * b, 2 * b, 4, 2, 1));
  gen.net.add(std::make_unique<ActivationLayer>(Act::relu));
  gen.net.add(
      std::make_unique<ConvTranspose2dLayer>(8, 8, 2 * b, b, 4, 2, 1));
  gen.net.add(std::make_unique<ActivationLayer>(Act::relu));
  gen.net.add(
      std::make_unique<ConvTranspose2dLayer>(16, 16, b, channels, 4, 2, 1));
  gen.net.add(std::make_unique<ActivationLayer>(Act::tanh));
  gen.net.init_params(rng);
  gen.latent_dim = latent_dim;
  gen.output_shape = {32, 32, channels};
  gen.arch_id = "dcgan32-gen";
  return gen;
}

Discriminator make_dcgan32_discriminator(int channels, int base_width,
                                         DiscMode mode, Rng& rng) {
  const int b = base_width;
  Discriminator disc;
  disc.net.add(std::make_unique<Conv2dLayer>(
      ConvGeometry{32, 32, channels, b, 4, 2, 1}));
  disc.net.add(std::make_unique<ActivationLayer>(Act::leaky_relu));
  disc.net.add(std::make_unique<Conv2dLayer>(
      ConvGeometry{16, 16, b, 2 * b, 4, 2, 1}));
  disc.net.add(std::make_unique<ActivationLayer>(Act::leaky_relu));
  disc.net.add(std::make_unique<Conv2dLayer>(
      ConvGeometry{8, 8, 2 * b, 4 * b, 4, 2, 1}));
  disc.net.add(std::make_unique<ActivationLayer>(Act::leaky_relu));
  disc.net.add(std::make_unique<DenseLayer>(4 * 4 * 4 * b, 1));
  if (mode == DiscMode::vanilla)
    disc.net.add(std::make_unique<ActivationLayer>(Act::sigmoid));
  disc.net.init_params(rng);
  disc.input_shape = {32, 32, channels};
  disc.mode = mode;
  disc.arch_id = "dcgan32-critic";
  return disc;
}

}  // namespace dpgomi
