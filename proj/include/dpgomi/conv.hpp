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

#ifndef DPGOMI_CONV_HPP
#define DPGOMI_CONV_HPP

#include "dpgomi/gan.hpp"
#include "dpgomi/nn.hpp"

namespace dpgomi {

// Spatial geometry of a strided convolution. Images are the row-major
// flattening of (h, w, c) with the channel fastest, matching the dataset
// layout.
struct ConvGeometry {
  int h_in = 0, w_in = 0, c_in = 0;
  int c_out = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 0;

  int h_out() const { return (h_in + 2 * pad - kernel) / stride + 1; }
  int w_out() const { return (w_in + 2 * pad - kernel) / stride + 1; }
  int in_dim() const { return h_in * w_in * c_in; }
  int out_dim() const { return h_out() * w_out() * c_out; }
  void validate() const;
};

class Conv2dLayer final : public Layer {
 public:
  explicit Conv2dLayer(const ConvGeometry& geom);

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

 private:
  ConvGeometry geom_;
  Matrix weights_;  // c_out x (kernel^2 * c_in)
  Vector bias_;     // c_out
};

// Fractionally-strided (transposed) convolution: the adjoint of a Conv2d
// whose forward direction maps this layer's output back to its input.
// geom describes that conv direction: geom.h_in/w_in/c_in is THIS layer's
// output and geom.c_out this layer's input channel count.
class ConvTranspose2dLayer final : public Layer {
 public:
  // in_h/in_w/c_in describe this layer's input; the output spatial size is
  // (in_h - 1) * stride - 2 * pad + kernel.
  ConvTranspose2dLayer(int in_h, int in_w, int c_in, int c_out, int kernel,
                       int stride, int pad);

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

  int out_h() const { return conv_.h_in; }
  int out_w() const { return conv_.w_in; }

 private:
  ConvGeometry conv_;  // the adjoint conv: output -> input
  int in_h_, in_w_, c_in_, c_out_;
  Matrix weights_;  // c_in x (kernel^2 * c_out), conv-direction layout
  Vector bias_;     // c_out (applied on this layer's output)
};

// DCGAN-style 32x32 pair. Generator: dense projection to 4x4x(4 base) then
// three stride-2 transposed convolutions to (32, 32, channels) under tanh.
// Critic: three stride-2 convolutions and a dense head.
Generator make_dcgan32_generator(int latent_dim, int channels, int base_width,
                                 Rng& rng);
Discriminator make_dcgan32_discriminator(int channels, int base_width,
                                         DiscMode mode, Rng& rng);

}  // namespace dpgomi

#endif  // DPGOMI_CONV_HPP
