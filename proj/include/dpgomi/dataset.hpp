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

#ifndef DPGOMI_DATASET_HPP
#define DPGOMI_DATASET_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace dpgomi {

// Labeled image set. Pixels live in [0, 1]; one column per example, each
// column the row-major flattening of an (h, w, c) image.
struct LabeledDataset {
  Eigen::MatrixXd images;   // (h*w*c) x n
  std::vector<int> labels;  // class ids in [0, num_classes)
  int height = 0;
  int width = 0;
  int channels = 0;
  int num_classes = 0;
  std::string name;

  int n() const { return static_cast<int>(images.cols()); }
  int pixel_dim() const { return height * width * channels; }
  std::set<int> class_universe() const;
  LabeledDataset select(const std::vector<int>& indices) const;
  void validate() const;
};

// Read-access counter used by the pipeline's data-access audit. Stages read
// examples through a guard so per-stage read counts can be asserted.
class DatasetReadGuard {
 public:
  DatasetReadGuard(const LabeledDataset& data, std::string dataset_tag)
      : data_(data), tag_(std::move(dataset_tag)) {}

  const LabeledDataset& read(const std::string& stage) const {
    if (on_read_) on_read_(tag_, stage, data_.n());
    return data_;
  }
  const std::string& tag() const { return tag_; }

  using ReadHook =
      std::function<void(const std::string& tag, const std::string& stage,
                         int n_examples)>;
  void set_hook(ReadHook hook) { on_read_ = std::move(hook); }

 private:
  const LabeledDataset& data_;
  std::string tag_;
  ReadHook on_read_;
};

struct ToyMixtureConfig {
  int n = 2000;
  // One blob per class, centers in [0, 1]^2.
  std::vector<std::array<double, 2>> centers = {
      {0.2, 0.2}, {0.8, 0.8}, {0.35, 0.65}, {0.65, 0.35}};
  double stddev = 0.05;
  std::uint64_t seed = 0;
  std::string name = "toy2d";
};

// 2-D Gaussian-mixture dataset rendered as 1x1x2 "images"; class = component.
LabeledDataset make_toy_mixture(const ToyMixtureConfig& config);

// Binary image-archive format used for datasets and synthetic releases.
// Layout: magic "DPGIMG1\n", u32 n/h/w/c, u8 has_labels, u8 dtype
// (0 = float32, 1 = uint8), pixel payload, then n int32 labels if present.
void save_image_archive(const std::string& path, const Eigen::MatrixXd& images01,
                        int h, int w, int c,
                        const std::vector<int>* labels = nullptr,
                        bool quantize_u8 = false);

struct ImageArchive {
  Eigen::MatrixXd images;  // values in [0, 1]
  std::vector<int> labels;  // empty when the archive is unlabeled
  int height = 0, width = 0, channels = 0;
};

ImageArchive load_image_archive(const std::string& path);

LabeledDataset load_labeled_dataset(const std::string& path,
                                    const std::string& name);

}  // namespace dpgomi

#endif  // DPGOMI_DATASET_HPP
