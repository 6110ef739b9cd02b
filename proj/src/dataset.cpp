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

#include "dpgomi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dpgomi/error.hpp"
#include "dpgomi/rng.hpp"

namespace dpgomi {

namespace {
constexpr char kImageMagic[] = "DPGIMG1\n";

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

std::set<int> LabeledDataset::class_universe() const {
  return std::set<int>(labels.begin(), labels.end());
}

LabeledDataset LabeledDataset::select(const std::vector<int>& indices) const {
  LabeledDataset out;
  out.height = height;
  out.width = width;
  out.channels = channels;
  out.num_classes = num_classes;
  out.name = name;
  out.images.resize(images.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    DPGOMI_CHECK_ARG(indices[i] >= 0 && indices[i] < n(),
                     "example index out of range");
    out.images.col(static_cast<Eigen::Index>(i)) = images.col(indices[i]);
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

void LabeledDataset::validate() const {
  DPGOMI_CHECK_ARG(height > 0 && width > 0 && channels > 0,
                   "image dimensions must be positive");
  DPGOMI_CHECK_ARG(images.rows() == pixel_dim(),
                   "image rows do not match h*w*c");
  DPGOMI_CHECK_ARG(static_cast<int>(labels.size()) == n(),
                   "label count does not match example count");
  DPGOMI_CHECK_ARG(num_classes > 0, "num_classes must be positive");
  for (int y : labels) {
    DPGOMI_CHECK_ARG(y >= 0 && y < num_classes, "label out of [0, K)");
  }
  DPGOMI_CHECK_ARG(images.size() == 0 ||
                       (images.minCoeff() >= 0.0 && images.maxCoeff() <= 1.0),
                   "pixel values must lie in [0, 1]");
}

LabeledDataset make_toy_mixture(const ToyMixtureConfig& config) {
  DPGOMI_CHECK_ARG(config.n > 0, "toy dataset needs n > 0");
  DPGOMI_CHECK_ARG(!config.centers.empty(), "toy dataset needs >= 1 center");
  const int k = static_cast<int>(config.centers.size());
  Rng rng(config.seed, "toy2d");

  LabeledDataset data;
  data.height = 1;
  data.width = 1;
  data.channels = 2;
  data.num_classes = k;
  data.name = config.name;
  data.images.resize(2, config.n);
  data.labels.resize(config.n);
  for (int i = 0; i < config.n; ++i) {
    int cls = i % k;  // balanced classes
    data.labels[i] = cls;
    for (int d = 0; d < 2; ++d) {
      double v = config.centers[cls][d] + config.stddev * rng.gaussian();
      data.images(d, i) = std::clamp(v, 0.0, 1.0);
    }
  }
  return data;
}

void save_image_archive(const std::string& path, const Eigen::MatrixXd& images01,
                        int h, int w, int c, const std::vector<int>* labels,
                        bool quantize_u8) {
  DPGOMI_CHECK_ARG(images01.rows() == static_cast<Eigen::Index>(h) * w * c,
                   "archive rows do not match h*w*c");
  if (labels != nullptr) {
    DPGOMI_CHECK_ARG(static_cast<Eigen::Index>(labels->size()) ==
                         images01.cols(),
                     "label count does not match example count");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open archive for writing: " + path);
  out.write(kImageMagic, 8);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(images01.cols()));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(c));
  write_raw<std::uint8_t>(out, labels != nullptr ? 1 : 0);
  write_raw<std::uint8_t>(out, quantize_u8 ? 1 : 0);
  if (quantize_u8) {
    for (Eigen::Index i = 0; i < images01.cols(); ++i) {
      for (Eigen::Index r = 0; r < images01.rows(); ++r) {
        double v = std::clamp(images01(r, i), 0.0, 1.0);
        write_raw<std::uint8_t>(
            out, static_cast<std::uint8_t>(std::lround(v * 255.0)));
      }
    }
  } else {
    for (Eigen::Index i = 0; i < images01.cols(); ++i) {
      for (Eigen::Index r = 0; r < images01.rows(); ++r) {
        write_raw<float>(out, static_cast<float>(images01(r, i)));
      }
    }
  }
  if (labels != nullptr) {
    for (int y : *labels) write_raw<std::int32_t>(out, y);
  }
  if (!out) throw io_error("write failed: " + path);
}

ImageArchive load_image_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open archive: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kImageMagic, 8) != 0) {
    throw io_error("bad image archive magic: " + path);
  }
  const auto n = read_raw<std::uint32_t>(in);
  const auto h = read_raw<std::uint32_t>(in);
  const auto w = read_raw<std::uint32_t>(in);
  const auto c = read_raw<std::uint32_t>(in);
  const auto has_labels = read_raw<std::uint8_t>(in);
  const auto dtype = read_raw<std::uint8_t>(in);
  DPGOMI_CHECK_ARG(h > 0 && w > 0 && c > 0, "archive dimensions invalid");

  ImageArchive arc;
  arc.height = static_cast<int>(h);
  arc.width = static_cast<int>(w);
  arc.channels = static_cast<int>(c);
  const Eigen::Index dim = static_cast<Eigen::Index>(h) * w * c;
  arc.images.resize(dim, n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < dim; ++r) {
      if (dtype == 1) {
        arc.images(r, i) = read_raw<std::uint8_t>(in) / 255.0;
      } else {
        arc.images(r, i) = read_raw<float>(in);
      }
    }
  }
  if (has_labels != 0) {
    arc.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i)
      arc.labels[i] = read_raw<std::int32_t>(in);
  }
  if (!in) throw io_error("truncated image archive: " + path);
  return arc;
}

LabeledDataset load_labeled_dataset(const std::string& path,
                                    const std::string& name) {
  ImageArchive arc = load_image_archive(path);
  if (arc.labels.empty()) {
    throw io_error("dataset archive has no labels: " + path);
  }
  LabeledDataset data;
  data.images = std::move(arc.images);
  data.labels = std::move(arc.labels);
  data.height = arc.height;
  data.width = arc.width;
  data.channels = arc.channels;
  data.num_classes =
      data.labels.empty()
          ? 0
          : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  data.name = name;
  data.validate();
  return data;
}

}  // namespace dpgomi
