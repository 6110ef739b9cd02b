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

#ifndef DPGOMI_SYNTHESIS_HPP
#define DPGOMI_SYNTHESIS_HPP

#include <cstdint>

#include "dpgomi/gan.hpp"

namespace dpgomi {

// Unlabeled release set; labels are assigned later by the labeling
// classifier.
struct SyntheticDataset {
  Matrix images01;  // (h*w*c) x n, values in [0, 1]
  int height = 0, width = 0, channels = 0;

  int n() const { return static_cast<int>(images01.cols()); }
};

// Chained sampling z'' ~ N(0, I_{d''}) -> G_ds -> G_p. Pure post-processing
// of the DP checkpoint: no private data is touched and no privacy budget is
// consumed. Deterministic under the seed; batches draw from per-batch
// substreams.
SyntheticDataset synthesize(const Generator& g_ds, const Generator& g_p,
                            int n, std::uint64_t seed,
                            const std::vector<int>& image_shape);

}  // namespace dpgomi

#endif  // DPGOMI_SYNTHESIS_HPP
