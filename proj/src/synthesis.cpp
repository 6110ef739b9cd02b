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

#include "dpgomi/synthesis.hpp"

#include <algorithm>

#include "dpgomi/error.hpp"

namespace dpgomi {

SyntheticDataset synthesize(const Generator& g_ds, const Generator& g_p,
                            int n, std::uint64_t seed,
                            const std::vector<int>& image_shape) {
  DPGOMI_CHECK_ARG(n >= 0, "sample count must be nonnegative");
  DPGOMI_CHECK_ARG(g_ds.output_dim() == g_p.latent_dim,
                   "latent generator output dim does not match the public "
                   "generator latent dim");
  DPGOMI_CHECK_ARG(image_shape.size() == 3, "image shape must be (h, w, c)");

  SyntheticDataset out;
  out.height = image_shape[0];
  out.width = image_shape[1];
  out.channels = image_shape[2];
  const int dim = out.height * out.width * out.channels;
  DPGOMI_CHECK_ARG(g_p.output_dim() == dim,
                   "public generator output does not match the image shape");
  out.images01.resize(dim, n);

  constexpr int kBatch = 256;
  LatentPrior prior{g_ds.latent_dim};
  Rng base(seed, "synthesize");
  int done = 0;
  for (int batch_idx = 0; done < n; ++batch_idx) {
    const int count = std::min(kBatch, n - done);
    Rng rng = base.derive("batch", static_cast<std::uint64_t>(batch_idx));
    Matrix z = sample_prior(prior, count, rng);
    Matrix imgs = g_p.generate(g_ds.generate(z));
    // Back to [0, 1] pixel range.
    out.images01.middleCols(done, count) =
        ((imgs.array() + 1.0) * 0.5).cwiseMin(1.0).cwiseMax(0.0);
    done += count;
  }
  return out;
}

}  // namespace dpgomi
