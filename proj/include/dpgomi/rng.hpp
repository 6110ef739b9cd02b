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

#ifndef DPGOMI_RNG_HPP
#define DPGOMI_RNG_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dpgomi {

// Deterministic random stream backed by a ChaCha20 keystream. One seed fans
// out into independent substreams via derive(label, index), so every
// component of a run (batch selection, init, DP noise) owns its own stream
// and replays byte-identically under the same seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);
  ~Rng();

  Rng(Rng&& other) noexcept;
  Rng& operator=(Rng&& other) noexcept;
  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;

  // Child stream keyed by (this stream's key, label, index).
  Rng derive(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();
  // Standard normal via Box-Muller.
  double gaussian();
  // Uniform integer on [0, n), unbiased. n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  std::vector<double> gaussians(std::size_t n);

  // In-place Fisher-Yates; identical order across platforms for a given
  // stream state.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  explicit Rng(const std::array<unsigned char, 32>& key);
  void init_stream();
  void refill();

  std::array<unsigned char, 32> key_{};
  void* ctx_ = nullptr;
  std::array<unsigned char, 4096> block_{};
  std::size_t pos_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpgomi

#endif  // DPGOMI_RNG_HPP
