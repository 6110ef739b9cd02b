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

#include "dpgomi/rng.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>

#include "dpgomi/error.hpp"
#include "dpgomi/hash.hpp"

namespace dpgomi {

namespace {

std::array<unsigned char, 32> derive_key(std::span<const unsigned char> parent,
                                         std::uint64_t seed_or_index,
                                         std::string_view label) {
  Sha256 h;
  h.update(parent.data(), parent.size());
  h.update_u64(seed_or_index);
  h.update(label);
  std::string hex = h.hex_digest();
  std::array<unsigned char, 32> key{};
  for (int i = 0; i < 32; ++i) {
    auto nib = [](char c) -> unsigned {
      return c <= '9' ? static_cast<unsigned>(c - '0')
                      : static_cast<unsigned>(c - 'a' + 10);
    };
    key[i] = static_cast<unsigned char>((nib(hex[2 * i]) << 4) |
                                        nib(hex[2 * i + 1]));
  }
  return key;
}

}  // namespace

Rng::Rng(const std::array<unsigned char, 32>& key) : key_(key) {
  init_stream();
}

Rng::Rng(std::uint64_t seed) : Rng(seed, "root", 0) {}

Rng::Rng(std::uint64_t seed, std::string_view label, std::uint64_t index)
    : Rng(derive_key(std::span<const unsigned char>{},
                     seed ^ (index * 0x9e3779b97f4a7c15ULL), label)) {}

Rng Rng::derive(std::string_view label, std::uint64_t index) const {
  return Rng(derive_key(std::span<const unsigned char>(key_), index, label));
}

void Rng::init_stream() {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  // 16-byte IV: 4-byte initial block counter followed by a 12-byte nonce,
  // all zero; the keystream is fully determined by the key.
  std::array<unsigned char, 16> iv{};
  if (ctx == nullptr ||
      EVP_EncryptInit_ex(ctx, EVP_chacha20(), nullptr, key_.data(),
                         iv.data()) != 1) {
    throw Error(ErrorCode::kGeneric, "ChaCha20 stream initialization failed");
  }
  ctx_ = ctx;
  pos_ = block_.size();
}

Rng::~Rng() {
  if (ctx_ != nullptr) EVP_CIPHER_CTX_free(static_cast<EVP_CIPHER_CTX*>(ctx_));
}

Rng::Rng(Rng&& other) noexcept
    : key_(other.key_),
      ctx_(other.ctx_),
      block_(other.block_),
      pos_(other.pos_),
      have_spare_(other.have_spare_),
      spare_(other.spare_) {
  other.ctx_ = nullptr;
}

Rng& Rng::operator=(Rng&& other) noexcept {
  if (this != &other) {
    if (ctx_ != nullptr)
      EVP_CIPHER_CTX_free(static_cast<EVP_CIPHER_CTX*>(ctx_));
    key_ = other.key_;
    ctx_ = other.ctx_;
    block_ = other.block_;
    pos_ = other.pos_;
    have_spare_ = other.have_spare_;
    spare_ = other.spare_;
    other.ctx_ = nullptr;
  }
  return *this;
}

void Rng::refill() {
  std::array<unsigned char, 4096> zeros{};
  int out_len = 0;
  EVP_EncryptUpdate(static_cast<EVP_CIPHER_CTX*>(ctx_), block_.data(),
                    &out_len, zeros.data(), static_cast<int>(zeros.size()));
  pos_ = 0;
}

std::uint64_t Rng::next_u64() {
  if (pos_ + 8 > block_.size()) refill();
  std::uint64_t v;
  std::memcpy(&v, block_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the log finite.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  DPGOMI_CHECK_ARG(n > 0, "uniform_int requires n > 0");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

std::vector<double> Rng::gaussians(std::size_t n) {
  std::vector<double> out(n);
  for (auto& x : out) x = gaussian();
  return out;
}

}  // namespace dpgomi
