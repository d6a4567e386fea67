// Copyright 2026 The confsketch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace confsketch {

// Fixed 64-bit item digest: mix64(FNV-1a-64(bytes)).
std::uint64_t digest64(std::string_view bytes) noexcept;

// Carter-Wegman parameters of one hash row.
struct HashSeed {
  std::uint64_t a = 1;  // in [1, p-1]
  std::uint64_t b = 0;  // in [0, p-1]

  friend bool operator==(const HashSeed&, const HashSeed&) = default;
};

// A family of d pairwise-independent hash functions into w buckets:
//
//   h_j(z) = ((a_j * (digest64(z) mod p) + b_j) mod p) mod w,   p = 2^61 - 1.
//
// The (a_j, b_j) pairs come from SplitMix64(master_seed): each draw takes the
// top 61 bits of one output and rejects values outside the target range
// (a_j first, then b_j, for j = 0..d-1). Immutable after construction.
class HashFamily {
 public:
  static constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;

  // Throws ConfigError when depth or width is zero.
  HashFamily(std::size_t depth, std::size_t width, std::uint64_t master_seed);

  // Rebuilds a family from explicit parameters (deserialization, tests).
  HashFamily(std::size_t width, std::vector<HashSeed> seeds, std::uint64_t master_seed = 0);

  std::size_t depth() const noexcept { return seeds_.size(); }
  std::size_t width() const noexcept { return width_; }
  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::span<const HashSeed> seeds() const noexcept { return seeds_; }

  std::size_t bucket(std::size_t row, std::string_view item) const noexcept {
    return bucket_of_digest(row, digest64(item));
  }

  std::size_t bucket_of_digest(std::size_t row, std::uint64_t digest) const noexcept;

  // Writes h_0(item), ..., h_{d-1}(item) into out (size must be depth()).
  void buckets(std::string_view item, std::span<std::size_t> out) const noexcept;

  friend bool operator==(const HashFamily&, const HashFamily&) = default;

 private:
  std::size_t width_;
  std::vector<HashSeed> seeds_;
  std::uint64_t master_seed_;
};

}  // namespace confsketch
