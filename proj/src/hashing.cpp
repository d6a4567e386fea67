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

#include "confsketch/hashing.hpp"

#include "confsketch/error.hpp"
#include "confsketch/random.hpp"

namespace confsketch {

namespace {

constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;

std::uint64_t draw_field_element(SplitMix64& rng, std::uint64_t lo) {
  for (;;) {
    const std::uint64_t v = rng() >> 3;
    if (v >= lo && v < HashFamily::kPrime) return v;
  }
}

}  // namespace

std::uint64_t digest64(std::string_view bytes) noexcept {
  std::uint64_t h = kFnvOffset;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return mix64(h);
}

HashFamily::HashFamily(std::size_t depth, std::size_t width, std::uint64_t master_seed)
    : width_(width), master_seed_(master_seed) {
  if (depth == 0) throw ConfigError("hash family depth must be at least 1");
  if (width == 0) throw ConfigError("hash family width must be at least 1");
  SplitMix64 rng(master_seed);
  seeds_.reserve(depth);
  for (std::size_t j = 0; j < depth; ++j) {
    HashSeed s;
    s.a = draw_field_element(rng, 1);
    s.b = draw_field_element(rng, 0);
    seeds_.push_back(s);
  }
}

HashFamily::HashFamily(std::size_t width, std::vector<HashSeed> seeds, std::uint64_t master_seed)
    : width_(width), seeds_(std::move(seeds)), master_seed_(master_seed) {
  if (seeds_.empty()) throw ConfigError("hash family depth must be at least 1");
  if (width_ == 0) throw ConfigError("hash family width must be at least 1");
  for (const auto& s : seeds_) {
    if (s.a == 0 || s.a >= kPrime || s.b >= kPrime) {
      throw ConfigError("hash seed outside the Mersenne field");
    }
  }
}

std::size_t HashFamily::bucket_of_digest(std::size_t row, std::uint64_t digest) const noexcept {
  const HashSeed& s = seeds_[row];
  const unsigned __int128 x = digest % kPrime;
  const auto h = static_cast<std::uint64_t>((s.a * x + s.b) % kPrime);
  return static_cast<std::size_t>(h % width_);
}

void HashFamily::buckets(std::string_view item, std::span<std::size_t> out) const noexcept {
  const std::uint64_t digest = digest64(item);
  for (std::size_t j = 0; j < seeds_.size(); ++j) out[j] = bucket_of_digest(j, digest);
}

}  // namespace confsketch
