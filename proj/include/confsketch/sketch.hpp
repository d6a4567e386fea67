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
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "confsketch/hashing.hpp"

namespace confsketch {

enum class SketchVariant : std::uint8_t {
  kCountMin = 0,
  // Conservative update: every counter at the item's buckets is raised to
  // max(counter, min + 1). Keeps the deterministic upper bound.
  kConservative = 1,
  // Single-argmin conservative update (lowest row wins ties). Does not
  // guarantee the upper bound; only for fidelity experiments.
  kConservativeSingleRow = 2,
};

std::string_view to_string(SketchVariant variant) noexcept;
// Accepts "cms", "cms_cu" and "cms_cu_single". Throws ConfigError otherwise.
SketchVariant parse_variant(std::string_view name);

// d x w count-min sketch with 64-bit counters.
//
// Single writer while streaming. After freeze() every mutating call throws
// UsageError and the object can be shared by concurrent readers.
class CountMinSketch {
 public:
  CountMinSketch(HashFamily family, SketchVariant variant);

  const HashFamily& family() const noexcept { return family_; }
  SketchVariant variant() const noexcept { return variant_; }
  std::size_t depth() const noexcept { return family_.depth(); }
  std::size_t width() const noexcept { return family_.width(); }
  std::uint64_t items_sketched() const noexcept { return items_sketched_; }
  bool frozen() const noexcept { return frozen_; }

  // Applies the update rule of variant().
  void update(std::string_view item);
  // Variant-checked entry points; throw UsageError on mismatch.
  void update_cms(std::string_view item);
  void update_cms_cu(std::string_view item);

  // Update with explicit bucket indices, one per row. Used to pin hash
  // functions in tests; `buckets.size()` must equal depth().
  void update_at(std::span<const std::size_t> buckets);

  // min_j C[j, h_j(item)].
  std::uint64_t query_upper(std::string_view item) const;
  std::uint64_t query_upper_at(std::span<const std::size_t> buckets) const;

  void freeze() noexcept { frozen_ = true; }

  std::uint64_t counter(std::size_t row, std::size_t column) const noexcept {
    return counters_[row * width() + column];
  }
  std::span<const std::uint64_t> row(std::size_t j) const noexcept {
    return {counters_.data() + j * width(), width()};
  }
  std::span<const std::uint64_t> counters() const noexcept { return counters_; }

  // Flat little-endian layout:
  //   "CMSK" | u32 version | u8 variant | u8[3] zero | u32 d | u64 w |
  //   u64 items_sketched | u64 master_seed | d x (u64 a, u64 b) |
  //   d*w u64 counters, row-major.
  void serialize(std::ostream& out) const;
  // Throws InputError on a truncated or malformed image. The result is frozen.
  static CountMinSketch deserialize(std::istream& in);

 private:
  void check_writable() const;
  void apply(std::span<const std::size_t> buckets);

  HashFamily family_;
  SketchVariant variant_;
  std::vector<std::uint64_t> counters_;
  std::uint64_t items_sketched_ = 0;
  bool frozen_ = false;
};

// Classical lower bound max(0, upper - ceil(e * m / w)). It holds with
// probability 1 - delta over the hash draw when d = ceil(-ln delta), so d = 3
// gives the usual 95% bound.
std::uint64_t classical_lower_bound(std::uint64_t upper, std::uint64_t stream_length,
                                    std::size_t width);

// ceil(e * m / w), the additive slack of the classical bound.
std::uint64_t classical_slack(std::uint64_t stream_length, std::size_t width);

}  // namespace confsketch
