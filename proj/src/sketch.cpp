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

#include "confsketch/sketch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "confsketch/error.hpp"

namespace confsketch {

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'M', 'S', 'K'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kMaxInlineDepth = 16;

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), bytes.size())) throw InputError("sketch image is truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

std::string_view to_string(SketchVariant variant) noexcept {
  switch (variant) {
    case SketchVariant::kCountMin:
      return "cms";
    case SketchVariant::kConservative:
      return "cms_cu";
    case SketchVariant::kConservativeSingleRow:
      return "cms_cu_single";
  }
  return "unknown";
}

SketchVariant parse_variant(std::string_view name) {
  if (name == "cms") return SketchVariant::kCountMin;
  if (name == "cms_cu") return SketchVariant::kConservative;
  if (name == "cms_cu_single") return SketchVariant::kConservativeSingleRow;
  throw ConfigError("unknown sketch variant '" + std::string(name) + "'");
}

CountMinSketch::CountMinSketch(HashFamily family, SketchVariant variant)
    : family_(std::move(family)),
      variant_(variant),
      counters_(family_.depth() * family_.width(), 0) {}

void CountMinSketch::check_writable() const {
  if (frozen_) throw UsageError("sketch is frozen");
}

void CountMinSketch::update(std::string_view item) {
  std::array<std::size_t, kMaxInlineDepth> inline_buckets{};
  std::vector<std::size_t> heap_buckets;
  std::span<std::size_t> buckets;
  if (depth() <= kMaxInlineDepth) {
    buckets = std::span(inline_buckets).first(depth());
  } else {
    heap_buckets.resize(depth());
    buckets = heap_buckets;
  }
  family_.buckets(item, buckets);
  update_at(buckets);
}

void CountMinSketch::update_cms(std::string_view item) {
  if (variant_ != SketchVariant::kCountMin) {
    throw UsageError("update_cms called on a conservative-update sketch");
  }
  update(item);
}

void CountMinSketch::update_cms_cu(std::string_view item) {
  if (variant_ == SketchVariant::kCountMin) {
    throw UsageError("update_cms_cu called on a plain count-min sketch");
  }
  update(item);
}

void CountMinSketch::update_at(std::span<const std::size_t> buckets) {
  check_writable();
  if (buckets.size() != depth()) throw UsageError("bucket list does not match sketch depth");
  apply(buckets);
}

void CountMinSketch::apply(std::span<const std::size_t> buckets) {
  const std::size_t w = width();
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  switch (variant_) {
    case SketchVariant::kCountMin:
      for (std::size_t j = 0; j < buckets.size(); ++j) {
        if (counters_[j * w + buckets[j]] == kMax) throw UsageError("sketch counter overflow");
      }
      for (std::size_t j = 0; j < buckets.size(); ++j) ++counters_[j * w + buckets[j]];
      break;
    case SketchVariant::kConservative: {
      const std::uint64_t low = query_upper_at(buckets);
      if (low == kMax) throw UsageError("sketch counter overflow");
      for (std::size_t j = 0; j < buckets.size(); ++j) {
        auto& c = counters_[j * w + buckets[j]];
        c = std::max(c, low + 1);
      }
      break;
    }
    case SketchVariant::kConservativeSingleRow: {
      std::size_t best = 0;
      for (std::size_t j = 1; j < buckets.size(); ++j) {
        if (counters_[j * w + buckets[j]] < counters_[best * w + buckets[best]]) best = j;
      }
      auto& c = counters_[best * w + buckets[best]];
      if (c == kMax) throw UsageError("sketch counter overflow");
      ++c;
      break;
    }
  }
  ++items_sketched_;
}

std::uint64_t CountMinSketch::query_upper(std::string_view item) const {
  const std::uint64_t digest = digest64(item);
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (std::size_t j = 0; j < depth(); ++j) {
    best = std::min(best, counters_[j * width() + family_.bucket_of_digest(j, digest)]);
  }
  return best;
}

std::uint64_t CountMinSketch::query_upper_at(std::span<const std::size_t> buckets) const {
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (std::size_t j = 0; j < buckets.size(); ++j) {
    best = std::min(best, counters_[j * width() + buckets[j]]);
  }
  return best;
}

void CountMinSketch::serialize(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kFormatVersion);
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(variant_));
  for (int i = 0; i < 3; ++i) write_le<std::uint8_t>(out, 0);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(depth()));
  write_le<std::uint64_t>(out, width());
  write_le<std::uint64_t>(out, items_sketched_);
  write_le<std::uint64_t>(out, family_.master_seed());
  for (const auto& s : family_.seeds()) {
    write_le<std::uint64_t>(out, s.a);
    write_le<std::uint64_t>(out, s.b);
  }
  for (const auto c : counters_) write_le<std::uint64_t>(out, c);
  if (!out) throw InputError("failed to write sketch image");
}

CountMinSketch CountMinSketch::deserialize(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw InputError("not a sketch image (bad magic)");
  }
  if (read_le<std::uint32_t>(in) != kFormatVersion) throw InputError("unsupported sketch version");
  const auto raw_variant = read_le<std::uint8_t>(in);
  if (raw_variant > static_cast<std::uint8_t>(SketchVariant::kConservativeSingleRow)) {
    throw InputError("unknown sketch variant in image");
  }
  for (int i = 0; i < 3; ++i) read_le<std::uint8_t>(in);
  const auto d = read_le<std::uint32_t>(in);
  const auto w = read_le<std::uint64_t>(in);
  const auto m = read_le<std::uint64_t>(in);
  const auto master_seed = read_le<std::uint64_t>(in);
  if (d == 0 || w == 0) throw InputError("sketch image has zero dimension");
  std::vector<HashSeed> seeds(d);
  for (auto& s : seeds) {
    s.a = read_le<std::uint64_t>(in);
    s.b = read_le<std::uint64_t>(in);
  }
  CountMinSketch sketch([&] {
    try {
      return HashFamily(static_cast<std::size_t>(w), std::move(seeds), master_seed);
    } catch (const ConfigError& e) {
      throw InputError(std::string("sketch image: ") + e.what());
    }
  }(), static_cast<SketchVariant>(raw_variant));
  for (auto& c : sketch.counters_) c = read_le<std::uint64_t>(in);
  sketch.items_sketched_ = m;
  sketch.frozen_ = true;
  return sketch;
}

std::uint64_t classical_slack(std::uint64_t stream_length, std::size_t width) {
  if (width == 0) throw ConfigError("sketch width must be at least 1");
  const long double ratio = std::numbers::e_v<long double> * static_cast<long double>(stream_length) /
                            static_cast<long double>(width);
  return static_cast<std::uint64_t>(std::ceil(ratio));
}

std::uint64_t classical_lower_bound(std::uint64_t upper, std::uint64_t stream_length,
                                    std::size_t width) {
  const std::uint64_t slack = classical_slack(stream_length, width);
  return upper > slack ? upper - slack : 0;
}

}  // namespace confsketch
