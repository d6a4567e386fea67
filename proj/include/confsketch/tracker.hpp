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
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace confsketch {

class CountMinSketch;

// Exact counts for the warm-up prefix of a stream and, for items seen during
// warm-up, exact counts over the sketched remainder.
//
// Lifecycle: warmup_ingest() for the first m0 items, close_warmup(), then
// supervised_ingest() for every item that is also fed to the sketch, then
// freeze(). Memory is one entry per distinct warm-up item plus one 32-bit id
// per warm-up position (needed to split pairs by stream order).
class ExactTracker {
 public:
  struct Entry {
    std::string item;
    std::uint64_t warmup = 0;
    std::uint64_t supervised = 0;
  };

  void warmup_ingest(std::string_view item);
  void close_warmup() noexcept;
  void supervised_ingest(std::string_view item);
  void freeze() noexcept;

  bool warmup_closed() const noexcept { return phase_ != Phase::kWarmup; }
  bool frozen() const noexcept { return phase_ == Phase::kFrozen; }

  // f_wu(item) and f_sv(item); zero for items never seen during warm-up.
  std::uint64_t warmup_count(std::string_view item) const;
  std::uint64_t supervised_count(std::string_view item) const;

  std::uint64_t warmup_length() const noexcept { return positions_.size(); }
  std::uint64_t stream_length() const noexcept { return positions_.size() + supervised_seen_; }
  std::size_t distinct_items() const noexcept { return entries_.size(); }

  // Entries in order of first appearance.
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  // Entry index of every warm-up position, in stream order.
  const std::vector<std::uint32_t>& positions() const noexcept { return positions_; }

  // Line-oriented text: a header, then `item TAB f_wu TAB f_sv` per distinct
  // item, then the positional order. See docs in README.
  void serialize(std::ostream& out) const;
  // The result is frozen. Throws InputError on malformed input.
  static ExactTracker deserialize(std::istream& in);

 private:
  enum class Phase { kWarmup, kSupervised, kFrozen };

  const Entry* find(std::string_view item) const;

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::uint32_t> positions_;
  std::uint64_t supervised_seen_ = 0;
  Phase phase_ = Phase::kWarmup;
};

// One supervised example: the frozen sketch's upper bound for a warm-up item
// and that item's exact count in the sketched part of the stream.
struct CalibrationPair {
  std::string item;
  std::uint64_t feature = 0;
  std::uint64_t label = 0;
  std::size_t position = 0;  // 0-based warm-up stream position
};

struct CalibrationSplit {
  std::vector<CalibrationPair> training;
  std::vector<CalibrationPair> calibration;
};

// One pair per warm-up position (repeated items yield repeated pairs). The
// first floor(train_fraction * m0) positions go to training.
//
// Throws UsageError if the sketch is not frozen, ConfigError if
// train_fraction is outside [0, 1) or the calibration split is empty.
CalibrationSplit build_calibration_set(const ExactTracker& tracker, const CountMinSketch& sketch,
                                       double train_fraction);

}  // namespace confsketch
