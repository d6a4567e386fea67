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

#include "confsketch/tracker.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "confsketch/error.hpp"
#include "confsketch/sketch.hpp"

namespace confsketch {

namespace {

constexpr std::string_view kHeader = "#confsketch-tracker v1";

std::uint64_t parse_u64(std::string_view text, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(std::string("tracker: bad ") + what + " '" + std::string(text) + "'");
  }
  return v;
}

std::string_view expect_field(const std::string& line, std::string_view key) {
  const std::string prefix = "#" + std::string(key) + "\t";
  if (line.rfind(prefix, 0) != 0) throw InputError("tracker: expected #" + std::string(key));
  return std::string_view(line).substr(prefix.size());
}

}  // namespace

void ExactTracker::warmup_ingest(std::string_view item) {
  if (phase_ != Phase::kWarmup) throw UsageError("warm-up phase is closed");
  if (positions_.size() == std::numeric_limits<std::uint32_t>::max()) {
    throw UsageError("warm-up too long");
  }
  std::string key(item);
  auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(entries_.size()));
  if (inserted) entries_.push_back(Entry{std::move(key), 0, 0});
  ++entries_[it->second].warmup;
  positions_.push_back(it->second);
}

void ExactTracker::close_warmup() noexcept {
  if (phase_ == Phase::kWarmup) phase_ = Phase::kSupervised;
}

void ExactTracker::supervised_ingest(std::string_view item) {
  if (phase_ != Phase::kSupervised) {
    throw UsageError(phase_ == Phase::kWarmup ? "warm-up phase is still open"
                                              : "tracker is frozen");
  }
  ++supervised_seen_;
  if (auto it = index_.find(std::string(item)); it != index_.end()) {
    ++entries_[it->second].supervised;
  }
}

void ExactTracker::freeze() noexcept { phase_ = Phase::kFrozen; }

const ExactTracker::Entry* ExactTracker::find(std::string_view item) const {
  auto it = index_.find(std::string(item));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::uint64_t ExactTracker::warmup_count(std::string_view item) const {
  const Entry* e = find(item);
  return e ? e->warmup : 0;
}

std::uint64_t ExactTracker::supervised_count(std::string_view item) const {
  const Entry* e = find(item);
  return e ? e->supervised : 0;
}

void ExactTracker::serialize(std::ostream& out) const {
  out << kHeader << '\n';
  out << "#m0\t" << warmup_length() << '\n';
  out << "#m\t" << stream_length() << '\n';
  out << "#distinct\t" << entries_.size() << '\n';
  for (const auto& e : entries_) {
    if (e.item.find('\n') != std::string::npos) {
      throw InputError("tracker: items may not contain newlines");
    }
    out << e.item << '\t' << e.warmup << '\t' << e.supervised << '\n';
  }
  out << "#order\t";
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    if (i) out << ' ';
    out << positions_[i];
  }
  out << '\n';
  if (!out) throw InputError("failed to write tracker");
}

ExactTracker ExactTracker::deserialize(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw InputError("tracker: bad header");
  auto next = [&](std::string_view key) {
    if (!std::getline(in, line)) throw InputError("tracker: truncated");
    return parse_u64(expect_field(line, key), key.data());
  };
  const std::uint64_t m0 = next("m0");
  const std::uint64_t m = next("m");
  const std::uint64_t distinct = next("distinct");
  if (m < m0) throw InputError("tracker: m < m0");

  ExactTracker t;
  t.entries_.reserve(distinct);
  std::uint64_t warm_total = 0;
  for (std::uint64_t i = 0; i < distinct; ++i) {
    if (!std::getline(in, line)) throw InputError("tracker: truncated entry list");
    const auto second = line.rfind('\t');
    const auto first = second == std::string::npos || second == 0
                           ? std::string::npos
                           : line.rfind('\t', second - 1);
    if (first == std::string::npos) throw InputError("tracker: malformed entry line");
    Entry e;
    e.item = line.substr(0, first);
    e.warmup = parse_u64(std::string_view(line).substr(first + 1, second - first - 1), "f_wu");
    e.supervised = parse_u64(std::string_view(line).substr(second + 1), "f_sv");
    if (e.warmup == 0) throw InputError("tracker: entry with zero warm-up count");
    warm_total += e.warmup;
    if (!t.index_.try_emplace(e.item, static_cast<std::uint32_t>(t.entries_.size())).second) {
      throw InputError("tracker: duplicate item '" + e.item + "'");
    }
    t.entries_.push_back(std::move(e));
  }
  if (!std::getline(in, line)) throw InputError("tracker: missing #order");
  std::string_view order = expect_field(line, "order");
  t.positions_.reserve(m0);
  std::vector<std::uint64_t> seen(distinct, 0);
  while (!order.empty()) {
    const auto space = order.find(' ');
    const auto id = parse_u64(order.substr(0, space), "position id");
    if (id >= distinct) throw InputError("tracker: position id out of range");
    ++seen[id];
    t.positions_.push_back(static_cast<std::uint32_t>(id));
    order = space == std::string_view::npos ? std::string_view{} : order.substr(space + 1);
  }
  if (t.positions_.size() != m0 || warm_total != m0) {
    throw InputError("tracker: warm-up counts do not sum to m0");
  }
  for (std::uint64_t i = 0; i < distinct; ++i) {
    if (seen[i] != t.entries_[i].warmup) throw InputError("tracker: order disagrees with counts");
  }
  t.supervised_seen_ = m - m0;
  t.phase_ = Phase::kFrozen;
  return t;
}

CalibrationSplit build_calibration_set(const ExactTracker& tracker, const CountMinSketch& sketch,
                                       double train_fraction) {
  if (!sketch.frozen()) throw UsageError("calibration requires a frozen sketch");
  if (!(train_fraction >= 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in [0, 1)");
  }
  const auto& positions = tracker.positions();
  const auto train_count =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(positions.size())));
  if (train_count >= positions.size()) throw ConfigError("calibration split is empty");

  // One sketch lookup per distinct item.
  std::vector<std::uint64_t> features(tracker.entries().size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    features[i] = sketch.query_upper(tracker.entries()[i].item);
  }

  CalibrationSplit split;
  split.training.reserve(train_count);
  split.calibration.reserve(positions.size() - train_count);
  for (std::size_t pos = 0; pos < positions.size(); ++pos) {
    const auto& entry = tracker.entries()[positions[pos]];
    CalibrationPair pair{entry.item, features[positions[pos]], entry.supervised, pos};
    (pos < train_count ? split.training : split.calibration).push_back(std::move(pair));
  }
  return split;
}

}  // namespace confsketch
