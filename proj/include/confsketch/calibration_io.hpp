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

#include <iosfwd>
#include <optional>

#include "confsketch/conformal.hpp"

namespace confsketch {

// Everything the query step needs after calibration.
struct CalibrationArtifact {
  double alpha = 0.05;  // nominal level of the reported interval
  FrequencyPartition partition = FrequencyPartition::single(0);
  NestedRule lower_rule = NestedRule::fixed_lower(0);
  CalibratedThreshold lower;
  // Present for two-sided (Bonferroni) intervals; both sides at alpha / 2.
  std::optional<CalibratedThreshold> upper;

  bool two_sided() const noexcept { return upper.has_value(); }
  ConfidenceInterval interval(std::uint64_t feature, std::uint64_t warmup_offset) const;
};

// JSON document with the level, partition edges, per-bin n and threshold,
// q_star and, for the adaptive rule, the residual quantile table.
void write_calibration(std::ostream& out, const CalibrationArtifact& artifact);
// Throws InputError on malformed documents.
CalibrationArtifact read_calibration(std::istream& in);

}  // namespace confsketch
