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
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "confsketch/tracker.hpp"

namespace confsketch {

class CountMinSketch;

// max(0, feature - t): the deterministic upper bound shifted down by t.
constexpr std::uint64_t fixed_lower(std::uint64_t feature, std::uint64_t t) noexcept {
  return feature > t ? feature - t : 0;
}

struct ResidualModelOptions {
  // Quantile levels k / levels for k = 1..levels. Index 0 is the zero
  // boundary and index levels + 1 the saturation boundary.
  std::size_t levels = 100;
  // Target number of equal-mass bins over the training features.
  std::size_t feature_bins = 10;
};

// Conditional lower quantiles of the residual (upper bound - label) given the
// upper bound. Training features are cut into equal-mass bins and each bin
// gets its empirical residual CDF. At every residual value the CDFs are made
// non-increasing across bins with weighted pool-adjacent-violators, so larger
// upper bounds get stochastically larger residuals, and the fitted CDFs are
// inverted at the levels.
//
//   quantile(u, 0)          = 0
//   quantile(u, k)          = table[bin(u)][k - 1]   for 1 <= k <= levels
//   quantile(u, t > levels) = grid_max
class ResidualQuantileModel {
 public:
  ResidualQuantileModel() = default;

  // Throws ConfigError on an empty training set or zero levels/bins.
  static ResidualQuantileModel fit(std::span<const CalibrationPair> training,
                                   std::uint64_t grid_max, ResidualModelOptions options = {});

  // Rebuilds a fitted model from its parts. `upper_edges` are inclusive upper
  // feature limits of all bins but the last; `table` is bins x levels.
  static ResidualQuantileModel from_table(std::vector<std::uint64_t> upper_edges,
                                          std::vector<std::uint64_t> table, std::size_t levels,
                                          std::uint64_t grid_max);

  bool fitted() const noexcept { return levels_ > 0; }
  std::size_t levels() const noexcept { return levels_; }
  std::size_t bins() const noexcept { return upper_edges_.size() + 1; }
  std::uint64_t grid_max() const noexcept { return grid_max_; }
  const std::vector<std::uint64_t>& upper_edges() const noexcept { return upper_edges_; }
  const std::vector<std::uint64_t>& table() const noexcept { return table_; }

  std::size_t bin_of(std::uint64_t feature) const noexcept;
  // Throws UsageError when the model is not fitted.
  std::uint64_t quantile(std::uint64_t feature, std::uint64_t t) const;

 private:
  std::vector<std::uint64_t> upper_edges_;
  std::vector<std::uint64_t> table_;
  std::size_t levels_ = 0;
  std::uint64_t grid_max_ = 0;
};

// max(0, feature - q_t(feature)).
std::uint64_t adaptive_lower(const ResidualQuantileModel& model, std::uint64_t feature,
                             std::uint64_t t);

enum class RuleKind { kFixedLower, kAdaptiveLower, kFixedUpper };

std::string_view to_string(RuleKind kind) noexcept;
RuleKind parse_rule_kind(std::string_view name);

// A nested family of candidate intervals [lower(u; t), upper(u; t)] indexed
// by t in {0, ..., grid_max}. Larger t never shrinks the interval and t =
// grid_max covers every label in [0, u].
//
//   kFixedLower     [max(0, u - t),          u]
//   kAdaptiveLower  [max(0, u - q_t(u)),     u]
//   kFixedUpper     [0,             min(t, u)]
class NestedRule {
 public:
  static NestedRule fixed_lower(std::uint64_t grid_max);
  static NestedRule fixed_upper(std::uint64_t grid_max);
  static NestedRule adaptive_lower(std::shared_ptr<const ResidualQuantileModel> model);

  RuleKind kind() const noexcept { return kind_; }
  std::uint64_t grid_max() const noexcept { return grid_max_; }
  const ResidualQuantileModel* model() const noexcept { return model_.get(); }
  std::shared_ptr<const ResidualQuantileModel> shared_model() const noexcept { return model_; }

  // Indices beyond grid_max behave like grid_max.
  std::uint64_t lower(std::uint64_t feature, std::uint64_t t) const;
  std::uint64_t upper(std::uint64_t feature, std::uint64_t t) const;
  bool contains(std::uint64_t feature, std::uint64_t label, std::uint64_t t) const {
    return lower(feature, t) <= label && label <= upper(feature, t);
  }

 private:
  NestedRule(RuleKind kind, std::uint64_t grid_max,
             std::shared_ptr<const ResidualQuantileModel> model);

  RuleKind kind_;
  std::uint64_t grid_max_;
  std::shared_ptr<const ResidualQuantileModel> model_;
};

// Smallest t in {0..grid_max} whose candidate interval contains label, found
// by binary search. Returns grid_max + 1 when no candidate contains it, which
// only happens when label > feature.
std::uint64_t conformity_score(const NestedRule& rule, std::uint64_t feature, std::uint64_t label);

// Contiguous bins over {0, ..., m}:  B_0 = [e_0, e_1],  B_l = (e_l, e_{l+1}].
class FrequencyPartition {
 public:
  // edges: e_0 = 0 < e_1 < ... < e_L = m (a single bin may have m = 0).
  explicit FrequencyPartition(std::vector<std::uint64_t> edges);
  static FrequencyPartition single(std::uint64_t range_max);

  std::size_t bins() const noexcept { return edges_.size() - 1; }
  std::uint64_t range_max() const noexcept { return edges_.back(); }
  const std::vector<std::uint64_t>& edges() const noexcept { return edges_; }
  // Inclusive bounds of bin l.
  std::uint64_t bin_low(std::size_t l) const noexcept { return l == 0 ? 0 : edges_[l] + 1; }
  std::uint64_t bin_high(std::size_t l) const noexcept { return edges_[l + 1]; }
  // Labels above range_max() fall in the last bin.
  std::size_t bin_of(std::uint64_t label) const noexcept;

 private:
  std::vector<std::uint64_t> edges_;
};

// Equal-mass partition: cut points at the empirical (inverse-CDF) quantiles
// k / L of the labels, k = 1..L-1. Duplicate cuts, cuts at zero, and cuts at
// or above the largest label are dropped, so every bin holds at least one
// label. Throws ConfigError when bin_count is zero.
FrequencyPartition build_partition(std::span<const std::uint64_t> labels, std::size_t bin_count,
                                   std::uint64_t range_max);

struct ScoredLabel {
  std::uint64_t score = 0;
  std::uint64_t label = 0;
};

struct CalibratedThreshold {
  double alpha = 0.0;
  std::uint64_t grid_max = 0;
  std::vector<std::uint64_t> per_bin;
  std::vector<std::size_t> n_per_bin;
  std::uint64_t q_star = 0;
};

// ceil((1 - alpha) * (n + 1)), the rank of the conformal order statistic.
std::size_t conformal_rank(std::size_t n, double alpha);

// Per bin: the conformal_rank(n_l)-th smallest score, or grid_max when that
// rank exceeds n_l (including empty bins). q_star is the maximum over bins.
// Throws ConfigError unless 0 < alpha < 1.
CalibratedThreshold calibrate(std::span<const ScoredLabel> scores,
                              const FrequencyPartition& partition, double alpha,
                              std::uint64_t grid_max);

std::vector<ScoredLabel> score_pairs(const NestedRule& rule,
                                     std::span<const CalibrationPair> pairs);

struct ConfidenceInterval {
  std::uint64_t lower = 0;
  std::uint64_t upper = 0;
  double alpha = 0.0;
  std::uint64_t warmup_offset = 0;

  std::uint64_t length() const noexcept { return upper - lower; }
  bool contains(std::uint64_t value) const noexcept { return lower <= value && value <= upper; }
};

struct PredictOptions {
  // Return the exact count for items tracked during warm-up.
  bool singleton_for_tracked = false;
};

// One-sided interval from raw numbers: [offset + lower(u; q), offset + u].
ConfidenceInterval one_sided_interval(const NestedRule& rule, const CalibratedThreshold& threshold,
                                      std::uint64_t feature, std::uint64_t warmup_offset);

ConfidenceInterval predict_interval(std::string_view item, const CountMinSketch& sketch,
                                    const ExactTracker& tracker, const NestedRule& rule,
                                    const CalibratedThreshold& threshold,
                                    PredictOptions options = {});

// Lower and upper one-sided calibrations, each at level alpha / 2.
struct TwoSidedCalibration {
  double alpha = 0.0;
  CalibratedThreshold lower;
  CalibratedThreshold upper;
};

// lower_rule must be a lower rule and upper_rule kFixedUpper; throws
// ConfigError otherwise.
TwoSidedCalibration calibrate_two_sided(const NestedRule& lower_rule, const NestedRule& upper_rule,
                                        std::span<const CalibrationPair> pairs,
                                        const FrequencyPartition& partition, double alpha);

// [offset + lower(u; Q_l), offset + min(Q_u, u)]. When the two one-sided
// bounds cross, the interval spans the gap between them.
ConfidenceInterval two_sided_interval(const NestedRule& lower_rule, const NestedRule& upper_rule,
                                      const TwoSidedCalibration& calibration,
                                      std::uint64_t feature, std::uint64_t warmup_offset);

ConfidenceInterval two_sided_bonferroni(std::string_view item, const CountMinSketch& sketch,
                                        const ExactTracker& tracker, const NestedRule& lower_rule,
                                        const NestedRule& upper_rule,
                                        const TwoSidedCalibration& calibration,
                                        PredictOptions options = {});

}  // namespace confsketch
