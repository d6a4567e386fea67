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

#include "confsketch/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "confsketch/error.hpp"
#include "confsketch/sketch.hpp"

namespace confsketch {

namespace {

// Inverse-CDF quantile at level k / levels of a sorted sample.
std::uint64_t sorted_quantile(std::span<const std::uint64_t> sorted, std::size_t k,
                              std::size_t levels) {
  const std::size_t n = sorted.size();
  std::size_t rank = (k * n + levels - 1) / levels;  // ceil(k n / levels)
  if (rank == 0) rank = 1;
  return sorted[std::min(rank, n) - 1];
}

// Weighted least-squares isotonic (non-decreasing) fit.
std::vector<double> pool_adjacent_violators(std::span<const double> values,
                                            std::span<const double> weights) {
  struct Block {
    double mean;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    blocks.push_back({values[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + top.weight;
      prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }
  std::vector<double> fitted;
  fitted.reserve(values.size());
  for (const auto& b : blocks) fitted.insert(fitted.end(), b.count, b.mean);
  return fitted;
}

}  // namespace

// ---------------------------------------------------------------------------
// ResidualQuantileModel

ResidualQuantileModel ResidualQuantileModel::fit(std::span<const CalibrationPair> training,
                                                 std::uint64_t grid_max,
                                                 ResidualModelOptions options) {
  if (training.empty()) throw ConfigError("adaptive model needs at least one training pair");
  if (options.levels == 0 || options.feature_bins == 0) {
    throw ConfigError("adaptive model needs at least one level and one feature bin");
  }

  std::vector<std::uint64_t> features;
  features.reserve(training.size());
  for (const auto& p : training) features.push_back(p.feature);
  std::sort(features.begin(), features.end());

  ResidualQuantileModel model;
  model.levels_ = options.levels;
  model.grid_max_ = grid_max;
  for (std::size_t b = 1; b < options.feature_bins; ++b) {
    const std::uint64_t cut = sorted_quantile(features, b, options.feature_bins);
    if (cut >= features.back()) break;
    if (model.upper_edges_.empty() || cut > model.upper_edges_.back()) {
      model.upper_edges_.push_back(cut);
    }
  }

  const std::size_t bins = model.bins();
  std::vector<std::vector<std::uint64_t>> residuals(bins);
  for (const auto& p : training) {
    const std::uint64_t r = p.feature >= p.label ? p.feature - p.label : 0;
    residuals[model.bin_of(p.feature)].push_back(r);
  }
  for (auto& r : residuals) std::sort(r.begin(), r.end());

  // Per-bin residual CDFs on the pooled support, made non-increasing across
  // bins at every support point, then inverted at each level.
  std::vector<std::uint64_t> support;
  for (const auto& r : residuals) support.insert(support.end(), r.begin(), r.end());
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  std::vector<double> weights(bins);
  for (std::size_t b = 0; b < bins; ++b) weights[b] = static_cast<double>(residuals[b].size());
  std::vector<std::vector<double>> cdf(bins, std::vector<double>(support.size()));
  std::vector<double> column(bins);
  for (std::size_t j = 0; j < support.size(); ++j) {
    for (std::size_t b = 0; b < bins; ++b) {
      const auto& r = residuals[b];
      const auto le = std::upper_bound(r.begin(), r.end(), support[j]) - r.begin();
      column[b] = -static_cast<double>(le) / weights[b];
    }
    const auto iso = pool_adjacent_violators(column, weights);
    for (std::size_t b = 0; b < bins; ++b) cdf[b][j] = -iso[b];
  }

  model.table_.assign(bins * options.levels, 0);
  for (std::size_t b = 0; b < bins; ++b) {
    std::size_t j = 0;
    for (std::size_t k = 1; k <= options.levels; ++k) {
      const double level = static_cast<double>(k) / static_cast<double>(options.levels);
      while (j + 1 < support.size() && cdf[b][j] < level - 1e-9) ++j;
      model.table_[b * options.levels + (k - 1)] = std::min(support[j], grid_max);
    }
  }
  return model;
}

ResidualQuantileModel ResidualQuantileModel::from_table(std::vector<std::uint64_t> upper_edges,
                                                        std::vector<std::uint64_t> table,
                                                        std::size_t levels,
                                                        std::uint64_t grid_max) {
  if (levels == 0) throw ConfigError("adaptive model needs at least one level");
  if (!std::is_sorted(upper_edges.begin(), upper_edges.end()) ||
      std::adjacent_find(upper_edges.begin(), upper_edges.end()) != upper_edges.end()) {
    throw ConfigError("adaptive model edges must be strictly increasing");
  }
  if (table.size() != (upper_edges.size() + 1) * levels) {
    throw ConfigError("adaptive model table has the wrong size");
  }
  ResidualQuantileModel model;
  model.upper_edges_ = std::move(upper_edges);
  model.table_ = std::move(table);
  model.levels_ = levels;
  model.grid_max_ = grid_max;
  for (std::size_t b = 0; b < model.bins(); ++b) {
    for (std::size_t k = 0; k < levels; ++k) {
      const auto v = model.table_[b * levels + k];
      if (v > grid_max || (k > 0 && v < model.table_[b * levels + k - 1])) {
        throw ConfigError("adaptive model table is not monotone in the level index");
      }
    }
  }
  return model;
}

std::size_t ResidualQuantileModel::bin_of(std::uint64_t feature) const noexcept {
  return static_cast<std::size_t>(
      std::lower_bound(upper_edges_.begin(), upper_edges_.end(), feature) -
      upper_edges_.begin());
}

std::uint64_t ResidualQuantileModel::quantile(std::uint64_t feature, std::uint64_t t) const {
  if (!fitted()) throw UsageError("adaptive model is not fitted");
  if (t == 0) return 0;
  if (t > levels_) return grid_max_;
  return table_[bin_of(feature) * levels_ + (t - 1)];
}

std::uint64_t adaptive_lower(const ResidualQuantileModel& model, std::uint64_t feature,
                             std::uint64_t t) {
  return fixed_lower(feature, model.quantile(feature, t));
}

// ---------------------------------------------------------------------------
// NestedRule

std::string_view to_string(RuleKind kind) noexcept {
  switch (kind) {
    case RuleKind::kFixedLower:
      return "fixed_lower";
    case RuleKind::kAdaptiveLower:
      return "adaptive_lower";
    case RuleKind::kFixedUpper:
      return "fixed_upper";
  }
  return "unknown";
}

RuleKind parse_rule_kind(std::string_view name) {
  if (name == "fixed_lower") return RuleKind::kFixedLower;
  if (name == "adaptive_lower") return RuleKind::kAdaptiveLower;
  if (name == "fixed_upper") return RuleKind::kFixedUpper;
  throw ConfigError("unknown rule kind '" + std::string(name) + "'");
}

NestedRule::NestedRule(RuleKind kind, std::uint64_t grid_max,
                       std::shared_ptr<const ResidualQuantileModel> model)
    : kind_(kind), grid_max_(grid_max), model_(std::move(model)) {}

NestedRule NestedRule::fixed_lower(std::uint64_t grid_max) {
  return NestedRule(RuleKind::kFixedLower, grid_max, nullptr);
}

NestedRule NestedRule::fixed_upper(std::uint64_t grid_max) {
  return NestedRule(RuleKind::kFixedUpper, grid_max, nullptr);
}

NestedRule NestedRule::adaptive_lower(std::shared_ptr<const ResidualQuantileModel> model) {
  if (!model || !model->fitted()) throw UsageError("adaptive rule needs a fitted model");
  const auto grid_max = model->grid_max();
  return NestedRule(RuleKind::kAdaptiveLower, grid_max, std::move(model));
}

std::uint64_t NestedRule::lower(std::uint64_t feature, std::uint64_t t) const {
  t = std::min(t, grid_max_);
  switch (kind_) {
    case RuleKind::kFixedLower:
      return t == grid_max_ ? 0 : confsketch::fixed_lower(feature, t);
    case RuleKind::kAdaptiveLower:
      return t == grid_max_ ? 0 : confsketch::adaptive_lower(*model_, feature, t);
    case RuleKind::kFixedUpper:
      return 0;
  }
  return 0;
}

std::uint64_t NestedRule::upper(std::uint64_t feature, std::uint64_t t) const {
  t = std::min(t, grid_max_);
  if (kind_ == RuleKind::kFixedUpper) return t == grid_max_ ? feature : std::min(t, feature);
  return feature;
}

std::uint64_t conformity_score(const NestedRule& rule, std::uint64_t feature,
                               std::uint64_t label) {
  const std::uint64_t top = rule.grid_max();
  if (!rule.contains(feature, label, top)) return top + 1;
  std::uint64_t lo = 0;
  std::uint64_t hi = top;
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (rule.contains(feature, label, mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Partition and calibration

FrequencyPartition::FrequencyPartition(std::vector<std::uint64_t> edges)
    : edges_(std::move(edges)) {
  if (edges_.size() < 2 || edges_.front() != 0) {
    throw ConfigError("partition needs edges 0 = e_0 <= ... <= e_L = m with L >= 1");
  }
  for (std::size_t i = 1; i + 1 < edges_.size(); ++i) {
    if (edges_[i] <= edges_[i - 1]) throw ConfigError("partition edges must increase");
  }
  if (edges_.size() > 2 && edges_.back() <= edges_[edges_.size() - 2]) {
    throw ConfigError("partition edges must increase");
  }
}

FrequencyPartition FrequencyPartition::single(std::uint64_t range_max) {
  return FrequencyPartition({0, range_max});
}

std::size_t FrequencyPartition::bin_of(std::uint64_t label) const noexcept {
  // First interior edge >= label; bin 0 also holds label == e_1.
  const auto begin = edges_.begin() + 1;
  const auto end = edges_.end() - 1;
  const auto it = std::lower_bound(begin, end, label);
  return static_cast<std::size_t>(it - begin);
}

FrequencyPartition build_partition(std::span<const std::uint64_t> labels, std::size_t bin_count,
                                   std::uint64_t range_max) {
  if (bin_count == 0) throw ConfigError("partition needs at least one bin");
  std::vector<std::uint64_t> edges{0};
  if (!labels.empty() && bin_count > 1) {
    std::vector<std::uint64_t> sorted(labels.begin(), labels.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 1; k < bin_count; ++k) {
      const std::uint64_t cut = sorted_quantile(sorted, k, bin_count);
      if (cut > edges.back() && cut < sorted.back() && cut < range_max) edges.push_back(cut);
    }
  }
  edges.push_back(range_max);
  return FrequencyPartition(std::move(edges));
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  const long double target =
      (1.0L - static_cast<long double>(alpha)) * static_cast<long double>(n + 1);
  auto k = static_cast<std::size_t>(std::ceil(target));
  // Guard against representation error of alpha pushing an exact integer up.
  if (k > 0 && static_cast<long double>(k - 1) >= target - 1e-9L) --k;
  return k;
}

CalibratedThreshold calibrate(std::span<const ScoredLabel> scores,
                              const FrequencyPartition& partition, double alpha,
                              std::uint64_t grid_max) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const std::size_t bins = partition.bins();
  std::vector<std::vector<std::uint64_t>> by_bin(bins);
  for (const auto& s : scores) by_bin[partition.bin_of(s.label)].push_back(s.score);

  CalibratedThreshold out;
  out.alpha = alpha;
  out.grid_max = grid_max;
  out.per_bin.resize(bins);
  out.n_per_bin.resize(bins);
  for (std::size_t l = 0; l < bins; ++l) {
    auto& v = by_bin[l];
    const std::size_t n = v.size();
    const std::size_t k = conformal_rank(n, alpha);
    out.n_per_bin[l] = n;
    if (k == 0) {
      // Only reachable for tiny alpha * (n + 1) rounding; smallest index is 0.
      out.per_bin[l] = 0;
    } else if (k > n) {
      out.per_bin[l] = grid_max;
    } else {
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
      out.per_bin[l] = v[k - 1];
    }
  }
  out.q_star = *std::max_element(out.per_bin.begin(), out.per_bin.end());
  return out;
}

std::vector<ScoredLabel> score_pairs(const NestedRule& rule,
                                     std::span<const CalibrationPair> pairs) {
  std::vector<ScoredLabel> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({conformity_score(rule, p.feature, p.label), p.label});
  return out;
}

// ---------------------------------------------------------------------------
// Intervals

ConfidenceInterval one_sided_interval(const NestedRule& rule, const CalibratedThreshold& threshold,
                                      std::uint64_t feature, std::uint64_t warmup_offset) {
  if (rule.kind() == RuleKind::kFixedUpper) {
    throw ConfigError("one-sided intervals need a lower rule");
  }
  ConfidenceInterval ci;
  ci.alpha = threshold.alpha;
  ci.warmup_offset = warmup_offset;
  ci.lower = warmup_offset + rule.lower(feature, threshold.q_star);
  ci.upper = warmup_offset + feature;
  return ci;
}

ConfidenceInterval predict_interval(std::string_view item, const CountMinSketch& sketch,
                                    const ExactTracker& tracker, const NestedRule& rule,
                                    const CalibratedThreshold& threshold, PredictOptions options) {
  const std::uint64_t offset = tracker.warmup_count(item);
  if (options.singleton_for_tracked && offset > 0) {
    const std::uint64_t exact = offset + tracker.supervised_count(item);
    return {exact, exact, threshold.alpha, offset};
  }
  return one_sided_interval(rule, threshold, sketch.query_upper(item), offset);
}

TwoSidedCalibration calibrate_two_sided(const NestedRule& lower_rule, const NestedRule& upper_rule,
                                        std::span<const CalibrationPair> pairs,
                                        const FrequencyPartition& partition, double alpha) {
  if (lower_rule.kind() == RuleKind::kFixedUpper || upper_rule.kind() != RuleKind::kFixedUpper) {
    throw ConfigError("two-sided calibration needs a lower rule and a fixed upper rule");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  TwoSidedCalibration out;
  out.alpha = alpha;
  const auto lower_scores = score_pairs(lower_rule, pairs);
  const auto upper_scores = score_pairs(upper_rule, pairs);
  out.lower = calibrate(lower_scores, partition, alpha / 2, lower_rule.grid_max());
  out.upper = calibrate(upper_scores, partition, alpha / 2, upper_rule.grid_max());
  return out;
}

ConfidenceInterval two_sided_interval(const NestedRule& lower_rule, const NestedRule& upper_rule,
                                      const TwoSidedCalibration& calibration,
                                      std::uint64_t feature, std::uint64_t warmup_offset) {
  const std::uint64_t lo = lower_rule.lower(feature, calibration.lower.q_star);
  const std::uint64_t hi = upper_rule.upper(feature, calibration.upper.q_star);
  ConfidenceInterval ci;
  ci.alpha = calibration.alpha;
  ci.warmup_offset = warmup_offset;
  ci.lower = warmup_offset + std::min(lo, hi);
  ci.upper = warmup_offset + std::max(lo, hi);
  return ci;
}

ConfidenceInterval two_sided_bonferroni(std::string_view item, const CountMinSketch& sketch,
                                        const ExactTracker& tracker, const NestedRule& lower_rule,
                                        const NestedRule& upper_rule,
                                        const TwoSidedCalibration& calibration,
                                        PredictOptions options) {
  const std::uint64_t offset = tracker.warmup_count(item);
  if (options.singleton_for_tracked && offset > 0) {
    const std::uint64_t exact = offset + tracker.supervised_count(item);
    return {exact, exact, calibration.alpha, offset};
  }
  return two_sided_interval(lower_rule, upper_rule, calibration, sketch.query_upper(item), offset);
}

}  // namespace confsketch
