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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "confsketch/calibration_io.hpp"
#include "confsketch/conformal.hpp"
#include "confsketch/datagen.hpp"
#include "confsketch/sketch.hpp"
#include "confsketch/tracker.hpp"

namespace confsketch {

enum class RuleSelection { kFixed, kAdaptive, kBoth };

struct SketchSettings {
  SketchVariant variant = SketchVariant::kConservative;
  std::size_t depth = 3;
  std::size_t width = 1000;
  std::uint64_t master_seed = 1;
};

struct ConformalSettings {
  double alpha = 0.05;
  std::size_t bins = 5;
  double train_fraction = 0.5;  // adaptive rule only; the fixed rule uses all pairs
  RuleSelection rule = RuleSelection::kBoth;
  bool two_sided = false;
  bool singleton_for_tracked = false;
  ResidualModelOptions model;
};

struct ExperimentConfig {
  StreamSpec stream;
  SketchSettings sketch;
  ConformalSettings conformal;
  std::size_t repetitions = 10;
  std::string output;

  // Rejects infeasible settings with ConfigError before any work is done.
  void validate() const;
  // Flat key/value pairs in a fixed order, for provenance.
  std::vector<std::pair<std::string, std::string>> describe() const;
};

// Parses a flat JSON object; absent keys keep their defaults and unknown keys
// are rejected. Throws ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Streaming pipeline shared by the experiment runner and the CLI.

struct StreamState {
  CountMinSketch sketch;
  ExactTracker tracker;
};

// Warm-up on the first m0 items, sketch the rest; both outputs frozen.
StreamState absorb_stream(std::span<const std::string> items, std::uint64_t warmup,
                          const SketchSettings& settings);

// Calibrates the configured lower rule (kBoth is treated as kFixed) and, for
// two-sided settings, the fixed upper rule. Partition edges come from the
// labels of all warm-up positions.
CalibrationArtifact calibrate_state(const StreamState& state, const ConformalSettings& settings,
                                    RuleKind lower_kind);

// ---------------------------------------------------------------------------
// Metrics

struct QueryRecord {
  std::string_view item;
  std::uint64_t truth = 0;    // exact frequency among the m stream items
  std::uint64_t stratum = 0;  // exact frequency among the sketched items
  ConfidenceInterval interval;
};

struct BinMetrics {
  std::uint64_t low = 0;
  std::uint64_t high = 0;
  std::uint64_t queries = 0;
  std::uint64_t covered = 0;
  std::uint64_t length_sum = 0;

  double coverage() const noexcept {
    return queries ? static_cast<double>(covered) / static_cast<double>(queries) : 0.0;
  }
  double mean_length() const noexcept {
    return queries ? static_cast<double>(length_sum) / static_cast<double>(queries) : 0.0;
  }
};

// One row per partition bin, by stratum; empty bins have queries == 0.
std::vector<BinMetrics> stratified_metrics(std::span<const QueryRecord> queries,
                                           const FrequencyPartition& partition);

// Coverage and length after keeping one query per distinct item. Diagnostic:
// no coverage guarantee applies to it.
BinMetrics unique_query_metrics(std::span<const QueryRecord> queries);

BinMetrics marginal_metrics(std::span<const QueryRecord> queries);

struct MetricsRow {
  std::string method;
  std::size_t repetition = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t hash_seed = 0;
  std::uint64_t threshold = 0;  // q_star (lower side); classical slack otherwise
  std::optional<std::uint64_t> upper_threshold;
  BinMetrics marginal;
  BinMetrics unique;
  std::vector<BinMetrics> bins;
};

// Method labels in output order.
inline constexpr std::string_view kMethodFixed = "conformal_fixed";
inline constexpr std::string_view kMethodAdaptive = "conformal_adaptive";
inline constexpr std::string_view kMethodClassical = "classical";
inline constexpr std::string_view kMethodTwoSided = "conformal_two_sided";
// Emitted with kMethodTwoSided: the one-sided fixed rule at level alpha / 2
// on the same stream, the reference for two-sided lengths.
inline constexpr std::string_view kMethodFixedHalfAlpha = "conformal_fixed_half_alpha";

std::vector<MetricsRow> run_repetition(const ExperimentConfig& config, std::size_t repetition);

// All repetitions, run on CONFSKETCH_THREADS workers (default: hardware
// concurrency) and sorted by (repetition, method).
std::vector<MetricsRow> run_experiment(const ExperimentConfig& config);

std::size_t worker_count_from_env();

// RFC-4180 body preceded by '#'-prefixed provenance lines.
void write_metrics_csv(std::ostream& out, const ExperimentConfig& config,
                       std::span<const MetricsRow> rows);

// Pools rows of one method across repetitions (bins matched by index).
MetricsRow pool_rows(std::span<const MetricsRow> rows, std::string_view method);

}  // namespace confsketch
