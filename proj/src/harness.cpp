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

#include "confsketch/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "confsketch/error.hpp"

namespace confsketch {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string_view to_string(RuleSelection r) {
  switch (r) {
    case RuleSelection::kFixed:
      return "fixed";
    case RuleSelection::kAdaptive:
      return "adaptive";
    case RuleSelection::kBoth:
      return "both";
  }
  return "unknown";
}

RuleSelection parse_rule_selection(std::string_view name) {
  if (name == "fixed") return RuleSelection::kFixed;
  if (name == "adaptive") return RuleSelection::kAdaptive;
  if (name == "both") return RuleSelection::kBoth;
  throw ConfigError("rule must be fixed, adaptive or both, got '" + std::string(name) + "'");
}

bool uses_fixed(RuleSelection r) { return r != RuleSelection::kAdaptive; }
bool uses_adaptive(RuleSelection r) { return r != RuleSelection::kFixed; }

FrequencyPartition warmup_partition(const StreamState& state, std::size_t bins) {
  const std::uint64_t m = state.tracker.stream_length();
  if (bins == 1) return FrequencyPartition::single(m);
  std::vector<std::uint64_t> labels;
  labels.reserve(state.tracker.positions().size());
  for (const auto id : state.tracker.positions()) {
    labels.push_back(state.tracker.entries()[id].supervised);
  }
  return build_partition(labels, bins, m);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  stream.validate();
  if (sketch.depth == 0 || sketch.width == 0) throw ConfigError("sketch d and w must be >= 1");
  if (!(conformal.alpha > 0.0 && conformal.alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0, 1)");
  }
  if (conformal.bins == 0) throw ConfigError("bins must be >= 1");
  if (!(conformal.train_fraction >= 0.0 && conformal.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in [0, 1)");
  }
  if (conformal.model.levels == 0 || conformal.model.feature_bins == 0) {
    throw ConfigError("adaptive_levels and adaptive_feature_bins must be >= 1");
  }
  if (uses_adaptive(conformal.rule)) {
    const double train = conformal.train_fraction * static_cast<double>(stream.warmup);
    if (train < 1.0) throw ConfigError("adaptive rule needs train_fraction * m0 >= 1");
    if (static_cast<std::uint64_t>(train) >= stream.warmup) {
      throw ConfigError("adaptive rule leaves no calibration pairs");
    }
  }
  if (repetitions == 0) throw ConfigError("repetitions must be >= 1");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::describe() const {
  return {
      {"source", std::string(to_string(stream.source))},
      {"zipf_a", format_double(stream.zipf_a)},
      {"py_lambda", format_double(stream.py_lambda)},
      {"py_sigma", format_double(stream.py_sigma)},
      {"input", stream.path},
      {"m", std::to_string(stream.length)},
      {"m0", std::to_string(stream.warmup)},
      {"query_count", std::to_string(stream.query_count)},
      {"seed", std::to_string(stream.seed)},
      {"variant", std::string(to_string(sketch.variant))},
      {"d", std::to_string(sketch.depth)},
      {"w", std::to_string(sketch.width)},
      {"master_seed", std::to_string(sketch.master_seed)},
      {"alpha", format_double(conformal.alpha)},
      {"bins", std::to_string(conformal.bins)},
      {"train_fraction", format_double(conformal.train_fraction)},
      {"rule", std::string(to_string(conformal.rule))},
      {"two_sided", conformal.two_sided ? "true" : "false"},
      {"singleton", conformal.singleton_for_tracked ? "true" : "false"},
      {"adaptive_levels", std::to_string(conformal.model.levels)},
      {"adaptive_feature_bins", std::to_string(conformal.model.feature_bins)},
      {"repetitions", std::to_string(repetitions)},
  };
}

ExperimentConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  ExperimentConfig c;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "source") {
        c.stream.source = parse_source_kind(value.get<std::string>());
      } else if (key == "zipf_a") {
        c.stream.zipf_a = value.get<double>();
      } else if (key == "py_lambda") {
        c.stream.py_lambda = value.get<double>();
      } else if (key == "py_sigma") {
        c.stream.py_sigma = value.get<double>();
      } else if (key == "input") {
        c.stream.path = value.get<std::string>();
      } else if (key == "m") {
        c.stream.length = value.get<std::uint64_t>();
      } else if (key == "m0") {
        c.stream.warmup = value.get<std::uint64_t>();
      } else if (key == "query_count") {
        c.stream.query_count = value.get<std::uint64_t>();
      } else if (key == "seed") {
        c.stream.seed = value.get<std::uint64_t>();
      } else if (key == "variant") {
        c.sketch.variant = parse_variant(value.get<std::string>());
      } else if (key == "d") {
        c.sketch.depth = value.get<std::size_t>();
      } else if (key == "w") {
        c.sketch.width = value.get<std::size_t>();
      } else if (key == "master_seed") {
        c.sketch.master_seed = value.get<std::uint64_t>();
      } else if (key == "alpha") {
        c.conformal.alpha = value.get<double>();
      } else if (key == "bins") {
        c.conformal.bins = value.get<std::size_t>();
      } else if (key == "train_fraction") {
        c.conformal.train_fraction = value.get<double>();
      } else if (key == "rule") {
        c.conformal.rule = parse_rule_selection(value.get<std::string>());
      } else if (key == "two_sided") {
        c.conformal.two_sided = value.get<bool>();
      } else if (key == "singleton") {
        c.conformal.singleton_for_tracked = value.get<bool>();
      } else if (key == "adaptive_levels") {
        c.conformal.model.levels = value.get<std::size_t>();
      } else if (key == "adaptive_feature_bins") {
        c.conformal.model.feature_bins = value.get<std::size_t>();
      } else if (key == "repetitions") {
        c.repetitions = value.get<std::size_t>();
      } else if (key == "output") {
        c.output = value.get<std::string>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Pipeline

StreamState absorb_stream(std::span<const std::string> items, std::uint64_t warmup,
                          const SketchSettings& settings) {
  if (warmup > items.size()) throw ConfigError("stream is shorter than the warm-up");
  StreamState state{
      CountMinSketch(HashFamily(settings.depth, settings.width, settings.master_seed),
                     settings.variant),
      ExactTracker{}};
  for (std::size_t i = 0; i < warmup; ++i) state.tracker.warmup_ingest(items[i]);
  state.tracker.close_warmup();
  for (std::size_t i = warmup; i < items.size(); ++i) {
    state.sketch.update(items[i]);
    state.tracker.supervised_ingest(items[i]);
  }
  state.sketch.freeze();
  state.tracker.freeze();
  return state;
}

CalibrationArtifact calibrate_state(const StreamState& state, const ConformalSettings& settings,
                                    RuleKind lower_kind) {
  const std::uint64_t grid_max = state.tracker.stream_length();
  CalibrationArtifact a;
  a.alpha = settings.alpha;
  a.partition = warmup_partition(state, settings.bins);

  CalibrationSplit split;
  switch (lower_kind) {
    case RuleKind::kFixedLower:
      split = build_calibration_set(state.tracker, state.sketch, 0.0);
      a.lower_rule = NestedRule::fixed_lower(grid_max);
      break;
    case RuleKind::kAdaptiveLower: {
      split = build_calibration_set(state.tracker, state.sketch, settings.train_fraction);
      auto model = std::make_shared<const ResidualQuantileModel>(
          ResidualQuantileModel::fit(split.training, grid_max, settings.model));
      a.lower_rule = NestedRule::adaptive_lower(std::move(model));
      break;
    }
    case RuleKind::kFixedUpper:
      throw ConfigError("the lower side needs a lower rule");
  }

  if (settings.two_sided) {
    auto cal = calibrate_two_sided(a.lower_rule, NestedRule::fixed_upper(grid_max),
                                   split.calibration, a.partition, settings.alpha);
    a.lower = std::move(cal.lower);
    a.upper = std::move(cal.upper);
  } else {
    a.lower = calibrate(score_pairs(a.lower_rule, split.calibration), a.partition, settings.alpha,
                        grid_max);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<BinMetrics> stratified_metrics(std::span<const QueryRecord> queries,
                                           const FrequencyPartition& partition) {
  std::vector<BinMetrics> bins(partition.bins());
  for (std::size_t l = 0; l < bins.size(); ++l) {
    bins[l].low = partition.bin_low(l);
    bins[l].high = partition.bin_high(l);
  }
  for (const auto& q : queries) {
    auto& b = bins[partition.bin_of(q.stratum)];
    ++b.queries;
    b.covered += q.interval.contains(q.truth) ? 1 : 0;
    b.length_sum += q.interval.length();
  }
  return bins;
}

BinMetrics marginal_metrics(std::span<const QueryRecord> queries) {
  BinMetrics m;
  for (const auto& q : queries) {
    ++m.queries;
    m.covered += q.interval.contains(q.truth) ? 1 : 0;
    m.length_sum += q.interval.length();
  }
  return m;
}

BinMetrics unique_query_metrics(std::span<const QueryRecord> queries) {
  std::unordered_set<std::string_view> seen;
  BinMetrics m;
  for (const auto& q : queries) {
    if (!seen.insert(q.item).second) continue;
    ++m.queries;
    m.covered += q.interval.contains(q.truth) ? 1 : 0;
    m.length_sum += q.interval.length();
  }
  return m;
}

std::vector<MetricsRow> run_repetition(const ExperimentConfig& config, std::size_t repetition) {
  const auto& spec = config.stream;
  const std::uint64_t data_seed = spec.seed + repetition;
  const std::uint64_t hash_seed = config.sketch.master_seed + repetition;
  const std::size_t m = spec.length;

  const auto items = generate_items(spec, m + spec.query_count, data_seed);
  const std::span<const std::string> stream(items.data(), m);
  const std::span<const std::string> queries(items.data() + m, spec.query_count);

  SketchSettings sketch_settings = config.sketch;
  sketch_settings.master_seed = hash_seed;
  const StreamState state = absorb_stream(stream, spec.warmup, sketch_settings);

  // Validation oracle: exact counts over the whole stream.
  std::unordered_map<std::string_view, std::uint64_t> exact;
  exact.reserve(m / 4);
  for (const auto& z : stream) ++exact[z];

  struct QueryFacts {
    std::uint64_t feature, warmup, truth;
  };
  std::vector<QueryFacts> facts;
  facts.reserve(queries.size());
  for (const auto& z : queries) {
    const auto it = exact.find(z);
    facts.push_back({state.sketch.query_upper(z), state.tracker.warmup_count(z),
                     it == exact.end() ? 0 : it->second});
  }

  const auto& cs = config.conformal;
  const bool singleton = cs.singleton_for_tracked;
  const FrequencyPartition partition = warmup_partition(state, cs.bins);

  std::vector<MetricsRow> rows;
  std::vector<QueryRecord> records(queries.size());
  auto evaluate = [&](std::string_view method, auto&& interval_of, std::uint64_t threshold,
                      std::optional<std::uint64_t> upper_threshold) {
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto& f = facts[i];
      records[i].item = queries[i];
      records[i].truth = f.truth;
      records[i].stratum = f.truth - f.warmup;
      if (singleton && f.warmup > 0) {
        records[i].interval = {f.truth, f.truth, cs.alpha, f.warmup};
      } else {
        records[i].interval = interval_of(f.feature, f.warmup);
      }
    }
    MetricsRow row;
    row.method = std::string(method);
    row.repetition = repetition;
    row.data_seed = data_seed;
    row.hash_seed = hash_seed;
    row.threshold = threshold;
    row.upper_threshold = upper_threshold;
    row.marginal = marginal_metrics(records);
    row.unique = unique_query_metrics(records);
    row.bins = stratified_metrics(records, partition);
    rows.push_back(std::move(row));
  };
  auto evaluate_artifact = [&](std::string_view method, const CalibrationArtifact& a) {
    std::optional<std::uint64_t> upper;
    if (a.upper) upper = a.upper->q_star;
    evaluate(
        method, [&](std::uint64_t u, std::uint64_t wu) { return a.interval(u, wu); },
        a.lower.q_star, upper);
  };

  ConformalSettings one_sided = cs;
  one_sided.two_sided = false;
  if (uses_fixed(cs.rule)) {
    evaluate_artifact(kMethodFixed, calibrate_state(state, one_sided, RuleKind::kFixedLower));
  }
  if (uses_adaptive(cs.rule)) {
    evaluate_artifact(kMethodAdaptive, calibrate_state(state, one_sided, RuleKind::kAdaptiveLower));
  }
  // Confidence 1 - e^-d of the classical bound.
  const double classical_alpha = std::exp(-static_cast<double>(state.sketch.depth()));
  const std::uint64_t slack = classical_slack(state.sketch.items_sketched(), state.sketch.width());
  evaluate(
      kMethodClassical,
      [&](std::uint64_t u, std::uint64_t wu) {
        return ConfidenceInterval{wu + classical_lower_bound(u, state.sketch.items_sketched(),
                                                             state.sketch.width()),
                                  wu + u, classical_alpha, wu};
      },
      slack, std::nullopt);
  if (cs.two_sided) {
    ConformalSettings two = cs;
    evaluate_artifact(kMethodTwoSided, calibrate_state(state, two, RuleKind::kFixedLower));
    ConformalSettings half = one_sided;
    half.alpha = cs.alpha / 2;
    evaluate_artifact(kMethodFixedHalfAlpha, calibrate_state(state, half, RuleKind::kFixedLower));
  }
  return rows;
}

std::size_t worker_count_from_env() {
  if (const char* env = std::getenv("CONFSKETCH_THREADS")) {
    std::size_t n = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc{} && ptr == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::size_t reps = config.repetitions;
  std::vector<std::vector<MetricsRow>> per_rep(reps);
  const std::size_t workers = std::min(worker_count_from_env(), reps);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      try {
        per_rep[r] = run_repetition(config, r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<MetricsRow> rows;
  for (auto& r : per_rep) std::move(r.begin(), r.end(), std::back_inserter(rows));
  return rows;
}

void write_metrics_csv(std::ostream& out, const ExperimentConfig& config,
                       std::span<const MetricsRow> rows) {
  out << "# confsketch-metrics v1\r\n";
  out << "# prng=splitmix64\r\n";
  out << "# hash=carter-wegman-mersenne61(fnv1a64+mix64)\r\n";
  for (const auto& [key, value] : config.describe()) out << "# " << key << '=' << value << "\r\n";

  const std::size_t bins = config.conformal.bins;
  out << "method,repetition,data_seed,hash_seed,threshold,upper_threshold,queries,covered,"
         "coverage,mean_length,unique_queries,unique_covered,unique_coverage,unique_mean_length";
  for (std::size_t l = 1; l <= bins; ++l) {
    out << ",bin" << l << "_low,bin" << l << "_high,bin" << l << "_queries,bin" << l
        << "_covered,bin" << l << "_coverage,bin" << l << "_mean_length";
  }
  out << "\r\n";

  for (const auto& r : rows) {
    out << r.method << ',' << r.repetition << ',' << r.data_seed << ',' << r.hash_seed << ','
        << r.threshold << ',';
    if (r.upper_threshold) out << *r.upper_threshold;
    out << ',' << r.marginal.queries << ',' << r.marginal.covered << ','
        << fixed6(r.marginal.coverage()) << ',' << fixed6(r.marginal.mean_length()) << ','
        << r.unique.queries << ',' << r.unique.covered << ',' << fixed6(r.unique.coverage())
        << ',' << fixed6(r.unique.mean_length());
    for (std::size_t l = 0; l < bins; ++l) {
      if (l < r.bins.size()) {
        const auto& b = r.bins[l];
        out << ',' << b.low << ',' << b.high << ',' << b.queries << ',' << b.covered << ',';
        if (b.queries) out << fixed6(b.coverage());
        out << ',';
        if (b.queries) out << fixed6(b.mean_length());
      } else {
        out << ",,,0,0,,";
      }
    }
    out << "\r\n";
  }
}

MetricsRow pool_rows(std::span<const MetricsRow> rows, std::string_view method) {
  MetricsRow pooled;
  pooled.method = std::string(method);
  auto add = [](BinMetrics& into, const BinMetrics& b) {
    into.queries += b.queries;
    into.covered += b.covered;
    into.length_sum += b.length_sum;
  };
  for (const auto& r : rows) {
    if (r.method != method) continue;
    add(pooled.marginal, r.marginal);
    add(pooled.unique, r.unique);
    if (pooled.bins.size() < r.bins.size()) pooled.bins.resize(r.bins.size());
    for (std::size_t l = 0; l < r.bins.size(); ++l) add(pooled.bins[l], r.bins[l]);
  }
  return pooled;
}

}  // namespace confsketch
