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

// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
//   acceptance_test [--cli PATH --work-dir DIR] [--only N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "confsketch/conformal.hpp"
#include "confsketch/datagen.hpp"
#include "confsketch/harness.hpp"
#include "confsketch/random.hpp"
#include "confsketch/sketch.hpp"
#include "test_util.hpp"

namespace cs = confsketch;
namespace tu = confsketch::testing_util;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const double kCoverageSe = std::sqrt(0.95 * 0.05 / 10000.0);

cs::ExperimentConfig reference_setup() {
  cs::ExperimentConfig c;
  c.stream.length = 100000;
  c.stream.warmup = 5000;
  c.stream.query_count = 10000;
  c.stream.seed = 2026;
  c.sketch.variant = cs::SketchVariant::kConservative;
  c.sketch.depth = 3;
  c.sketch.width = 1000;
  c.sketch.master_seed = 7;
  c.conformal.alpha = 0.05;
  c.conformal.bins = 1;
  c.repetitions = 5;
  return c;
}

// Random small streams shared by the first two criteria.
struct SmallCase {
  std::size_t d, w;
  std::uint64_t hash_seed;
  std::vector<std::string> items;
};

std::vector<SmallCase> small_corpus() {
  cs::SplitMix64 rng(1001);
  const std::size_t depths[] = {1, 2, 3};
  const std::size_t widths[] = {4, 16, 64};
  std::vector<SmallCase> corpus;
  for (int i = 0; i < 1000; ++i) {
    SmallCase c{depths[i % 3], widths[(i / 3) % 3], rng(), {}};
    const std::size_t len = 1 + rng.below(500);
    const std::size_t universe = 1 + rng.below(200);
    for (std::size_t k = 0; k < len; ++k) c.items.push_back("i" + std::to_string(rng.below(universe)));
    corpus.push_back(std::move(c));
  }
  return corpus;
}

Outcome dominance() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t violations = 0;
  std::size_t checks = 0;
  for (const auto& c : small_corpus()) {
    const auto truth = tu::exact_counts(c.items);
    for (auto v : {cs::SketchVariant::kCountMin, cs::SketchVariant::kConservative}) {
      cs::CountMinSketch s(cs::HashFamily(c.d, c.w, c.hash_seed), v);
      for (const auto& z : c.items) s.update(z);
      for (const auto& [z, f] : truth) {
        ++checks;
        violations += s.query_upper(z) < f;
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {violations == 0 && secs < 60.0,
          fmt("%zu checks, %zu violations, %.2fs", checks, violations, secs)};
}

Outcome cu_tightness() {
  std::size_t violations = 0;
  std::size_t checks = 0;
  for (const auto& c : small_corpus()) {
    cs::CountMinSketch cms(cs::HashFamily(c.d, c.w, c.hash_seed), cs::SketchVariant::kCountMin);
    cs::CountMinSketch cu(cs::HashFamily(c.d, c.w, c.hash_seed), cs::SketchVariant::kConservative);
    for (const auto& z : c.items) cms.update(z), cu.update(z);
    for (const auto& [z, f] : tu::exact_counts(c.items)) {
      ++checks;
      violations += cu.query_upper(z) > cms.query_upper(z);
    }
  }
  return {violations == 0, fmt("%zu checks, %zu violations", checks, violations)};
}

// Runs are shared between criteria; cache them by a readable key.
std::map<std::string, std::vector<cs::MetricsRow>> g_runs;

const std::vector<cs::MetricsRow>& run_cached(const std::string& key,
                                              const cs::ExperimentConfig& c) {
  auto it = g_runs.find(key);
  if (it == g_runs.end()) it = g_runs.emplace(key, cs::run_experiment(c)).first;
  return it->second;
}

cs::ExperimentConfig zipf_config(double a, std::size_t bins) {
  auto c = reference_setup();
  c.stream.source = cs::SourceKind::kZipf;
  c.stream.zipf_a = a;
  c.conformal.bins = bins;
  return c;
}

const std::vector<cs::MetricsRow>& zipf_runs(double a, std::size_t bins) {
  return run_cached(fmt("zipf a=%.1f L=%zu", a, bins), zipf_config(a, bins));
}

Outcome coverage_check(const std::vector<cs::MetricsRow>& rows, const std::string& label) {
  const double floor = 0.95 - 3 * kCoverageSe;
  Outcome o{true, ""};
  for (auto method : {cs::kMethodFixed, cs::kMethodAdaptive}) {
    const auto pooled = cs::pool_rows(rows, method);
    const double cov = pooled.marginal.coverage();
    o.pass = o.pass && cov >= floor;
    o.detail += fmt("%s %s=%.4f ", label.c_str(), std::string(method).c_str(), cov);
  }
  return o;
}

Outcome merge(const std::vector<Outcome>& parts, const std::string& suffix = "") {
  Outcome o{true, ""};
  for (const auto& p : parts) {
    o.pass = o.pass && p.pass;
    o.detail += p.detail;
  }
  o.detail += suffix;
  return o;
}

Outcome marginal_coverage() {
  std::vector<Outcome> parts;
  for (double a : {1.1, 1.5, 2.0}) parts.push_back(coverage_check(zipf_runs(a, 1), fmt("a=%.1f", a)));
  return merge(parts, fmt("(floor %.4f)", 0.95 - 3 * kCoverageSe));
}

Outcome conditional_coverage() {
  Outcome o{true, ""};
  std::size_t checked = 0;
  double worst_margin = 1.0;
  std::string worst;
  for (double a : {1.1, 1.5, 2.0}) {
    const auto& rows = zipf_runs(a, 5);
    for (auto method : {cs::kMethodFixed, cs::kMethodAdaptive}) {
      const auto pooled = cs::pool_rows(rows, method);
      for (std::size_t l = 0; l < pooled.bins.size(); ++l) {
        const auto& b = pooled.bins[l];
        if (b.queries < 200) continue;
        ++checked;
        const double floor = 0.95 - 3 * tu::binomial_se(0.95, static_cast<double>(b.queries));
        const double margin = b.coverage() - floor;
        if (margin < worst_margin) {
          worst_margin = margin;
          worst = fmt("a=%.1f %s bin%zu cov=%.4f n=%llu", a, std::string(method).c_str(), l + 1,
                      b.coverage(), static_cast<unsigned long long>(b.queries));
        }
        o.pass = o.pass && margin >= 0;
      }
    }
  }
  o.detail = fmt("%zu bins checked; tightest: %s (margin %+.4f)", checked, worst.c_str(),
                 worst_margin);
  return o;
}

Outcome efficiency() {
  Outcome o{true, ""};
  for (double a : {1.5, 2.0}) {
    const auto& rows = zipf_runs(a, 1);
    const double classical = cs::pool_rows(rows, cs::kMethodClassical).marginal.mean_length();
    const double fixed = cs::pool_rows(rows, cs::kMethodFixed).marginal.mean_length();
    const double adaptive = cs::pool_rows(rows, cs::kMethodAdaptive).marginal.mean_length();
    o.pass = o.pass && fixed < classical && adaptive < classical && classical <= 259.0;
    o.detail += fmt("a=%.1f fixed=%.2f adaptive=%.2f classical=%.2f ", a, fixed, adaptive, classical);
  }
  o.detail += fmt("(slack %llu)", static_cast<unsigned long long>(cs::classical_slack(95000, 1000)));
  return o;
}

Outcome pitman_yor_coverage() {
  std::vector<Outcome> parts;
  for (double sigma : {0.0, 0.25, 0.5}) {
    auto c = reference_setup();
    c.stream.source = cs::SourceKind::kPitmanYor;
    c.stream.py_lambda = 5000;
    c.stream.py_sigma = sigma;
    parts.push_back(coverage_check(run_cached(fmt("py sigma=%.2f", sigma), c),
                                   fmt("sigma=%.2f", sigma)));
  }
  return merge(parts);
}

Outcome calibration_oracle() {
  cs::SplitMix64 rng(7007);
  const double alphas[] = {0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 0.9};
  std::size_t mismatches = 0;
  std::size_t saturated = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const double alpha = alphas[rng.below(std::size(alphas))];
    const std::uint64_t grid_max = 50 + rng.below(100);
    const bool split = rng.below(2);
    const cs::FrequencyPartition partition =
        split ? cs::FrequencyPartition({0, 3, 12, grid_max}) : cs::FrequencyPartition::single(grid_max);
    // Small sets exercise the k > n branch.
    std::vector<cs::ScoredLabel> scores(rng.below(2) ? rng.below(8) : rng.below(400));
    for (auto& s : scores) s = {rng.below(grid_max + 1), rng.below(grid_max + 1)};
    const auto got = cs::calibrate(scores, partition, alpha, grid_max);

    std::uint64_t q_star = 0;
    for (std::size_t l = 0; l < partition.bins(); ++l) {
      std::vector<std::uint64_t> bin;
      for (const auto& s : scores) {
        if (s.label >= partition.bin_low(l) && s.label <= partition.bin_high(l)) {
          bin.push_back(s.score);
        }
      }
      const auto ref = tu::reference_threshold(bin, alpha, grid_max);
      saturated += tu::reference_rank(bin.size(), alpha) > bin.size();
      mismatches += got.per_bin[l] != ref;
      q_star = std::max(q_star, ref);
    }
    mismatches += got.q_star != q_star;
  }
  return {mismatches == 0 && saturated > 0,
          fmt("%zu mismatches, %zu saturated bins exercised", mismatches, saturated)};
}

Outcome duality() {
  const std::uint64_t grid_max = 20;
  // A fitted adaptive model with a non-trivial table.
  std::vector<cs::CalibrationPair> training;
  cs::SplitMix64 rng(8008);
  for (std::size_t i = 0; i < 400; ++i) {
    const std::uint64_t u = rng.below(21);
    training.push_back({"z", u, u - std::min(u, rng.below(8)), i});
  }
  auto model = std::make_shared<const cs::ResidualQuantileModel>(
      cs::ResidualQuantileModel::fit(training, grid_max, {.levels = 10, .feature_bins = 4}));
  const cs::NestedRule rules[] = {cs::NestedRule::fixed_lower(grid_max),
                                  cs::NestedRule::adaptive_lower(model)};
  std::size_t checks = 0;
  std::size_t violations = 0;
  for (const auto& rule : rules) {
    for (std::uint64_t u = 0; u <= 20; ++u) {
      for (std::uint64_t y = 0; y <= u; ++y) {
        const auto score = cs::conformity_score(rule, u, y);
        for (std::uint64_t q = 0; q <= 20; ++q) {
          ++checks;
          violations += (!rule.contains(u, y, q)) != (score > q);
        }
      }
    }
  }
  return {violations == 0, fmt("%zu checks, %zu violations", checks, violations)};
}

Outcome two_sided() {
  auto c = zipf_config(1.5, 1);
  c.conformal.two_sided = true;
  c.conformal.rule = cs::RuleSelection::kFixed;
  const auto& rows = run_cached("zipf a=1.5 two-sided", c);
  const auto two = cs::pool_rows(rows, cs::kMethodTwoSided).marginal;
  const auto one = cs::pool_rows(rows, cs::kMethodFixed).marginal;
  const auto half = cs::pool_rows(rows, cs::kMethodFixedHalfAlpha).marginal;
  const double slack = static_cast<double>(
      cs::classical_slack(c.stream.length - c.stream.warmup, c.sketch.width));
  const double floor = 0.95 - 3 * kCoverageSe;
  const bool pass = two.coverage() >= floor && two.mean_length() <= one.mean_length() + slack &&
                    two.mean_length() <= half.mean_length();
  return {pass, fmt("coverage=%.4f (floor %.4f) length two-sided=%.2f one-sided=%.2f "
                    "one-sided@alpha/2=%.2f slack=%.0f",
                    two.coverage(), floor, two.mean_length(), one.mean_length(),
                    half.mean_length(), slack)};
}

Outcome generators() {
  cs::ZipfSampler zipf(2.0);
  cs::SplitMix64 rng(9009);
  const int n = 1'000'000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += zipf(rng) == 1.0;
  const double p1 = 6.0 / (std::numbers::pi * std::numbers::pi);
  const double p_hat = static_cast<double>(ones) / n;
  const bool zipf_ok = std::abs(p_hat - p1) <= 3 * tu::binomial_se(p1, n);

  // Dirichlet-process urn: K_n is a sum of independent Bernoulli(lambda / (lambda + i)).
  const double lambda = 5000;
  const int draws = 100000;
  const int sims = 40;
  double mean = 0.0;
  double var = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double p = lambda / (lambda + i);
    mean += p;
    var += p * (1 - p);
  }
  double sum = 0.0;
  for (int s = 0; s < sims; ++s) {
    cs::PitmanYorSampler py(lambda, 0.0, 500 + s);
    for (int i = 0; i < draws; ++i) py.next();
    sum += static_cast<double>(py.distinct());
  }
  const double k_hat = sum / sims;
  const double se = std::sqrt(var / sims);
  const bool py_ok = std::abs(k_hat - mean) <= 3 * se;
  return {zipf_ok && py_ok,
          fmt("zipf P(1)=%.5f vs %.5f (3se %.5f); py K=%.1f vs %.1f (3se %.1f)", p_hat, p1,
              3 * tu::binomial_se(p1, n), k_hat, mean, 3 * se)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome determinism(const std::string& cli, const fs::path& work_dir) {
  auto c = zipf_config(1.5, 5);
  c.stream.length = 30000;
  c.stream.warmup = 2000;
  c.stream.query_count = 3000;
  c.repetitions = 4;
  c.conformal.two_sided = true;
  auto render = [&](const char* threads) {
    ::setenv("CONFSKETCH_THREADS", threads, 1);
    std::ostringstream out;
    const auto rows = cs::run_experiment(c);
    cs::write_metrics_csv(out, c, rows);
    return out.str();
  };
  const std::string first = render("1");
  const std::string second = render("4");
  ::unsetenv("CONFSKETCH_THREADS");
  bool pass = first == second && !first.empty();
  std::string detail = fmt("library: %zu bytes, %s", first.size(), pass ? "identical" : "differ");

  if (!cli.empty()) {
    fs::create_directories(work_dir);
    const auto cfg = work_dir / "config.json";
    std::ofstream(cfg) << R"({"source": "zipf", "zipf_a": 1.5, "m": 30000, "m0": 2000,)"
                       << R"( "query_count": 3000, "bins": 5, "repetitions": 4, "two_sided": true})";
    bool cli_ok = true;
    for (const char* name : {"a.csv", "b.csv"}) {
      const std::string cmd = "\"" + cli + "\" experiment -c \"" + cfg.string() + "\" -o \"" +
                              (work_dir / name).string() + "\"";
      cli_ok = cli_ok && std::system(cmd.c_str()) == 0;
    }
    const auto a = slurp(work_dir / "a.csv");
    cli_ok = cli_ok && !a.empty() && a == slurp(work_dir / "b.csv");
    pass = pass && cli_ok;
    detail += fmt("; cli: %zu bytes, %s", a.size(), cli_ok ? "identical" : "differ");
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work_dir = fs::temp_directory_path() / "confsketch_acceptance";
  int only = 0;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") cli = argv[i + 1];
    else if (flag == "--work-dir") work_dir = argv[i + 1];
    else if (flag == "--only") only = std::atoi(argv[i + 1]);
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dominance oracle", dominance},
      {"conservative update tightness", cu_tightness},
      {"marginal coverage (zipf)", marginal_coverage},
      {"frequency-range conditional coverage", conditional_coverage},
      {"interval efficiency ordering", efficiency},
      {"pitman-yor coverage", pitman_yor_coverage},
      {"calibration oracle", calibration_oracle},
      {"score/interval duality", duality},
      {"two-sided bonferroni", two_sided},
      {"generator correctness", generators},
      {"determinism", [&] { return determinism(cli, work_dir); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<int>(i + 1) != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("[%s] %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
