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

// confsketch command line: generate | experiment | sketch | calibrate | query

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "confsketch/calibration_io.hpp"
#include "confsketch/datagen.hpp"
#include "confsketch/error.hpp"
#include "confsketch/harness.hpp"

namespace fs = std::filesystem;
using namespace confsketch;

namespace {

constexpr const char* kSketchFile = "sketch.bin";
constexpr const char* kTrackerFile = "tracker.tsv";
constexpr const char* kCalibrationFile = "calibration.json";

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

void write_tokens(const fs::path& path, std::span<const std::string> tokens) {
  auto out = open_out(path, std::ios::binary);
  for (const auto& t : tokens) out << t << '\n';
}

StreamState load_state(const fs::path& dir) {
  auto sketch_in = open_in(dir / kSketchFile, std::ios::binary);
  auto tracker_in = open_in(dir / kTrackerFile, std::ios::binary);
  return StreamState{CountMinSketch::deserialize(sketch_in), ExactTracker::deserialize(tracker_in)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Count-min sketches with conformal confidence intervals"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic stream as newline-delimited tokens");
  std::string gen_out, gen_queries;
  gen->add_option("-c,--config", config_path, "experiment config (JSON)");
  gen->add_option("--seed", seed, "override the stream seed");
  gen->add_option("-o,--out", gen_out, "stream file (m tokens)")->required();
  gen->add_option("--queries", gen_queries, "also write query_count continuation tokens here");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run the coverage/length experiment, write CSV");
  std::string exp_out;
  exp->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  exp->add_option("--seed", seed, "override the stream seed");
  exp->add_option("-o,--output", exp_out, "CSV path (default: config output, else stdout)");

  // sketch
  auto* sk = app.add_subcommand("sketch", "sketch a stream file and persist sketch + tracker");
  std::string sk_input, state_dir;
  std::optional<std::uint64_t> sk_m0, sk_master_seed;
  std::optional<std::size_t> sk_d, sk_w;
  std::optional<std::string> sk_variant;
  bool sk_shuffle = false;
  sk->add_option("-c,--config", config_path, "config supplying m0 and sketch settings");
  sk->add_option("-i,--input", sk_input, "newline-delimited token file")->required();
  sk->add_option("-s,--state", state_dir, "output directory")->required();
  sk->add_option("--m0", sk_m0, "warm-up length");
  sk->add_option("--variant", sk_variant, "cms | cms_cu | cms_cu_single");
  sk->add_option("-d,--depth", sk_d, "number of hash rows");
  sk->add_option("-w,--width", sk_w, "buckets per row");
  sk->add_option("--master-seed", sk_master_seed, "hash family seed");
  sk->add_flag("--shuffle", sk_shuffle, "shuffle tokens (Fisher-Yates, --seed) before sketching");
  sk->add_option("--seed", seed, "shuffle seed (default: config seed)");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit conformal thresholds from a persisted state");
  std::string cal_out, cal_rule = "fixed";
  std::optional<double> cal_alpha;
  std::optional<std::size_t> cal_bins;
  bool cal_two_sided = false;
  cal->add_option("-c,--config", config_path, "config supplying conformal settings");
  cal->add_option("-s,--state", state_dir, "state directory from `sketch`")->required();
  cal->add_option("--rule", cal_rule, "fixed | adaptive")->check(CLI::IsMember({"fixed", "adaptive"}));
  cal->add_option("--alpha", cal_alpha, "miscoverage level");
  cal->add_option("--bins", cal_bins, "number of frequency bins");
  cal->add_flag("--two-sided", cal_two_sided, "Bonferroni two-sided intervals");
  cal->add_option("-o,--out", cal_out, "output (default: <state>/calibration.json)");

  // query
  auto* qry = app.add_subcommand("query", "read items from stdin, print item TAB lower TAB upper");
  std::string qry_cal;
  qry->add_option("-s,--state", state_dir, "state directory")->required();
  qry->add_option("--calibration", qry_cal, "calibration file (default: <state>/calibration.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto config = config_or_default(config_path);
      if (seed) config.stream.seed = *seed;
      config.stream.validate();
      const std::size_t m = config.stream.length;
      const std::size_t total = m + (gen_queries.empty() ? 0 : config.stream.query_count);
      const auto items = generate_items(config.stream, total, config.stream.seed);
      write_tokens(gen_out, std::span(items).first(m));
      if (!gen_queries.empty()) write_tokens(gen_queries, std::span(items).subspan(m));
    } else if (exp->parsed()) {
      auto config = load_config(config_path);
      if (seed) config.stream.seed = *seed;
      if (!exp_out.empty()) config.output = exp_out;
      const auto rows = run_experiment(config);
      if (config.output.empty()) {
        write_metrics_csv(std::cout, config, rows);
      } else {
        auto out = open_out(config.output, std::ios::binary);
        write_metrics_csv(out, config, rows);
      }
    } else if (sk->parsed()) {
      auto config = config_or_default(config_path);
      if (seed) config.stream.seed = *seed;
      if (sk_m0) config.stream.warmup = *sk_m0;
      if (sk_variant) config.sketch.variant = parse_variant(*sk_variant);
      if (sk_d) config.sketch.depth = *sk_d;
      if (sk_w) config.sketch.width = *sk_w;
      if (sk_master_seed) config.sketch.master_seed = *sk_master_seed;
      auto tokens = read_tokens(sk_input);
      if (sk_shuffle) shuffle_tokens(tokens, config.stream.seed);
      if (config.stream.warmup >= tokens.size()) {
        throw ConfigError("m0 must be smaller than the stream length");
      }
      const auto state = absorb_stream(tokens, config.stream.warmup, config.sketch);
      fs::create_directories(state_dir);
      auto sketch_out = open_out(fs::path(state_dir) / kSketchFile, std::ios::binary);
      state.sketch.serialize(sketch_out);
      auto tracker_out = open_out(fs::path(state_dir) / kTrackerFile, std::ios::binary);
      state.tracker.serialize(tracker_out);
    } else if (cal->parsed()) {
      auto config = config_or_default(config_path);
      if (cal_alpha) config.conformal.alpha = *cal_alpha;
      if (cal_bins) config.conformal.bins = *cal_bins;
      if (cal_two_sided) config.conformal.two_sided = true;
      const auto state = load_state(state_dir);
      const auto kind = cal_rule == "adaptive" ? RuleKind::kAdaptiveLower : RuleKind::kFixedLower;
      const auto artifact = calibrate_state(state, config.conformal, kind);
      const fs::path out_path = cal_out.empty() ? fs::path(state_dir) / kCalibrationFile : fs::path(cal_out);
      auto out = open_out(out_path);
      write_calibration(out, artifact);
    } else if (qry->parsed()) {
      const auto state = load_state(state_dir);
      const fs::path cal_path = qry_cal.empty() ? fs::path(state_dir) / kCalibrationFile : fs::path(qry_cal);
      auto cal_in = open_in(cal_path);
      const auto artifact = read_calibration(cal_in);
      std::string line;
      while (std::getline(std::cin, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto ci =
            artifact.interval(state.sketch.query_upper(line), state.tracker.warmup_count(line));
        std::cout << line << '\t' << ci.lower << '\t' << ci.upper << '\n';
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
