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

#include "confsketch/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "confsketch/error.hpp"

namespace confsketch {

std::string_view to_string(SourceKind kind) noexcept {
  switch (kind) {
    case SourceKind::kZipf:
      return "zipf";
    case SourceKind::kPitmanYor:
      return "pitman_yor";
    case SourceKind::kFile:
      return "file";
  }
  return "unknown";
}

SourceKind parse_source_kind(std::string_view name) {
  if (name == "zipf") return SourceKind::kZipf;
  if (name == "pitman_yor") return SourceKind::kPitmanYor;
  if (name == "file") return SourceKind::kFile;
  throw ConfigError("unknown stream source '" + std::string(name) + "'");
}

void StreamSpec::validate() const {
  switch (source) {
    case SourceKind::kZipf:
      if (!(zipf_a > 1.0) || !std::isfinite(zipf_a)) throw ConfigError("zipf_a must be > 1");
      break;
    case SourceKind::kPitmanYor:
      if (!(py_lambda > 0.0) || !std::isfinite(py_lambda)) {
        throw ConfigError("py_lambda must be > 0");
      }
      if (!(py_sigma >= 0.0 && py_sigma < 1.0)) throw ConfigError("py_sigma must lie in [0, 1)");
      break;
    case SourceKind::kFile:
      if (path.empty()) throw ConfigError("file source needs an input path");
      break;
  }
  if (warmup >= length) throw ConfigError("warm-up length m0 must be smaller than m");
  if (query_count == 0) throw ConfigError("query_count must be at least 1");
}

// ---------------------------------------------------------------------------

ZipfSampler::ZipfSampler(double a) : a_(a) {
  if (!(a > 1.0) || !std::isfinite(a)) throw ConfigError("Zipf exponent must be > 1");
  b_ = std::exp2(a - 1.0);
}

double ZipfSampler::operator()(SplitMix64& rng) const {
  const double am1 = a_ - 1.0;
  for (;;) {
    const double u = rng.uniform_open_zero();
    const double v = rng.uniform();
    const double x = std::floor(std::pow(u, -1.0 / am1));
    if (!std::isfinite(x)) continue;
    // t = (1 + 1/x)^(a-1), with t - 1 computed without cancellation.
    const double log_t = am1 * std::log1p(1.0 / x);
    const double t = std::exp(log_t);
    if (v * x * std::expm1(log_t) / (b_ - 1.0) <= t / b_) return x;
  }
}

std::string integer_token(double value) {
  if (value < 0x1.0p63) return std::to_string(static_cast<std::uint64_t>(value));
  char buf[400];
  std::snprintf(buf, sizeof buf, "%.0f", value);
  return buf;
}

std::vector<std::string> zipf_stream(double a, std::size_t count, std::uint64_t seed) {
  ZipfSampler sampler(a);
  SplitMix64 rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(integer_token(sampler(rng)));
  return out;
}

// ---------------------------------------------------------------------------

PitmanYorSampler::PitmanYorSampler(double lambda, double sigma, std::uint64_t seed)
    : lambda_(lambda), sigma_(sigma), rng_(seed) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be > 0");
  if (!(sigma >= 0.0 && sigma < 1.0)) throw ConfigError("sigma must lie in [0, 1)");
}

std::uint64_t PitmanYorSampler::next() {
  const double i = static_cast<double>(draws_);
  const double k = static_cast<double>(cluster_count_);
  const double u = rng_.uniform() * (lambda_ + i);
  ++draws_;
  const double new_weight = lambda_ + k * sigma_;
  if (draws_ == 1 || u < new_weight) return ++cluster_count_;

  // Existing mass i - k sigma splits as k (1 - sigma) spread evenly over the
  // clusters plus one unit per earlier repeat, which together give each
  // cluster its weight c_l - sigma.
  const double v = u - new_weight;
  const double even = k * (1.0 - sigma_);
  std::uint64_t cluster = 0;
  if (v < even || repeats_.empty()) {
    cluster = std::min(static_cast<std::uint64_t>(v / (1.0 - sigma_)), cluster_count_ - 1) + 1;
  } else {
    const auto idx = std::min(static_cast<std::size_t>(v - even), repeats_.size() - 1);
    cluster = repeats_[idx];
  }
  repeats_.push_back(cluster);
  return cluster;
}

std::vector<std::string> pitman_yor_stream(double lambda, double sigma, std::size_t count,
                                           std::uint64_t seed) {
  PitmanYorSampler sampler(lambda, sigma, seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(std::to_string(sampler.next()));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> read_tokens(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(std::move(line));
  }
  if (in.bad()) throw InputError("error reading '" + path + "'");
  if (tokens.empty()) throw InputError("'" + path + "' holds no tokens");
  return tokens;
}

void shuffle_tokens(std::vector<std::string>& tokens, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = tokens.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(tokens[i - 1], tokens[j]);
  }
}

std::vector<std::string> ingest_file(const std::string& path, std::uint64_t seed) {
  auto tokens = read_tokens(path);
  shuffle_tokens(tokens, seed);
  return tokens;
}

std::vector<std::string> generate_items(const StreamSpec& spec, std::size_t count,
                                        std::uint64_t seed) {
  switch (spec.source) {
    case SourceKind::kZipf:
      return zipf_stream(spec.zipf_a, count, seed);
    case SourceKind::kPitmanYor:
      return pitman_yor_stream(spec.py_lambda, spec.py_sigma, count, seed);
    case SourceKind::kFile: {
      auto tokens = ingest_file(spec.path, seed);
      if (tokens.size() < count) {
        throw InputError("'" + spec.path + "' holds " + std::to_string(tokens.size()) +
                         " tokens, need " + std::to_string(count));
      }
      tokens.resize(count);
      return tokens;
    }
  }
  return {};
}

}  // namespace confsketch
