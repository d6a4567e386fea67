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
#include <string>
#include <vector>

#include "confsketch/random.hpp"

namespace confsketch {

enum class SourceKind { kZipf, kPitmanYor, kFile };

std::string_view to_string(SourceKind kind) noexcept;
SourceKind parse_source_kind(std::string_view name);

struct StreamSpec {
  SourceKind source = SourceKind::kZipf;
  double zipf_a = 1.5;
  double py_lambda = 5000.0;
  double py_sigma = 0.0;
  std::string path;
  std::uint64_t length = 100000;  // m, items sketched or tracked
  std::uint64_t warmup = 5000;    // m0
  std::uint64_t query_count = 10000;
  std::uint64_t seed = 1;

  // Throws ConfigError on invalid parameters.
  void validate() const;
};

// Exact Zipf(a) sampler on {1, 2, ...} with P(z) = z^-a / zeta(a), by
// rejection from a Pareto envelope (Devroye, Non-Uniform Random Variate
// Generation, X.6.1). Values above 2^53 lose integer precision; they are
// returned as the nearest double.
class ZipfSampler {
 public:
  explicit ZipfSampler(double a);  // throws ConfigError unless a > 1
  double operator()(SplitMix64& rng) const;
  double exponent() const noexcept { return a_; }

 private:
  double a_;
  double b_;  // 2^(a - 1)
};

// Decimal token for a sampled integer-valued double.
std::string integer_token(double value);

std::vector<std::string> zipf_stream(double a, std::size_t count, std::uint64_t seed);

// Sequential Pitman-Yor urn. After i draws with k distinct values and counts
// c_l, the next draw repeats value l with probability (c_l - sigma) /
// (lambda + i) and is new with probability (lambda + k sigma) / (lambda + i).
// New values get consecutive ids 1, 2, ... . One uniform is consumed per draw.
class PitmanYorSampler {
 public:
  PitmanYorSampler(double lambda, double sigma, std::uint64_t seed);

  std::uint64_t next();
  std::uint64_t draws() const noexcept { return draws_; }
  std::uint64_t distinct() const noexcept { return cluster_count_; }

 private:
  double lambda_;
  double sigma_;
  SplitMix64 rng_;
  std::uint64_t draws_ = 0;
  std::uint64_t cluster_count_ = 0;
  // Cluster id of every draw that repeated an existing value.
  std::vector<std::uint64_t> repeats_;
};

std::vector<std::string> pitman_yor_stream(double lambda, double sigma, std::size_t count,
                                           std::uint64_t seed);

// Newline-delimited tokens; trailing '\r' is stripped and empty lines are
// skipped. Throws InputError if the file is unreadable or holds no tokens.
std::vector<std::string> read_tokens(const std::string& path);

// In-place Fisher-Yates shuffle driven by SplitMix64(seed).
void shuffle_tokens(std::vector<std::string>& tokens, std::uint64_t seed);

std::vector<std::string> ingest_file(const std::string& path, std::uint64_t seed);

// `count` items from the StreamSpec source with the given seed. For kFile the
// shuffled file must hold at least `count` tokens.
std::vector<std::string> generate_items(const StreamSpec& spec, std::size_t count,
                                        std::uint64_t seed);

}  // namespace confsketch
