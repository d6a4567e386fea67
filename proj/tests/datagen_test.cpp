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
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <gtest/gtest.h>

#include "confsketch/error.hpp"
#include "test_util.hpp"

namespace confsketch {
namespace {

namespace fs = std::filesystem;

std::size_t distinct(const std::vector<std::string>& v) {
  return std::unordered_set<std::string>(v.begin(), v.end()).size();
}

// E[K_n] for the two-parameter urn, via log-gamma.
double expected_clusters(double lambda, double sigma, int n) {
  if (sigma == 0.0) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += lambda / (lambda + i);
    return s;
  }
  const double log_ratio = std::lgamma(lambda + sigma + n) + std::lgamma(lambda + 1) -
                           std::lgamma(lambda + sigma) - std::lgamma(lambda + n);
  return std::exp(log_ratio) / sigma - lambda / sigma;
}

class TempFile {
 public:
  explicit TempFile(const std::string& contents) {
    path_ = fs::temp_directory_path() /
            ("confsketch_datagen_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::ofstream(path_, std::ios::binary) << contents;
  }
  ~TempFile() { fs::remove(path_); }
  std::string path() const { return path_.string(); }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------

TEST(Zipf, RankMassMatchesZetaTwo) {
  ZipfSampler sampler(2.0);
  SplitMix64 rng(41);
  const int n = 1'000'000;
  int ones = 0;
  int twos = 0;
  for (int i = 0; i < n; ++i) {
    const double x = sampler(rng);
    ASSERT_GE(x, 1.0);
    ASSERT_EQ(x, std::floor(x));
    ones += x == 1.0;
    twos += x == 2.0;
  }
  const double p1 = 6.0 / (std::numbers::pi * std::numbers::pi);
  EXPECT_NEAR(static_cast<double>(ones) / n, p1, 3 * testing_util::binomial_se(p1, n));
  EXPECT_NEAR(static_cast<double>(twos) / n, p1 / 4, 3 * testing_util::binomial_se(p1 / 4, n));
}

TEST(Zipf, HeavierTailGivesMoreDistinctItems) {
  const auto light = zipf_stream(2.0, 100000, 5);
  const auto heavy = zipf_stream(1.1, 100000, 5);
  EXPECT_GT(distinct(heavy), distinct(light));
}

TEST(Zipf, DeterministicPerSeed) {
  EXPECT_EQ(zipf_stream(1.5, 5000, 9), zipf_stream(1.5, 5000, 9));
  EXPECT_NE(zipf_stream(1.5, 5000, 9), zipf_stream(1.5, 5000, 10));
}

TEST(Zipf, RejectsExponentAtMostOne) {
  EXPECT_THROW(ZipfSampler(1.0), ConfigError);
  EXPECT_THROW(ZipfSampler(0.5), ConfigError);
  EXPECT_THROW(ZipfSampler(std::nan("")), ConfigError);
}

TEST(Zipf, LargeValuesRenderAsIntegers) {
  EXPECT_EQ(integer_token(1.0), "1");
  EXPECT_EQ(integer_token(123456789.0), "123456789");
  EXPECT_EQ(integer_token(1e20), "100000000000000000000");
}

// ---------------------------------------------------------------------------

TEST(PitmanYor, SecondDrawRepeatsWithProbabilityHalf) {
  const int sims = 100000;
  int repeats = 0;
  for (int s = 0; s < sims; ++s) {
    PitmanYorSampler py(1.0, 0.0, 1000 + s);
    const auto first = py.next();
    repeats += py.next() == first;
  }
  EXPECT_NEAR(static_cast<double>(repeats) / sims, 0.5, 3 * testing_util::binomial_se(0.5, sims));
}

TEST(PitmanYor, ExpectedClusterCount) {
  const int n = 200;
  const int sims = 4000;
  for (const auto [lambda, sigma] : {std::pair{5.0, 0.0}, std::pair{5.0, 0.25}, std::pair{2.0, 0.5}}) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int s = 0; s < sims; ++s) {
      PitmanYorSampler py(lambda, sigma, 77 + s);
      for (int i = 0; i < n; ++i) py.next();
      const double k = static_cast<double>(py.distinct());
      sum += k;
      sum_sq += k * k;
    }
    const double mean = sum / sims;
    const double se = std::sqrt((sum_sq / sims - mean * mean) / sims);
    EXPECT_NEAR(mean, expected_clusters(lambda, sigma, n), 4 * se) << lambda << " " << sigma;
  }
}

TEST(PitmanYor, LabelsAreConsecutive) {
  PitmanYorSampler py(50.0, 0.3, 3);
  std::uint64_t highest = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto id = py.next();
    ASSERT_GE(id, 1u);
    ASSERT_LE(id, highest + 1);
    highest = std::max(highest, id);
  }
  EXPECT_EQ(highest, py.distinct());
  EXPECT_EQ(py.draws(), 20000u);
}

TEST(PitmanYor, DeterminismAndErrors) {
  EXPECT_EQ(pitman_yor_stream(5000, 0.25, 3000, 4), pitman_yor_stream(5000, 0.25, 3000, 4));
  EXPECT_THROW(PitmanYorSampler(0.0, 0.0, 1), ConfigError);
  EXPECT_THROW(PitmanYorSampler(1.0, 1.0, 1), ConfigError);
  EXPECT_THROW(PitmanYorSampler(1.0, -0.1, 1), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(FileIngest, ShuffleIsDeterministicPermutation) {
  std::string contents;
  std::vector<std::string> expected;
  for (int i = 0; i < 500; ++i) {
    expected.push_back("tok" + std::to_string(i % 37));
    contents += expected.back() + (i % 3 == 0 ? "\r\n" : "\n");
  }
  contents += "\n\n";
  TempFile file(contents);

  EXPECT_EQ(read_tokens(file.path()), expected);
  const auto a = ingest_file(file.path(), 8);
  const auto b = ingest_file(file.path(), 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, expected);
  auto sorted_a = a;
  auto sorted_e = expected;
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_e.begin(), sorted_e.end());
  EXPECT_EQ(sorted_a, sorted_e);
}

TEST(FileIngest, Errors) {
  EXPECT_THROW(read_tokens("/nonexistent/confsketch/tokens.txt"), InputError);
  TempFile empty("\n\r\n");
  EXPECT_THROW(read_tokens(empty.path()), InputError);

  TempFile small("a\nb\nc\n");
  StreamSpec spec;
  spec.source = SourceKind::kFile;
  spec.path = small.path();
  EXPECT_EQ(generate_items(spec, 2, 1).size(), 2u);
  EXPECT_THROW(generate_items(spec, 4, 1), InputError);
}

TEST(StreamSpec, Validation) {
  StreamSpec spec;
  EXPECT_NO_THROW(spec.validate());
  spec.warmup = spec.length;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.query_count = 0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.source = SourceKind::kFile;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_EQ(parse_source_kind("pitman_yor"), SourceKind::kPitmanYor);
  EXPECT_THROW(parse_source_kind("uniform"), ConfigError);
}

}  // namespace
}  // namespace confsketch
