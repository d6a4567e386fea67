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

#include "confsketch/calibration_io.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

#include "confsketch/error.hpp"

namespace confsketch {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "confsketch-calibration";
constexpr int kVersion = 1;

json threshold_to_json(const CalibratedThreshold& t) {
  json bins = json::array();
  for (std::size_t l = 0; l < t.per_bin.size(); ++l) {
    bins.push_back({{"n", t.n_per_bin[l]}, {"threshold", t.per_bin[l]}});
  }
  return {{"alpha", t.alpha}, {"grid_max", t.grid_max}, {"q_star", t.q_star}, {"bins", bins}};
}

CalibratedThreshold threshold_from_json(const json& j, std::size_t expected_bins) {
  CalibratedThreshold t;
  t.alpha = j.at("alpha").get<double>();
  t.grid_max = j.at("grid_max").get<std::uint64_t>();
  t.q_star = j.at("q_star").get<std::uint64_t>();
  for (const auto& b : j.at("bins")) {
    t.n_per_bin.push_back(b.at("n").get<std::size_t>());
    t.per_bin.push_back(b.at("threshold").get<std::uint64_t>());
  }
  if (t.per_bin.size() != expected_bins) throw InputError("calibration: bin count mismatch");
  return t;
}

}  // namespace

ConfidenceInterval CalibrationArtifact::interval(std::uint64_t feature,
                                                 std::uint64_t warmup_offset) const {
  if (!upper) return one_sided_interval(lower_rule, lower, feature, warmup_offset);
  TwoSidedCalibration cal{alpha, lower, *upper};
  return two_sided_interval(lower_rule, NestedRule::fixed_upper(upper->grid_max), cal, feature,
                            warmup_offset);
}

void write_calibration(std::ostream& out, const CalibrationArtifact& a) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["alpha"] = a.alpha;
  doc["mode"] = a.two_sided() ? "two_sided" : "one_sided";
  doc["partition"] = a.partition.edges();
  json lower = threshold_to_json(a.lower);
  lower["rule"] = std::string(to_string(a.lower_rule.kind()));
  if (const auto* model = a.lower_rule.model()) {
    lower["model"] = {{"levels", model->levels()},
                      {"grid_max", model->grid_max()},
                      {"upper_edges", model->upper_edges()},
                      {"table", model->table()}};
  }
  doc["lower"] = lower;
  if (a.upper) {
    json upper = threshold_to_json(*a.upper);
    upper["rule"] = std::string(to_string(RuleKind::kFixedUpper));
    doc["upper"] = upper;
  }
  out << doc.dump(2) << '\n';
  if (!out) throw InputError("failed to write calibration");
}

CalibrationArtifact read_calibration(std::istream& in) {
  try {
    const json doc = json::parse(in);
    if (doc.at("format").get<std::string>() != kFormat || doc.at("version").get<int>() != kVersion) {
      throw InputError("calibration: unsupported format");
    }
    CalibrationArtifact a;
    a.alpha = doc.at("alpha").get<double>();
    a.partition = FrequencyPartition(doc.at("partition").get<std::vector<std::uint64_t>>());
    const json& lower = doc.at("lower");
    a.lower = threshold_from_json(lower, a.partition.bins());
    switch (parse_rule_kind(lower.at("rule").get<std::string>())) {
      case RuleKind::kFixedLower:
        a.lower_rule = NestedRule::fixed_lower(a.lower.grid_max);
        break;
      case RuleKind::kAdaptiveLower: {
        const json& m = lower.at("model");
        auto model = ResidualQuantileModel::from_table(
            m.at("upper_edges").get<std::vector<std::uint64_t>>(),
            m.at("table").get<std::vector<std::uint64_t>>(), m.at("levels").get<std::size_t>(),
            m.at("grid_max").get<std::uint64_t>());
        a.lower_rule =
            NestedRule::adaptive_lower(std::make_shared<const ResidualQuantileModel>(std::move(model)));
        break;
      }
      case RuleKind::kFixedUpper:
        throw InputError("calibration: lower side cannot use fixed_upper");
    }
    if (doc.contains("upper")) a.upper = threshold_from_json(doc.at("upper"), a.partition.bins());
    return a;
  } catch (const json::exception& e) {
    throw InputError(std::string("calibration: ") + e.what());
  } catch (const ConfigError& e) {
    throw InputError(std::string("calibration: ") + e.what());
  }
}

}  // namespace confsketch
