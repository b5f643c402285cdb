/*
 * Copyright 2026 The biasaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Report assembly: canonical JSON, CSV flattening and the metric-table
// files exchanged between `audit` and `transfer`.

#ifndef BIASAUDIT_REPORT_H_
#define BIASAUDIT_REPORT_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "biasaudit/local_bias.h"
#include "biasaudit/measurement.h"
#include "biasaudit/transfer_stats.h"
#include "nlohmann/json.hpp"

namespace biasaudit {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class ReportFormat { kJson, kCsv };

absl::StatusOr<ReportFormat> ParseReportFormat(std::string_view name);

struct BiasReport {
  std::string command;
  // Effective configuration after merging the config file and flags.
  nlohmann::json params = nlohmann::json::object();
  // Input path -> SHA-256 of its bytes.
  std::map<std::string, std::string> input_digests;
  nlohmann::json results = nlohmann::json::object();
  double elapsed_seconds = 0.0;
};

// {"value": v} or {"value": null, "reason": why}.
nlohmann::json MeasurementJson(const Measurement& measurement);
nlohmann::json OptionalJson(const std::optional<double>& value);
nlohmann::json CorrelationJson(const CorrelationResult& result);

// Keys sorted, floats in shortest round-trip form, two-space indent.
// Non-finite numbers are rejected rather than written.
absl::StatusOr<std::string> CanonicalJson(const nlohmann::json& json);

nlohmann::json ReportToJson(const BiasReport& report);
// One "path,value" row per scalar leaf of the report, sorted by path.
absl::StatusOr<std::string> ReportToCsv(const BiasReport& report);
absl::StatusOr<std::string> RenderReport(const BiasReport& report,
                                         ReportFormat format);
// Writes to `path`, or to stdout when it is empty or "-".
absl::Status EmitReport(const BiasReport& report, const std::string& path,
                        ReportFormat format);

// Digest of a file's contents, recorded under its path.
absl::Status AddInputDigest(BiasReport& report, const std::string& path);

// metric -> attribute -> model -> per-demographic values.
using PerDemographicTable = std::map<
    std::string, std::map<std::string, PerDemographicValues>>;
// metric -> attribute -> model -> reason for an undefined value.
using ReasonTable = std::map<
    std::string, std::map<std::string, std::map<std::string, std::string>>>;

struct MetricTables {
  MetricTable values;
  PerDemographicTable per_demographic;
  ReasonTable reasons;
  // attribute -> demographic names, in per-demographic vector order.
  std::map<std::string, std::vector<std::string>> demographics;
};

// {"values", "per_demographic", "reasons", "demographics"}.
nlohmann::json MetricTablesToJson(const MetricTables& tables);
// Accepts the object itself or a report whose "results" holds it.
absl::StatusOr<MetricTables> MetricTablesFromJson(const nlohmann::json& json);
absl::StatusOr<MetricTables> LoadMetricTables(const std::string& path);

// groups.json: {"groups": [{"id", "members", "clusters", "name"?}], ...}.
// GroupsFromJson also accepts a report whose "results" holds it.
nlohmann::json GroupsToJson(const GroupAssignment& groups);
absl::StatusOr<GroupAssignment> GroupsFromJson(const nlohmann::json& json);

// Grid with one row per metric and the columns "global" followed by group
// names (or ids), each cell holding rho and p.
nlohmann::json CorrelationGridJson(const GroupAssignment& groups,
                                   const std::vector<GroupCorrelation>& row,
                                   const std::string& metric);

}  // namespace biasaudit

#endif  // BIASAUDIT_REPORT_H_
