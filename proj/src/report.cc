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


#include "biasaudit/report.h"

#include <cmath>
#include <iostream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "biasaudit/io.h"
#include "biasaudit/status_macros.h"

namespace biasaudit {
namespace {

using Json = nlohmann::json;

absl::Status CheckFinite(const Json& json, const std::string& path) {
  if (json.is_number_float() && !std::isfinite(json.get<double>())) {
    return absl::InvalidArgumentError(
        absl::StrCat("non-finite number at ", path.empty() ? "/" : path));
  }
  if (json.is_structured()) {
    for (const auto& [key, value] : json.items()) {
      RETURN_IF_ERROR(CheckFinite(value, path + "/" + key));
    }
  }
  return absl::OkStatus();
}

std::string CsvField(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void Flatten(const Json& json, const std::string& path,
             std::vector<std::pair<std::string, std::string>>& rows) {
  if (json.is_object() || json.is_array()) {
    if (json.empty()) {
      rows.push_back({path, json.is_object() ? "{}" : "[]"});
      return;
    }
    for (const auto& [key, value] : json.items()) {
      Flatten(value, path.empty() ? key : path + "." + key, rows);
    }
    return;
  }
  rows.push_back({path, json.is_string() ? json.get<std::string>() : json.dump()});
}

absl::StatusOr<std::optional<double>> OptionalFromJson(const Json& json) {
  if (json.is_null()) return std::optional<double>();
  if (!json.is_number()) {
    return absl::InvalidArgumentError("metric value must be a number or null");
  }
  return std::optional<double>(json.get<double>());
}

}  // namespace

absl::StatusOr<ReportFormat> ParseReportFormat(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown format '", std::string(name), "' (json|csv)"));
}

Json MeasurementJson(const Measurement& measurement) {
  if (measurement.defined()) return Json{{"value", *measurement.value}};
  return Json{{"value", nullptr}, {"reason", measurement.reason}};
}

Json OptionalJson(const std::optional<double>& value) {
  return value ? Json(*value) : Json(nullptr);
}

Json CorrelationJson(const CorrelationResult& result) {
  Json out = {{"rho", result.rho},
              {"p", result.p},
              {"n", result.n},
              {"method", result.method},
              {"strength", std::string(CorrelationStrength(result.rho))}};
  if (result.p_standard_error > 0.0) {
    out["p_standard_error"] = result.p_standard_error;
  }
  return out;
}

absl::StatusOr<std::string> CanonicalJson(const Json& json) {
  RETURN_IF_ERROR(CheckFinite(json, ""));
  return json.dump(2) + "\n";
}

Json ReportToJson(const BiasReport& report) {
  Json inputs = Json::object();
  for (const auto& [path, digest] : report.input_digests) {
    inputs[path] = {{"sha256", digest}};
  }
  return Json{{"tool", {{"name", "biasaudit"}, {"version", kToolVersion}}},
              {"command", report.command},
              {"params", report.params},
              {"inputs", std::move(inputs)},
              {"results", report.results},
              {"timing", {{"elapsed_seconds", report.elapsed_seconds}}}};
}

absl::StatusOr<std::string> ReportToCsv(const BiasReport& report) {
  const Json json = ReportToJson(report);
  RETURN_IF_ERROR(CheckFinite(json, ""));
  std::vector<std::pair<std::string, std::string>> rows;
  Flatten(json, "", rows);
  std::sort(rows.begin(), rows.end());
  std::string out = "path,value\n";
  for (const auto& [path, value] : rows) {
    absl::StrAppend(&out, CsvField(path), ",", CsvField(value), "\n");
  }
  return out;
}

absl::StatusOr<std::string> RenderReport(const BiasReport& report,
                                         ReportFormat format) {
  if (format == ReportFormat::kCsv) return ReportToCsv(report);
  return CanonicalJson(ReportToJson(report));
}

absl::Status EmitReport(const BiasReport& report, const std::string& path,
                        ReportFormat format) {
  ASSIGN_OR_RETURN(const std::string text, RenderReport(report, format));
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return std::cout ? absl::OkStatus()
                     : absl::InternalError("cannot write report to stdout");
  }
  return WriteFile(path, text);
}

absl::Status AddInputDigest(BiasReport& report, const std::string& path) {
  ASSIGN_OR_RETURN(const std::string bytes, ReadFile(path));
  report.input_digests[path] = Sha256Hex(bytes);
  return absl::OkStatus();
}

Json MetricTablesToJson(const MetricTables& tables) {
  Json values = Json::object();
  for (const auto& [metric, by_attribute] : tables.values) {
    for (const auto& [attribute, by_model] : by_attribute) {
      Json& cell = values[metric][attribute];
      cell = Json::object();
      for (const auto& [model, value] : by_model) cell[model] = OptionalJson(value);
    }
  }
  Json per_demographic = Json::object();
  for (const auto& [metric, by_attribute] : tables.per_demographic) {
    for (const auto& [attribute, by_model] : by_attribute) {
      Json& cell = per_demographic[metric][attribute];
      cell = Json::object();
      for (const auto& [model, vector] : by_model) {
        Json list = Json::array();
        for (const auto& value : vector) list.push_back(OptionalJson(value));
        cell[model] = std::move(list);
      }
    }
  }
  Json reasons = Json::object();
  for (const auto& [metric, by_attribute] : tables.reasons) {
    for (const auto& [attribute, by_model] : by_attribute) {
      for (const auto& [model, reason] : by_model) {
        reasons[metric][attribute][model] = reason;
      }
    }
  }
  return Json{{"values", std::move(values)},
              {"per_demographic", std::move(per_demographic)},
              {"reasons", std::move(reasons)},
              {"demographics", tables.demographics}};
}

absl::StatusOr<MetricTables> MetricTablesFromJson(const Json& json) {
  const Json* root = &json;
  if (json.is_object() && json.contains("results")) root = &json.at("results");
  if (!root->is_object() || !root->contains("values") ||
      !root->at("values").is_object()) {
    return absl::InvalidArgumentError(
        "metric table needs an object member \"values\"");
  }
  MetricTables tables;
  for (const auto& [metric, by_attribute] : root->at("values").items()) {
    if (!by_attribute.is_object()) {
      return absl::InvalidArgumentError(
          absl::StrCat("values.", metric, " must be an object"));
    }
    for (const auto& [attribute, by_model] : by_attribute.items()) {
      if (!by_model.is_object()) {
        return absl::InvalidArgumentError(absl::StrCat(
            "values.", metric, ".", attribute, " must be an object"));
      }
      auto& cell = tables.values[metric][attribute];
      for (const auto& [model, value] : by_model.items()) {
        ASSIGN_OR_RETURN(cell[model], OptionalFromJson(value));
      }
    }
  }
  if (root->contains("per_demographic")) {
    for (const auto& [metric, by_attribute] : root->at("per_demographic").items()) {
      for (const auto& [attribute, by_model] : by_attribute.items()) {
        auto& cell = tables.per_demographic[metric][attribute];
        for (const auto& [model, list] : by_model.items()) {
          if (!list.is_array()) {
            return absl::InvalidArgumentError(absl::StrCat(
                "per_demographic.", metric, ".", attribute, ".", model,
                " must be an array"));
          }
          auto& vector = cell[model];
          for (const auto& value : list) {
            ASSIGN_OR_RETURN(auto parsed, OptionalFromJson(value));
            vector.push_back(parsed);
          }
        }
      }
    }
  }
  if (root->contains("reasons")) {
    for (const auto& [metric, by_attribute] : root->at("reasons").items()) {
      for (const auto& [attribute, by_model] : by_attribute.items()) {
        for (const auto& [model, reason] : by_model.items()) {
          if (!reason.is_string()) {
            return absl::InvalidArgumentError("reasons must be strings");
          }
          tables.reasons[metric][attribute][model] = reason.get<std::string>();
        }
      }
    }
  }
  if (root->contains("demographics")) {
    try {
      tables.demographics = root->at("demographics")
                                .get<std::map<std::string, std::vector<std::string>>>();
    } catch (const Json::exception& e) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad demographics: ", e.what()));
    }
  }
  return tables;
}

absl::StatusOr<MetricTables> LoadMetricTables(const std::string& path) {
  ASSIGN_OR_RETURN(const std::string text, ReadFile(path));
  const Json json = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (json.is_discarded()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": not valid JSON"));
  }
  auto tables = MetricTablesFromJson(json);
  if (!tables.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": ", std::string(tables.status().message())));
  }
  return tables;
}

Json GroupsToJson(const GroupAssignment& groups) {
  Json list = Json::array();
  for (const Group& group : groups.groups) {
    Json entry = {{"id", group.id},
                  {"members", group.members},
                  {"clusters", group.clusters},
                  {"size", group.members.size()}};
    if (!group.name.empty()) entry["name"] = group.name;
    list.push_back(std::move(entry));
  }
  return Json{{"groups", std::move(list)},
              {"min_size", groups.min_size},
              {"reference_model", groups.reference_model},
              {"ambiguities", groups.ambiguities}};
}

absl::StatusOr<GroupAssignment> GroupsFromJson(const Json& input) {
  const Json& json = input.is_object() && input.contains("results")
                         ? input.at("results")
                         : input;
  if (!json.is_object() || !json.contains("groups") ||
      !json.at("groups").is_array()) {
    return absl::InvalidArgumentError("groups file needs an array \"groups\"");
  }
  GroupAssignment out;
  try {
    for (const Json& entry : json.at("groups")) {
      Group group;
      group.id = entry.at("id").get<std::string>();
      group.members = entry.at("members").get<std::vector<std::string>>();
      std::sort(group.members.begin(), group.members.end());
      if (entry.contains("clusters")) {
        group.clusters = entry.at("clusters").get<std::map<std::string, int>>();
      }
      if (entry.contains("name")) group.name = entry.at("name").get<std::string>();
      out.groups.push_back(std::move(group));
    }
    if (json.contains("min_size")) out.min_size = json.at("min_size").get<size_t>();
    if (json.contains("reference_model")) {
      out.reference_model = json.at("reference_model").get<std::string>();
    }
  } catch (const Json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed groups file: ", e.what()));
  }
  return out;
}

Json CorrelationGridJson(const GroupAssignment& groups,
                         const std::vector<GroupCorrelation>& row,
                         const std::string& metric) {
  Json columns = Json::array();
  Json cells = Json::object();
  for (const GroupCorrelation& entry : row) {
    std::string column = entry.group;
    for (const Group& group : groups.groups) {
      if (group.id == entry.group && !group.name.empty()) column = group.name;
    }
    columns.push_back(column);
    if (entry.correlation) {
      cells[column] = {{"rho", entry.correlation->rho},
                       {"p", entry.correlation->p},
                       {"n", entry.correlation->n}};
    } else {
      cells[column] = {{"rho", nullptr}, {"p", nullptr}, {"reason", entry.reason}};
    }
  }
  return Json{{"columns", std::move(columns)},
              {"rows", {{metric, std::move(cells)}}}};
}

}  // namespace biasaudit
