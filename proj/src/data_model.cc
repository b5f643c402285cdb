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

#include "biasaudit/data_model.h"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "absl/strings/str_cat.h"

namespace biasaudit {

std::optional<size_t> ProtectedAttribute::IndexOf(
    std::string_view label) const {
  for (size_t i = 0; i < demographics.size(); ++i) {
    if (demographics[i] == label) return i;
  }
  return std::nullopt;
}

absl::StatusOr<ProtectedAttribute> MakeProtectedAttribute(
    std::string name, std::vector<std::string> demographics) {
  if (name.empty()) {
    return absl::InvalidArgumentError("Protected attribute without a name");
  }
  if (demographics.size() < 2) {
    return absl::InvalidArgumentError(absl::StrCat(
        "Protected attribute \"", name, "\" needs at least two demographics"));
  }
  std::unordered_set<std::string> seen;
  for (const auto& label : demographics) {
    if (label.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("Empty demographic label in \"", name, "\""));
    }
    if (!seen.insert(label).second) {
      return absl::InvalidArgumentError(absl::StrCat(
          "Duplicate demographic \"", label, "\" in \"", name, "\""));
    }
  }
  return ProtectedAttribute{std::move(name), std::move(demographics)};
}

absl::StatusOr<ProtectedAttribute> AttributeSchema::Find(
    std::string_view name) const {
  for (const auto& attribute : attributes) {
    if (attribute.name == name) return attribute;
  }
  return absl::NotFoundError(
      absl::StrCat("Unknown protected attribute \"", std::string(name), "\""));
}

absl::StatusOr<EmbeddingSet> EmbeddingSet::Create(std::string model_id,
                                                  std::vector<std::string> ids,
                                                  size_t dim,
                                                  std::vector<float> values) {
  if (dim < 1) {
    return absl::InvalidArgumentError("Embedding dimension must be >= 1");
  }
  if (values.size() != ids.size() * dim) {
    return absl::InvalidArgumentError(
        absl::StrCat("Embedding matrix holds ", values.size(),
                     " values, expected ", ids.size(), " x ", dim));
  }
  EmbeddingSet set;
  set.row_of_.reserve(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (!set.row_of_.emplace(ids[i], i).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("Duplicate sample id \"", ids[i], "\""));
    }
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      return absl::InvalidArgumentError(
          absl::StrCat("Non-finite embedding value at row ", i / dim,
                       ", column ", i % dim));
    }
  }
  set.model_id_ = std::move(model_id);
  set.ids_ = std::move(ids);
  set.dim_ = dim;
  set.values_ = std::move(values);
  return set;
}

std::optional<size_t> EmbeddingSet::RowOf(std::string_view id) const {
  const auto it = row_of_.find(std::string(id));
  if (it == row_of_.end()) return std::nullopt;
  return it->second;
}

absl::Status AnnotationTable::Add(const std::string& id,
                                  const std::string& attribute,
                                  std::vector<std::string> labels) {
  const auto found = schema_.Find(attribute);
  if (!found.ok()) return found.status();
  for (const auto& label : labels) {
    if (!found->IndexOf(label).has_value()) {
      return absl::InvalidArgumentError(
          absl::StrCat("Sample \"", id, "\": label \"", label,
                       "\" is not a demographic of \"", attribute, "\""));
    }
  }
  auto& slot = rows_[id][attribute];
  slot.insert(slot.end(), labels.begin(), labels.end());
  return absl::OkStatus();
}

bool AnnotationTable::Contains(std::string_view id) const {
  return rows_.find(id) != rows_.end();
}

bool AnnotationTable::KnowsAttribute(std::string_view attribute) const {
  return schema_.Find(attribute).ok();
}

std::vector<std::string> AnnotationTable::Labels(
    std::string_view id, std::string_view attribute) const {
  const auto row = rows_.find(id);
  if (row == rows_.end()) return {};
  const auto labels = row->second.find(std::string(attribute));
  if (labels == row->second.end()) return {};
  return labels->second;
}

absl::Status ValidatePredictions(const PredictionSet& predictions) {
  for (const auto& entry : predictions.vqa) {
    if (entry.gt.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("VQA entry (", entry.id, ", ", entry.qid,
                       ") has no ground-truth answers"));
    }
  }
  for (const auto& entry : predictions.scored) {
    if (!std::isfinite(entry.value)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "Non-finite score for \"", entry.id, "\" (", entry.metric, ")"));
    }
  }
  return absl::OkStatus();
}

std::optional<size_t> DemographicPartition::DemographicOf(
    std::string_view id) const {
  const auto it = demographic_of.find(std::string(id));
  if (it == demographic_of.end()) return std::nullopt;
  return it->second;
}

size_t DemographicPartition::assigned() const {
  size_t total = 0;
  for (const auto& bucket : buckets) total += bucket.size();
  return total;
}

DemographicPartition DemographicPartition::Restrict(
    const std::set<std::string>& ids) const {
  DemographicPartition out;
  out.attribute = attribute;
  out.buckets.resize(buckets.size());
  for (size_t a = 0; a < buckets.size(); ++a) {
    for (const auto& id : buckets[a]) {
      if (ids.count(id)) {
        out.buckets[a].push_back(id);
        out.demographic_of.emplace(id, a);
      }
    }
  }
  for (const auto& id : excluded_ids) {
    if (ids.count(id)) out.excluded_ids.push_back(id);
  }
  return out;
}

absl::StatusOr<DemographicPartition> PartitionByDemographic(
    const AnnotationTable& annotations, const ProtectedAttribute& attribute,
    std::span<const std::string> ids) {
  if (!annotations.KnowsAttribute(attribute.name)) {
    return absl::NotFoundError(absl::StrCat(
        "Attribute \"", attribute.name, "\" is unknown to the annotations"));
  }
  DemographicPartition partition;
  partition.attribute = attribute;
  partition.buckets.resize(attribute.size());

  std::vector<std::string> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  for (const auto& id : sorted) {
    if (!annotations.Contains(id)) {
      ++partition.unannotated;
      continue;
    }
    auto labels = annotations.Labels(id, attribute.name);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (labels.size() != 1) {
      partition.excluded_ids.push_back(id);
      continue;
    }
    const size_t demographic = *attribute.IndexOf(labels.front());
    partition.buckets[demographic].push_back(id);
    partition.demographic_of.emplace(id, demographic);
  }
  return partition;
}

}  // namespace biasaudit
