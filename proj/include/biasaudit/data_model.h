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

// Core records shared by every metric: protected attributes, embedding
// matrices, per-sample annotations, task predictions, and the per-attribute
// demographic partition.

#ifndef BIASAUDIT_DATA_MODEL_H_
#define BIASAUDIT_DATA_MODEL_H_

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace biasaudit {

// A protected attribute and its ordered demographic labels. The order is
// the order of every per-demographic vector the toolkit reports.
struct ProtectedAttribute {
  std::string name;
  std::vector<std::string> demographics;

  size_t size() const { return demographics.size(); }
  std::optional<size_t> IndexOf(std::string_view label) const;
};

// Validates name and labels (>= 2, non-empty, unique).
absl::StatusOr<ProtectedAttribute> MakeProtectedAttribute(
    std::string name, std::vector<std::string> demographics);

struct AttributeSchema {
  std::vector<ProtectedAttribute> attributes;

  absl::StatusOr<ProtectedAttribute> Find(std::string_view name) const;
};

// Row-major float32 embedding matrix with one opaque identifier per row.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  // Fails on duplicate ids, dim < 1, size mismatch or non-finite values.
  static absl::StatusOr<EmbeddingSet> Create(std::string model_id,
                                             std::vector<std::string> ids,
                                             size_t dim,
                                             std::vector<float> values);

  const std::string& model_id() const { return model_id_; }
  const std::vector<std::string>& ids() const { return ids_; }
  size_t dim() const { return dim_; }
  size_t size() const { return ids_.size(); }
  const std::vector<float>& values() const { return values_; }

  std::span<const float> Row(size_t row) const {
    return {values_.data() + row * dim_, dim_};
  }
  std::optional<size_t> RowOf(std::string_view id) const;

 private:
  std::string model_id_;
  std::vector<std::string> ids_;
  size_t dim_ = 0;
  std::vector<float> values_;
  std::unordered_map<std::string, size_t> row_of_;
};

// Per-sample protected-attribute labels. A sample may carry several labels
// for one attribute (several people in the image); such samples are mixed
// and get excluded when partitioning on that attribute.
class AnnotationTable {
 public:
  explicit AnnotationTable(AttributeSchema schema = {})
      : schema_(std::move(schema)) {}

  // Fails if the attribute is not in the schema or a label is not one of its
  // demographics.
  absl::Status Add(const std::string& id, const std::string& attribute,
                   std::vector<std::string> labels);
  // Registers the sample even when it has no labels at all.
  void Touch(const std::string& id) { rows_[id]; }

  bool Contains(std::string_view id) const;
  bool KnowsAttribute(std::string_view attribute) const;
  const AttributeSchema& schema() const { return schema_; }
  size_t size() const { return rows_.size(); }

  // Labels for (id, attribute); empty if none.
  std::vector<std::string> Labels(std::string_view id,
                                  std::string_view attribute) const;

  const std::map<std::string, std::map<std::string, std::vector<std::string>>,
                 std::less<>>&
  rows() const {
    return rows_;
  }

 private:
  AttributeSchema schema_;
  std::map<std::string, std::map<std::string, std::vector<std::string>>,
           std::less<>>
      rows_;
};

enum class TaskKind { kVqa, kCaptioning, kScored };

enum class CaptionOrigin { kGroundTruth, kGenerated };

struct VqaEntry {
  std::string id;
  std::string qid;
  std::string question;
  std::string pred;
  std::vector<std::string> gt;
};

struct CaptionEntry {
  std::string id;
  std::string caption;
  CaptionOrigin origin = CaptionOrigin::kGroundTruth;
};

struct ScoredEntry {
  std::string id;
  std::string metric;
  double value = 0.0;
};

struct PredictionSet {
  TaskKind task = TaskKind::kVqa;
  std::vector<VqaEntry> vqa;
  std::vector<CaptionEntry> captions;
  std::vector<ScoredEntry> scored;
};

// Checks the per-task invariants (non-empty VQA ground truth, finite scores).
absl::Status ValidatePredictions(const PredictionSet& predictions);

// Samples grouped by their single label for one attribute.
struct DemographicPartition {
  ProtectedAttribute attribute;
  // Indexed like attribute.demographics; ids sorted ascending.
  std::vector<std::vector<std::string>> buckets;
  // Annotated samples without exactly one label for the attribute, sorted.
  std::vector<std::string> excluded_ids;
  // Requested ids absent from the annotation table.
  size_t unannotated = 0;

  size_t excluded() const { return excluded_ids.size(); }

  std::optional<size_t> DemographicOf(std::string_view id) const;
  size_t assigned() const;
  // Restriction to a subset of ids; counters only cover that subset.
  DemographicPartition Restrict(const std::set<std::string>& ids) const;

  // Filled by PartitionByDemographic.
  std::unordered_map<std::string, size_t> demographic_of;
};

absl::StatusOr<DemographicPartition> PartitionByDemographic(
    const AnnotationTable& annotations, const ProtectedAttribute& attribute,
    std::span<const std::string> ids);

}  // namespace biasaudit

#endif  // BIASAUDIT_DATA_MODEL_H_
