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

// Local views of an embedding dataset: per-model k-means clusterings,
// matched across models into groups of samples that every model places
// together, and bias evaluated per group.

#ifndef BIASAUDIT_LOCAL_BIAS_H_
#define BIASAUDIT_LOCAL_BIAS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"
#include "biasaudit/measurement.h"
#include "biasaudit/transfer_stats.h"

namespace biasaudit {

inline constexpr int kDefaultClusters = 6;
inline constexpr size_t kDefaultMinGroupSize = 100;
inline constexpr int kMaxLloydIterations = 300;

struct KMeansOptions {
  // Independent k-means++ restarts; the lowest final inertia wins.
  int restarts = 10;
  int max_iterations = kMaxLloydIterations;
};

struct Clustering {
  std::string model_id;
  int k = 0;
  uint64_t seed = 0;
  // Cluster index per sample id.
  std::map<std::string, int> assignment;
  // k x dim, row-major, in L2-normalized space.
  std::vector<double> centroids;
  double inertia = 0.0;
  // Inertia after each Lloyd iteration of the winning restart.
  std::vector<double> inertia_history;
  int iterations = 0;

  std::vector<std::set<std::string>> Members() const;
};

// k-means++ seeding and Lloyd iterations on L2-normalized rows, until the
// assignment stops changing or max_iterations. Rows are visited in ascending
// id order so the result does not depend on file row order. An emptied
// cluster is reseeded with the point farthest from its centroid.
absl::StatusOr<Clustering> KMeans(const EmbeddingSet& embeddings, int k,
                                  uint64_t seed,
                                  const KMeansOptions& options = {});

struct Group {
  std::string id;
  std::vector<std::string> members;  // sorted
  // Source cluster index per model id.
  std::map<std::string, int> clusters;
  std::string name;  // optional human label
};

struct GroupAssignment {
  std::vector<Group> groups;
  size_t min_size = kDefaultMinGroupSize;
  std::string reference_model;
  // Human-readable notes on overlap ties broken by cluster index.
  std::vector<std::string> ambiguities;
};

// Greedy cluster matching. For every cluster of the reference clustering,
// intersect in turn with the maximum-overlap cluster of each remaining
// clustering (model id order); keep intersections of at least min_size.
// Groups come out largest first with ids g0, g1, ...
// An empty `reference_model` selects the lexicographically first model.
absl::StatusOr<GroupAssignment> MatchGroups(
    const std::vector<Clustering>& clusterings,
    size_t min_size = kDefaultMinGroupSize,
    const std::string& reference_model = "");

// Bias of one model evaluated on a subset of sample ids.
using SubsetMetric = std::function<absl::StatusOr<Measurement>(
    const std::string& model_id, const std::set<std::string>& ids)>;

struct GroupBiasTable {
  std::vector<std::string> models;
  std::vector<std::string> groups;  // group ids
  // groups x models.
  std::vector<std::vector<Measurement>> local;
  // Per model, metric over every sample.
  std::vector<Measurement> global;
};

// Evaluates the metric per (group, model) and on the full id set per model.
absl::StatusOr<GroupBiasTable> PerGroupBias(
    const GroupAssignment& groups, const std::vector<std::string>& models,
    const std::set<std::string>& all_ids, const SubsetMetric& metric);

struct GroupCorrelation {
  std::string group;
  std::optional<CorrelationResult> correlation;
  std::string reason;
};

// Spearman correlation between each group's local bias and the global bias
// across models, dropping undefined cells pairwise. The first entry is the
// global-vs-global column, trivially 1.
std::vector<GroupCorrelation> GlobalLocalCorrelation(
    const GroupBiasTable& table, PValueMethod method = PValueMethod::kAuto);

}  // namespace biasaudit

#endif  // BIASAUDIT_LOCAL_BIAS_H_
