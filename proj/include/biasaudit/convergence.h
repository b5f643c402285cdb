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

// Representation convergence: every model is summarized by the vector of
// pairwise cosine similarities among a fixed list of samples, and models are
// compared through the cosine similarity of those vectors.

#ifndef BIASAUDIT_CONVERGENCE_H_
#define BIASAUDIT_CONVERGENCE_H_

#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"

namespace biasaudit {

inline constexpr int kHistogramBins = 50;

enum class Stage { kPre, kPost };

struct SimilarityProfile {
  std::string model_id;
  Stage stage = Stage::kPre;
  // Cosine similarity of every pair (i < j) of id_order, row-major over i.
  std::vector<double> similarities;
  size_t num_samples = 0;
};

absl::StatusOr<SimilarityProfile> MakeSimilarityProfile(
    const EmbeddingSet& embeddings, const std::vector<std::string>& id_order,
    Stage stage = Stage::kPre);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<size_t> counts;
};

struct ConvergenceStats {
  Stage stage = Stage::kPre;
  std::vector<std::string> models;
  // E x E, row-major; symmetric with unit diagonal.
  std::vector<double> matrix;
  // Over the E(E-1)/2 off-diagonal pairs. sigma is the population standard
  // deviation.
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  Histogram histogram;
};

// Requires >= 2 profiles of equal length.
absl::StatusOr<ConvergenceStats> InterModelSimilarity(
    const std::vector<SimilarityProfile>& profiles);

struct ConvergenceReport {
  double mean_pre = 0.0;
  double stddev_pre = 0.0;
  double mean_post = 0.0;
  double stddev_post = 0.0;
  // (min_post - mean_pre) / stddev_pre; undefined when stddev_pre == 0.
  std::optional<double> z_min_post;
  // stddev_pre / stddev_post; undefined when stddev_post == 0.
  std::optional<double> stddev_ratio;
};

ConvergenceReport MakeConvergenceReport(const ConvergenceStats& pre,
                                        const ConvergenceStats& post);

}  // namespace biasaudit

#endif  // BIASAUDIT_CONVERGENCE_H_
