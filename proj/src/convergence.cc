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

#include "biasaudit/convergence.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"
#include "biasaudit/vector_math.h"

namespace biasaudit {

absl::StatusOr<SimilarityProfile> MakeSimilarityProfile(
    const EmbeddingSet& embeddings, const std::vector<std::string>& id_order,
    Stage stage) {
  const size_t count = id_order.size();
  if (count < 2) {
    return absl::InvalidArgumentError("A similarity profile needs >= 2 ids");
  }
  std::vector<size_t> rows(count);
  std::vector<double> norms(count);
  for (size_t i = 0; i < count; ++i) {
    const auto row = embeddings.RowOf(id_order[i]);
    if (!row.has_value()) {
      return absl::NotFoundError(absl::StrCat(
          "Model \"", embeddings.model_id(), "\" lacks id \"", id_order[i], "\""));
    }
    rows[i] = *row;
    norms[i] = Norm(embeddings.Row(*row));
    if (norms[i] == 0.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("Model \"", embeddings.model_id(), "\": row \"",
                       id_order[i], "\" has zero magnitude"));
    }
  }
  SimilarityProfile profile;
  profile.model_id = embeddings.model_id();
  profile.stage = stage;
  profile.num_samples = count;
  profile.similarities.reserve(count * (count - 1) / 2);
  for (size_t i = 0; i < count; ++i) {
    const auto a = embeddings.Row(rows[i]);
    for (size_t j = i + 1; j < count; ++j) {
      const double cosine =
          Dot(a, embeddings.Row(rows[j])) / (norms[i] * norms[j]);
      profile.similarities.push_back(std::clamp(cosine, -1.0, 1.0));
    }
  }
  return profile;
}

absl::StatusOr<ConvergenceStats> InterModelSimilarity(
    const std::vector<SimilarityProfile>& profiles) {
  if (profiles.size() < 2) {
    return absl::InvalidArgumentError("Need >= 2 similarity profiles");
  }
  const size_t length = profiles.front().similarities.size();
  for (const auto& profile : profiles) {
    if (profile.similarities.size() != length ||
        profile.num_samples != profiles.front().num_samples) {
      return absl::InvalidArgumentError(absl::StrCat(
          "Profile of \"", profile.model_id, "\" has length ",
          profile.similarities.size(), ", expected ", length));
    }
  }
  const size_t models = profiles.size();
  ConvergenceStats stats;
  stats.stage = profiles.front().stage;
  stats.matrix.assign(models * models, 0.0);
  std::vector<double> norms(models);
  for (size_t e = 0; e < models; ++e) {
    stats.models.push_back(profiles[e].model_id);
    norms[e] = Norm(std::span<const double>(profiles[e].similarities));
  }
  std::vector<double> off_diagonal;
  for (size_t e = 0; e < models; ++e) {
    stats.matrix[e * models + e] = 1.0;
    for (size_t f = e + 1; f < models; ++f) {
      double value = 0.0;
      if (norms[e] > 0.0 && norms[f] > 0.0) {
        value = Dot(std::span<const double>(profiles[e].similarities),
                    std::span<const double>(profiles[f].similarities)) /
                (norms[e] * norms[f]);
      }
      value = std::clamp(value, -1.0, 1.0);
      stats.matrix[e * models + f] = value;
      stats.matrix[f * models + e] = value;
      off_diagonal.push_back(value);
    }
  }
  double sum = 0.0;
  for (const double v : off_diagonal) sum += v;
  const double n = static_cast<double>(off_diagonal.size());
  stats.mean = sum / n;
  double squares = 0.0;
  for (const double v : off_diagonal) squares += (v - stats.mean) * (v - stats.mean);
  stats.stddev = std::sqrt(squares / n);
  stats.min = *std::min_element(off_diagonal.begin(), off_diagonal.end());
  stats.max = *std::max_element(off_diagonal.begin(), off_diagonal.end());

  const double low = stats.min;
  const double high = 1.0;
  const double width = (high - low) / kHistogramBins;
  stats.histogram.counts.assign(kHistogramBins, 0);
  for (int b = 0; b <= kHistogramBins; ++b) {
    stats.histogram.edges.push_back(b == kHistogramBins ? high : low + b * width);
  }
  for (const double v : off_diagonal) {
    int bin = width > 0.0 ? static_cast<int>((v - low) / width) : kHistogramBins - 1;
    bin = std::clamp(bin, 0, kHistogramBins - 1);
    ++stats.histogram.counts[bin];
  }
  return stats;
}

ConvergenceReport MakeConvergenceReport(const ConvergenceStats& pre,
                                        const ConvergenceStats& post) {
  ConvergenceReport report;
  report.mean_pre = pre.mean;
  report.stddev_pre = pre.stddev;
  report.mean_post = post.mean;
  report.stddev_post = post.stddev;
  if (pre.stddev > 0.0) report.z_min_post = (post.min - pre.mean) / pre.stddev;
  if (post.stddev > 0.0) report.stddev_ratio = pre.stddev / post.stddev;
  return report;
}

}  // namespace biasaudit
