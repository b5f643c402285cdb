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

// Self-contained SVG plots. Plots carry display-normalized copies of the
// values; stored report values are never altered.

#ifndef BIASAUDIT_PLOT_H_
#define BIASAUDIT_PLOT_H_

#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "biasaudit/transfer_stats.h"

namespace biasaudit {

struct HeatmapInput {
  std::string title;
  std::vector<std::string> row_labels;
  // Rows sharing a group (e.g. a protected attribute) are normalized
  // together to [0, 1]. Empty means one group for all rows.
  std::vector<std::string> row_groups;
  std::vector<std::string> column_labels;
  // rows x columns; nullopt cells are drawn hatched.
  std::vector<std::vector<std::optional<double>>> values;
};

// Display intensity per cell in [0, 1]: (v - min) / (max - min) over the
// cell's row group; 0.5 when the group is constant.
absl::StatusOr<std::vector<std::vector<std::optional<double>>>>
NormalizeHeatmap(const HeatmapInput& input);

absl::StatusOr<std::string> HeatmapSvg(const HeatmapInput& input);

// Gap points colored by quadrant.
std::string ScatterSvg(const GapSummary& summary, const std::string& title);

struct HistogramInput {
  std::string title;
  std::vector<double> edges;  // bins + 1, ascending
  std::vector<size_t> counts;
  // Vertical marker, e.g. a correlation-strength threshold.
  std::optional<double> marker;
};

// Equal-width bins over [lo, hi].
HistogramInput BinValues(const std::vector<double>& values, double lo,
                         double hi, int bins);

absl::StatusOr<std::string> HistogramSvg(const HistogramInput& input);

}  // namespace biasaudit

#endif  // BIASAUDIT_PLOT_H_
