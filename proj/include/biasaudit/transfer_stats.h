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

// Rank-correlation machinery for bias-transfer analysis.

#ifndef BIASAUDIT_TRANSFER_STATS_H_
#define BIASAUDIT_TRANSFER_STATS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"

namespace biasaudit {

enum class PValueMethod {
  // Exact enumeration for n <= 8, t approximation otherwise.
  kAuto,
  kTApprox,
  kExact,
  kPermutation,
};

inline constexpr size_t kMaxExactPermutationN = 8;
inline constexpr size_t kDefaultPermutationDraws = 100000;

absl::StatusOr<PValueMethod> ParsePValueMethod(std::string_view name);
std::string_view PValueMethodName(PValueMethod method);

struct CorrelationResult {
  double rho = 0.0;
  double p = 1.0;
  size_t n = 0;
  // "t-approx", "exact-permutation" or "monte-carlo-permutation".
  std::string method;
  // Monte-Carlo standard error of p; 0 for the other methods.
  double p_standard_error = 0.0;
};

// 1-based ranks, ties receive the mean of the ranks they span.
std::vector<double> AverageRanks(std::span<const double> values);

// Spearman's rho (Pearson correlation of average ranks) with a two-sided
// p-value. Fails when sizes differ, n < 3, or either vector is constant.
absl::StatusOr<CorrelationResult> Spearman(
    std::span<const double> x, std::span<const double> y,
    PValueMethod method = PValueMethod::kAuto, uint64_t seed = 0,
    size_t draws = kDefaultPermutationDraws);

// Descriptive strength of |rho| ("poor", "fair", "moderate", "very strong",
// "perfect"); used as a report annotation only.
std::string_view CorrelationStrength(double rho);

// metric -> attribute -> model -> value; nullopt marks an undefined value.
using MetricTable = std::map<
    std::string,
    std::map<std::string, std::map<std::string, std::optional<double>>>>;

struct Combination {
  std::string pre_metric;
  std::string pre_attribute;
  std::string down_metric;
  std::string down_attribute;

  std::string Label() const;
  auto operator<=>(const Combination&) const = default;
};

struct SweepOptions {
  // Extra (pre attribute, downstream attribute) pairs beyond same-attribute.
  std::vector<std::pair<std::string, std::string>> cross_attributes;
  // Replaces the enumerated combinations when non-empty.
  std::vector<Combination> combinations;
  PValueMethod method = PValueMethod::kAuto;
  uint64_t seed = 0;
};

struct SweepEntry {
  Combination combination;
  std::optional<CorrelationResult> result;
  std::string skipped_reason;
  std::vector<std::string> models;
};

struct SweepResult {
  // Sorted by |rho| descending, then by combination.
  std::vector<SweepEntry> results;
  std::vector<SweepEntry> skipped;
};

// Every (pre metric, downstream metric, attribute) combination plus the
// whitelisted cross-attribute pairs. Models with an undefined value on
// either side are dropped per combination.
SweepResult CorrelationSweep(const MetricTable& pre, const MetricTable& down,
                             const SweepOptions& options = {});

enum class Quadrant { kI, kII, kIII, kIV, kAxis };
std::string_view QuadrantName(Quadrant quadrant);

struct GapPoint {
  std::string model;
  double pre_gap = 0.0;   // first demographic minus second
  double down_gap = 0.0;
  Quadrant quadrant = Quadrant::kAxis;
};

struct GapSummary {
  std::vector<GapPoint> points;
  double same_sign = 0.0;      // quadrants I and III
  double opposite_sign = 0.0;  // quadrants II and IV
  double on_axis = 0.0;
  std::vector<std::string> skipped_models;
};

// model -> per-demographic values in attribute order.
using PerDemographicValues =
    std::map<std::string, std::vector<std::optional<double>>>;

// Compares per-model performance gaps before and after adaptation for a
// two-demographic attribute.
absl::StatusOr<GapSummary> GapQuadrants(const ProtectedAttribute& attribute,
                                        const PerDemographicValues& pre,
                                        const PerDemographicValues& down);

}  // namespace biasaudit

#endif  // BIASAUDIT_TRANSFER_STATS_H_
