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

#include <algorithm>
#include <cmath>
#include <vector>

#include "absl/strings/str_cat.h"
#include "biasaudit/measurement.h"

namespace biasaudit {

Measurement KlFromUniform(std::span<const std::optional<double>> scores) {
  if (scores.empty()) return Measurement::Undefined("no demographics");
  double total = 0.0;
  for (size_t a = 0; a < scores.size(); ++a) {
    if (!scores[a].has_value()) {
      return Measurement::Undefined(
          absl::StrCat("score undefined for demographic #", a));
    }
    if (*scores[a] < 0.0 || !std::isfinite(*scores[a])) {
      return Measurement::Undefined(
          absl::StrCat("score negative or non-finite for demographic #", a));
    }
    total += *scores[a];
  }
  if (total <= 0.0) return Measurement::Undefined("all scores are zero");

  // Accumulating in sorted order makes the result independent of the
  // demographic order, bit for bit.
  std::vector<double> sorted;
  sorted.reserve(scores.size());
  for (const auto& score : scores) sorted.push_back(*score);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) return Measurement::Of(0.0);
  total = 0.0;
  for (const double score : sorted) total += score;

  const double n = static_cast<double>(sorted.size());
  double kl = 0.0;
  for (const double score : sorted) {
    const double p = score / total;
    if (p > 0.0) kl += p * std::log(p * n);
  }
  return Measurement::Of(std::max(kl, 0.0));
}

}  // namespace biasaudit
