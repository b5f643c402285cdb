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

#include "biasaudit/transfer_stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "absl/strings/str_cat.h"
#include "biasaudit/random.h"
#include "boost/math/distributions/students_t.hpp"

namespace biasaudit {
namespace {

// Relative slack when comparing permuted statistics with the observed one,
// so that ties computed in a different order still count.
constexpr double kPermutationSlack = 1e-12;

double PearsonOfRanks(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double TApproxP(double rho, size_t n) {
  if (std::abs(rho) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = rho * std::sqrt(df / (1.0 - rho * rho));
  const boost::math::students_t distribution(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(
                                 distribution, std::abs(t))));
}

bool AtLeastAsExtreme(double candidate, double observed) {
  return std::abs(candidate) >=
         std::abs(observed) - kPermutationSlack * std::max(1.0, std::abs(observed));
}

}  // namespace

absl::StatusOr<PValueMethod> ParsePValueMethod(std::string_view name) {
  if (name == "auto") return PValueMethod::kAuto;
  if (name == "t" || name == "t-approx") return PValueMethod::kTApprox;
  if (name == "exact" || name == "exact-permutation") return PValueMethod::kExact;
  if (name == "permutation" || name == "monte-carlo-permutation") {
    return PValueMethod::kPermutation;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("Unknown p-value method \"", std::string(name), "\""));
}

std::string_view PValueMethodName(PValueMethod method) {
  switch (method) {
    case PValueMethod::kAuto:
      return "auto";
    case PValueMethod::kTApprox:
      return "t-approx";
    case PValueMethod::kExact:
      return "exact-permutation";
    case PValueMethod::kPermutation:
      return "monte-carlo-permutation";
  }
  return "auto";
}

std::vector<double> AverageRanks(std::span<const double> values) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  size_t start = 0;
  while (start < order.size()) {
    size_t end = start + 1;
    while (end < order.size() && values[order[end]] == values[order[start]]) {
      ++end;
    }
    // Positions start..end-1 hold 1-based ranks start+1..end.
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (size_t i = start; i < end; ++i) ranks[order[i]] = rank;
    start = end;
  }
  return ranks;
}

absl::StatusOr<CorrelationResult> Spearman(std::span<const double> x,
                                           std::span<const double> y,
                                           PValueMethod method, uint64_t seed,
                                           size_t draws) {
  if (x.size() != y.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("Spearman inputs differ in length: ", x.size(), " vs ",
                     y.size()));
  }
  if (x.size() < 3) {
    return absl::FailedPreconditionError(
        absl::StrCat("Spearman needs n >= 3, got ", x.size()));
  }
  for (size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      return absl::InvalidArgumentError("Spearman inputs must be finite");
    }
  }
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
  };
  if (constant(x) || constant(y)) {
    return absl::FailedPreconditionError(
        "Spearman rho is undefined for a constant vector");
  }
  const std::vector<double> rank_x = AverageRanks(x);
  std::vector<double> rank_y = AverageRanks(y);

  CorrelationResult result;
  result.n = x.size();
  result.rho = PearsonOfRanks(rank_x, rank_y);

  if (method == PValueMethod::kAuto) {
    method = result.n <= kMaxExactPermutationN ? PValueMethod::kExact
                                               : PValueMethod::kTApprox;
  }
  result.method = std::string(PValueMethodName(method));
  switch (method) {
    case PValueMethod::kAuto:
    case PValueMethod::kTApprox:
      result.p = TApproxP(result.rho, result.n);
      break;
    case PValueMethod::kExact: {
      if (result.n > kMaxExactPermutationN) {
        return absl::InvalidArgumentError(absl::StrCat(
            "Exact permutation p needs n <= ", kMaxExactPermutationN));
      }
      std::vector<size_t> perm(result.n);
      std::iota(perm.begin(), perm.end(), 0);
      std::vector<double> permuted(result.n);
      size_t extreme = 0, total = 0;
      do {
        for (size_t i = 0; i < result.n; ++i) permuted[i] = rank_y[perm[i]];
        if (AtLeastAsExtreme(PearsonOfRanks(rank_x, permuted), result.rho)) {
          ++extreme;
        }
        ++total;
      } while (std::next_permutation(perm.begin(), perm.end()));
      result.p = static_cast<double>(extreme) / static_cast<double>(total);
      break;
    }
    case PValueMethod::kPermutation: {
      if (draws == 0) {
        return absl::InvalidArgumentError("Permutation p needs draws > 0");
      }
      SplitMix64 rng(seed);
      std::vector<double> permuted = rank_y;
      size_t extreme = 0;
      for (size_t d = 0; d < draws; ++d) {
        rng.Shuffle(permuted);
        if (AtLeastAsExtreme(PearsonOfRanks(rank_x, permuted), result.rho)) {
          ++extreme;
        }
      }
      const double n = static_cast<double>(draws);
      result.p = static_cast<double>(extreme) / n;
      result.p_standard_error = std::sqrt(result.p * (1.0 - result.p) / n);
      break;
    }
  }
  return result;
}

std::string_view CorrelationStrength(double rho) {
  const double r = std::abs(rho);
  if (r >= 1.0) return "perfect";
  if (r >= 0.8) return "very strong";
  if (r >= 0.6) return "moderate";
  if (r >= 0.3) return "fair";
  return "poor";
}

std::string Combination::Label() const {
  return absl::StrCat(pre_metric, "/", pre_attribute, " ~ ", down_metric, "/",
                      down_attribute);
}

namespace {

const std::map<std::string, std::optional<double>>* Lookup(
    const MetricTable& table, const std::string& metric,
    const std::string& attribute) {
  const auto m = table.find(metric);
  if (m == table.end()) return nullptr;
  const auto a = m->second.find(attribute);
  if (a == m->second.end()) return nullptr;
  return &a->second;
}

std::vector<Combination> Enumerate(const MetricTable& pre,
                                   const MetricTable& down,
                                   const SweepOptions& options) {
  if (!options.combinations.empty()) return options.combinations;
  std::set<Combination> combos;
  for (const auto& [pre_metric, pre_attrs] : pre) {
    for (const auto& [down_metric, down_attrs] : down) {
      for (const auto& [attribute, unused] : pre_attrs) {
        if (down_attrs.count(attribute)) {
          combos.insert({pre_metric, attribute, down_metric, attribute});
        }
      }
      for (const auto& [pre_attr, down_attr] : options.cross_attributes) {
        if (pre_attrs.count(pre_attr) && down_attrs.count(down_attr)) {
          combos.insert({pre_metric, pre_attr, down_metric, down_attr});
        }
      }
    }
  }
  return {combos.begin(), combos.end()};
}

}  // namespace

SweepResult CorrelationSweep(const MetricTable& pre, const MetricTable& down,
                             const SweepOptions& options) {
  SweepResult out;
  for (const Combination& combo : Enumerate(pre, down, options)) {
    SweepEntry entry;
    entry.combination = combo;
    const auto* x = Lookup(pre, combo.pre_metric, combo.pre_attribute);
    const auto* y = Lookup(down, combo.down_metric, combo.down_attribute);
    if (x == nullptr || y == nullptr) {
      entry.skipped_reason = "metric/attribute missing from an input table";
      out.skipped.push_back(std::move(entry));
      continue;
    }
    std::vector<double> xs, ys;
    for (const auto& [model, value] : *x) {
      const auto other = y->find(model);
      if (!value.has_value() || other == y->end() ||
          !other->second.has_value()) {
        continue;
      }
      entry.models.push_back(model);
      xs.push_back(*value);
      ys.push_back(*other->second);
    }
    auto result = Spearman(xs, ys, options.method, options.seed);
    if (!result.ok()) {
      entry.skipped_reason = std::string(result.status().message());
      out.skipped.push_back(std::move(entry));
      continue;
    }
    entry.result = *result;
    out.results.push_back(std::move(entry));
  }
  std::stable_sort(out.results.begin(), out.results.end(),
                   [](const SweepEntry& a, const SweepEntry& b) {
                     const double ra = std::abs(a.result->rho);
                     const double rb = std::abs(b.result->rho);
                     if (ra != rb) return ra > rb;
                     return a.combination < b.combination;
                   });
  return out;
}

std::string_view QuadrantName(Quadrant quadrant) {
  switch (quadrant) {
    case Quadrant::kI:
      return "I";
    case Quadrant::kII:
      return "II";
    case Quadrant::kIII:
      return "III";
    case Quadrant::kIV:
      return "IV";
    case Quadrant::kAxis:
      return "axis";
  }
  return "axis";
}

absl::StatusOr<GapSummary> GapQuadrants(const ProtectedAttribute& attribute,
                                        const PerDemographicValues& pre,
                                        const PerDemographicValues& down) {
  if (attribute.size() != 2) {
    return absl::InvalidArgumentError(absl::StrCat(
        "Gap analysis needs exactly two demographics; \"", attribute.name,
        "\" has ", attribute.size()));
  }
  const auto complete = [](const std::vector<std::optional<double>>& v) {
    return v.size() == 2 && v[0].has_value() && v[1].has_value();
  };
  GapSummary summary;
  size_t same = 0, opposite = 0, axis = 0;
  for (const auto& [model, pre_values] : pre) {
    const auto other = down.find(model);
    if (other == down.end() || !complete(pre_values) ||
        !complete(other->second)) {
      summary.skipped_models.push_back(model);
      continue;
    }
    GapPoint point;
    point.model = model;
    point.pre_gap = *pre_values[0] - *pre_values[1];
    point.down_gap = *other->second[0] - *other->second[1];
    if (point.pre_gap == 0.0 || point.down_gap == 0.0) {
      point.quadrant = Quadrant::kAxis;
      ++axis;
    } else if (point.pre_gap > 0.0) {
      point.quadrant = point.down_gap > 0.0 ? Quadrant::kI : Quadrant::kIV;
      ++(point.down_gap > 0.0 ? same : opposite);
    } else {
      point.quadrant = point.down_gap > 0.0 ? Quadrant::kII : Quadrant::kIII;
      ++(point.down_gap > 0.0 ? opposite : same);
    }
    summary.points.push_back(std::move(point));
  }
  for (const auto& [model, unused] : down) {
    if (!pre.count(model)) summary.skipped_models.push_back(model);
  }
  const size_t total = summary.points.size();
  if (total > 0) {
    const double n = static_cast<double>(total);
    summary.same_sign = static_cast<double>(same) / n;
    summary.opposite_sign = static_cast<double>(opposite) / n;
    summary.on_axis = static_cast<double>(axis) / n;
  }
  return summary;
}

}  // namespace biasaudit
