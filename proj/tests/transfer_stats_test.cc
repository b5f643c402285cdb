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


#include <cmath>
#include <string>
#include <vector>

#include "biasaudit/random.h"
#include "biasaudit/transfer_stats.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace biasaudit {
namespace {

TEST(RanksTest, TiesShareTheAverageRank) {
  EXPECT_EQ(AverageRanks(std::vector<double>{3, 1, 1, 2}),
            (std::vector<double>{4, 1.5, 1.5, 3}));
  EXPECT_EQ(AverageRanks(std::vector<double>{5, 5, 5}), (std::vector<double>{2, 2, 2}));
}

TEST(SpearmanTest, MonotoneAndReversed) {
  const std::vector<double> x = {1, 2, 3, 4}, y = {1, 4, 9, 16}, r = {16, 9, 4, 1};
  auto up = Spearman(x, y);
  ASSERT_TRUE(up.ok());
  EXPECT_EQ(up->rho, 1.0);
  EXPECT_EQ(up->n, 4u);
  EXPECT_EQ(Spearman(x, r)->rho, -1.0);
}

TEST(SpearmanTest, TiesMatchOracle) {
  const std::vector<double> x = {1, 1, 2}, y = {1, 2, 3};
  EXPECT_NEAR(Spearman(x, y)->rho, oracle::SpearmanRho(x, y), 1e-15);
  EXPECT_NEAR(Spearman(x, y)->rho, std::sqrt(0.75), 1e-15);
}

TEST(SpearmanTest, Errors) {
  const std::vector<double> two = {1, 2}, three = {1, 2, 3}, flat = {1, 1, 1};
  EXPECT_FALSE(Spearman(two, two).ok());
  EXPECT_FALSE(Spearman(three, two).ok());
  EXPECT_FALSE(Spearman(three, flat).ok());
  EXPECT_FALSE(ParsePValueMethod("bogus").ok());
  EXPECT_EQ(*ParsePValueMethod(PValueMethodName(PValueMethod::kExact)), PValueMethod::kExact);
}

TEST(SpearmanTest, RandomVectorsMatchTextbookFormulas) {
  SplitMix64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(10), y(10);
    for (int i = 0; i < 10; ++i) {
      x[i] = static_cast<double>(rng.Below(6));
      y[i] = rng.Uniform();
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    auto result = Spearman(x, y, PValueMethod::kTApprox);
    ASSERT_TRUE(result.ok());
    const double rho = oracle::SpearmanRho(x, y);
    EXPECT_NEAR(result->rho, rho, 1e-12);
    EXPECT_NEAR(result->p, oracle::SpearmanTP(rho, 10), 1e-12);
    EXPECT_EQ(result->method, "t-approx");
  }
}

TEST(SpearmanTest, ExactEnumerationMatchesOracle) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(6), y(6);
    for (int i = 0; i < 6; ++i) {
      x[i] = rng.Uniform();
      y[i] = x[i] + 0.5 * rng.Normal();
    }
    auto result = Spearman(x, y, PValueMethod::kExact);
    ASSERT_TRUE(result.ok());
    EXPECT_NEAR(result->p, oracle::SpearmanExactP(x, y), 1e-12);
    EXPECT_EQ(result->method, "exact-permutation");
  }
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {2, 1, 4, 3, 5};
  EXPECT_EQ(Spearman(a, b)->method, "exact-permutation");
}

TEST(SpearmanTest, MonteCarloAgreesWithExact) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7}, y = {2, 1, 4, 3, 7, 5, 6};
  auto exact = Spearman(x, y, PValueMethod::kExact);
  auto mc = Spearman(x, y, PValueMethod::kPermutation, 3, 20000);
  auto again = Spearman(x, y, PValueMethod::kPermutation, 3, 20000);
  ASSERT_TRUE(exact.ok() && mc.ok());
  const double se = std::sqrt(exact->p * (1 - exact->p) / 20000);
  EXPECT_LE(std::abs(mc->p - exact->p), 3 * se);
  EXPECT_GT(mc->p_standard_error, 0.0);
  EXPECT_EQ(mc->p, again->p);
}

TEST(StrengthTest, Thresholds) {
  EXPECT_EQ(CorrelationStrength(0.1), "poor");
  EXPECT_EQ(CorrelationStrength(-0.3), "fair");
  EXPECT_EQ(CorrelationStrength(0.7), "moderate");
  EXPECT_EQ(CorrelationStrength(0.85), "very strong");
  EXPECT_EQ(CorrelationStrength(-1.0), "perfect");
}

MetricTable Table(const std::vector<std::string>& metrics, const std::string& attr,
                  const std::vector<std::string>& models, SplitMix64& rng) {
  MetricTable table;
  for (const auto& metric : metrics) {
    for (const auto& model : models) table[metric][attr][model] = rng.Uniform();
  }
  return table;
}

TEST(SweepTest, CountsCombinations) {
  SplitMix64 rng(1);
  const std::vector<std::string> models = {"a", "b", "c", "d", "e"};
  const auto pre = Table({"recall-kl", "maxskew"}, "gender", models, rng);
  const auto down = Table({"vqa-kl", "dba"}, "gender", models, rng);
  const SweepResult sweep = CorrelationSweep(pre, down);
  EXPECT_EQ(sweep.results.size() + sweep.skipped.size(), 4u);
  for (size_t i = 1; i < sweep.results.size(); ++i) {
    EXPECT_GE(std::abs(sweep.results[i - 1].result->rho), std::abs(sweep.results[i].result->rho));
  }
}

TEST(SweepTest, CrossAttributesAreOptIn) {
  SplitMix64 rng(2);
  const std::vector<std::string> models = {"a", "b", "c", "d"};
  MetricTable pre = Table({"recall-kl"}, "ethnicity", models, rng);
  MetricTable down = Table({"vqa-kl"}, "skintone", models, rng);
  EXPECT_TRUE(CorrelationSweep(pre, down).results.empty());
  SweepOptions options;
  options.cross_attributes = {{"ethnicity", "skintone"}};
  const SweepResult sweep = CorrelationSweep(pre, down, options);
  ASSERT_EQ(sweep.results.size(), 1u);
  EXPECT_EQ(sweep.results[0].combination.Label(), "recall-kl/ethnicity ~ vqa-kl/skintone");
}

TEST(SweepTest, PlantedCombinationIsPerfect) {
  SplitMix64 rng(5);
  std::vector<std::string> models;
  for (int m = 0; m < 12; ++m) models.push_back("m" + std::to_string(m));
  MetricTable pre = Table({"recall-kl", "maxskew"}, "gender", models, rng);
  MetricTable down = Table({"vqa-kl", "cider-kl"}, "gender", models, rng);
  for (const auto& model : models) {
    down["cider-kl"]["gender"][model] = std::exp(*pre["recall-kl"]["gender"][model]);
  }
  const SweepResult sweep = CorrelationSweep(pre, down);
  ASSERT_EQ(sweep.results.size(), 4u);
  EXPECT_EQ(sweep.results[0].combination.Label(), "recall-kl/gender ~ cider-kl/gender");
  EXPECT_EQ(sweep.results[0].result->rho, 1.0);
  for (size_t i = 1; i < 4; ++i) EXPECT_LT(std::abs(sweep.results[i].result->rho), 1.0);
}

TEST(SweepTest, UndefinedAndDisjointModelsAreSkipped) {
  SplitMix64 rng(3);
  MetricTable pre = Table({"recall-kl"}, "gender", {"a", "b", "c", "d"}, rng);
  MetricTable down = Table({"vqa-kl"}, "gender", {"w", "x", "y", "z"}, rng);
  SweepResult sweep = CorrelationSweep(pre, down);
  EXPECT_TRUE(sweep.results.empty());
  ASSERT_EQ(sweep.skipped.size(), 1u);
  EXPECT_FALSE(sweep.skipped[0].skipped_reason.empty());

  down = Table({"vqa-kl"}, "gender", {"a", "b", "c", "d"}, rng);
  down["vqa-kl"]["gender"]["d"] = std::nullopt;
  sweep = CorrelationSweep(pre, down);
  ASSERT_EQ(sweep.results.size(), 1u);
  EXPECT_EQ(sweep.results[0].models, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(GapTest, SameAndOppositeSigns) {
  const ProtectedAttribute attr{"gender", {"female", "male"}};
  PerDemographicValues pre, same, opposite;
  for (int m = 0; m < 6; ++m) {
    const std::string id = "m" + std::to_string(m);
    const double gap = m % 2 ? 0.1 * (m + 1) : -0.1 * (m + 1);
    pre[id] = {0.5 + gap, 0.5};
    same[id] = {0.3 + gap, 0.3};
    opposite[id] = {0.3 - gap, 0.3};
  }
  auto s = GapQuadrants(attr, pre, same);
  ASSERT_TRUE(s.ok());
  EXPECT_EQ(s->same_sign, 1.0);
  EXPECT_EQ(s->opposite_sign, 0.0);
  auto o = GapQuadrants(attr, pre, opposite);
  EXPECT_EQ(o->opposite_sign, 1.0);
  for (const GapPoint& p : o->points) {
    EXPECT_EQ(p.quadrant, p.pre_gap > 0 ? Quadrant::kIV : Quadrant::kII);
  }
}

TEST(GapTest, AxisSkippedAndErrors) {
  const ProtectedAttribute attr{"gender", {"female", "male"}};
  PerDemographicValues pre = {{"a", {0.5, 0.5}}, {"b", {0.6, 0.5}}, {"c", {0.6, std::nullopt}}};
  PerDemographicValues down = {{"a", {0.2, 0.1}}, {"b", {0.2, 0.1}}, {"c", {0.2, 0.1}}};
  auto s = GapQuadrants(attr, pre, down);
  ASSERT_TRUE(s.ok());
  EXPECT_EQ(s->points.size(), 2u);
  EXPECT_EQ(s->points[0].quadrant, Quadrant::kAxis);
  EXPECT_EQ(s->on_axis, 0.5);
  EXPECT_EQ(s->skipped_models, (std::vector<std::string>{"c"}));
  const ProtectedAttribute three{"age", {"x", "y", "z"}};
  EXPECT_FALSE(GapQuadrants(three, pre, down).ok());
}

}  // namespace
}  // namespace biasaudit
