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


#include <numeric>
#include <string>
#include <vector>

#include "biasaudit/leakage.h"
#include "biasaudit/random.h"
#include "biasaudit/synthetic.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace biasaudit {
namespace {

std::vector<LabeledCaption> Separable(size_t per_class) {
  std::vector<LabeledCaption> captions;
  for (size_t i = 0; i < 2 * per_class; ++i) {
    const size_t a = i % 2;
    captions.push_back({"c" + std::to_string(i),
                        std::string("a photo of a ") + (a ? "crimson" : "azure") + " bicycle",
                        a});
  }
  return captions;
}

TEST(TokenizeTest, LowercaseSplitOnNonAlphanumeric) {
  EXPECT_EQ(Tokenize("A man's Bike-2!"),
            (std::vector<std::string>{"a", "man", "s", "bike", "2"}));
  EXPECT_TRUE(Tokenize("...").empty());
}

TEST(ClassifierTest, SeparableCorpusIsLearned) {
  const auto captions = Separable(50);
  auto classifier = TrainLeakageClassifier(captions, 2, 1, DefaultLeakageOptions());
  ASSERT_TRUE(classifier.ok()) << classifier.status();
  size_t correct = 0;
  for (const auto& c : captions) correct += classifier->Predict(c.caption) == c.demographic;
  EXPECT_GE(static_cast<double>(correct) / captions.size(), 0.99);
  const auto p = classifier->Probabilities("azure");
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-9);
  EXPECT_GT(p[0], p[1]);
}

TEST(ClassifierTest, ShuffledLabelsAreNearChance) {
  double total = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 rng(seed);
    std::vector<LabeledCaption> captions;
    std::vector<size_t> labels(200);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
    rng.Shuffle(labels);
    for (size_t i = 0; i < labels.size(); ++i) {
      captions.push_back({"c" + std::to_string(i),
                          "object " + std::to_string(rng.Below(30)) + " scene " +
                              std::to_string(rng.Below(30)),
                          labels[i]});
    }
    double accuracy = 0.0;
    ASSERT_TRUE(LeakageScore(captions, 2, seed, DefaultLeakageOptions(), &accuracy).ok());
    total += accuracy;
  }
  EXPECT_NEAR(total / 20, 0.5, 0.1);
}

TEST(ClassifierTest, IdenticalCaptionGivesEvenOdds) {
  std::vector<LabeledCaption> captions = {{"a", "a dog", 0}, {"b", "a dog", 1}};
  auto classifier = TrainLeakageClassifier(captions, 2, 0, DefaultLeakageOptions());
  ASSERT_TRUE(classifier.ok());
  const auto p = classifier->Probabilities("a dog");
  EXPECT_NEAR(p[0], 0.5, 1e-9);
  EXPECT_NEAR(p[1], 0.5, 1e-9);
  EXPECT_EQ(classifier->Predict("a dog"), 0u);
}

TEST(ClassifierTest, MissingDemographicIsError) {
  std::vector<LabeledCaption> captions = {{"a", "a dog", 0}};
  EXPECT_FALSE(TrainLeakageClassifier(captions, 2, 0, DefaultLeakageOptions()).ok());
}

TEST(ClassifierTest, MaskingHidesGenderWords) {
  std::vector<LabeledCaption> captions;
  for (size_t i = 0; i < 60; ++i) {
    captions.push_back({"c" + std::to_string(i), i % 2 ? "a man rides" : "a woman rides", i % 2});
  }
  double masked = 0.0, unmasked = 0.0;
  LeakageOptions options = DefaultLeakageOptions();
  ASSERT_TRUE(LeakageScore(captions, 2, 0, options, &masked).ok());
  options.mask = false;
  ASSERT_TRUE(LeakageScore(captions, 2, 0, options, &unmasked).ok());
  EXPECT_LE(masked, 0.5);
  EXPECT_GE(unmasked, 0.99);
}

TEST(ClassifierTest, DeterministicGivenSeed) {
  const CaptionPair pair = GenLeakCaptions(3, 60, 0.0, 0.4);
  auto a = TrainLeakageClassifier(pair.generated, 2, 9, DefaultLeakageOptions());
  auto b = TrainLeakageClassifier(pair.generated, 2, 9, DefaultLeakageOptions());
  for (const auto& c : pair.generated) {
    EXPECT_EQ(a->Probabilities(c.caption), b->Probabilities(c.caption));
  }
}

TEST(LicTest, IdenticalInputsGiveZero) {
  const CaptionPair pair = GenLeakCaptions(1, 60, 0.3, 0.3);
  auto result = Lic(pair.ground_truth, pair.ground_truth, 2, 5, DefaultLeakageOptions());
  ASSERT_TRUE(result.ok());
  EXPECT_EQ(result->lic, 0.0);
  EXPECT_EQ(result->lic_gt, result->lic_pred);
}

TEST(LicTest, SignFollowsInjectedLeakage) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const CaptionPair into_pred = GenLeakCaptions(seed, 100, 0.0, 0.5);
    auto up = Lic(into_pred.ground_truth, into_pred.generated, 2, seed, DefaultLeakageOptions());
    ASSERT_TRUE(up.ok());
    EXPECT_GT(up->lic, 0.0) << "seed " << seed;
    const CaptionPair into_gt = GenLeakCaptions(seed, 100, 0.5, 0.0);
    auto down = Lic(into_gt.ground_truth, into_gt.generated, 2, seed, DefaultLeakageOptions());
    EXPECT_LT(down->lic, 0.0) << "seed " << seed;
    for (const LicResult* r : {&*up, &*down}) {
      EXPECT_GE(r->lic_gt, 0.0);
      EXPECT_LE(r->lic_pred, 1.0);
    }
  }
}

TEST(LicTest, CaptionOrderDoesNotMatter) {
  const CaptionPair pair = GenLeakCaptions(2, 50, 0.1, 0.4);
  std::vector<LabeledCaption> shuffled = pair.generated;
  SplitMix64 rng(0);
  rng.Shuffle(shuffled);
  auto a = Lic(pair.ground_truth, pair.generated, 2, 7, DefaultLeakageOptions());
  auto b = Lic(pair.ground_truth, shuffled, 2, 7, DefaultLeakageOptions());
  EXPECT_EQ(a->lic, b->lic);
}

TEST(LabelCaptionsTest, FiltersByOriginAndPartition) {
  PredictionSet predictions;
  predictions.task = TaskKind::kCaptioning;
  predictions.captions = {{"i1", "b", CaptionOrigin::kGenerated},
                          {"i0", "a", CaptionOrigin::kGenerated},
                          {"i0", "gt", CaptionOrigin::kGroundTruth},
                          {"i7", "x", CaptionOrigin::kGenerated}};
  const ProtectedAttribute attr{"g", {"x", "y"}};
  const auto table = testing::SingleAttributeTable(attr, {"i0", "i1"}, {1, 0});
  const auto partition =
      *PartitionByDemographic(table, attr, std::vector<std::string>{"i0", "i1", "i7"});
  const auto labeled = LabelCaptions(predictions, partition, CaptionOrigin::kGenerated);
  ASSERT_EQ(labeled.size(), 2u);
  EXPECT_EQ(labeled[0].id, "i0");
  EXPECT_EQ(labeled[0].demographic, 1u);
  EXPECT_EQ(labeled[1].caption, "b");
}

}  // namespace
}  // namespace biasaudit
