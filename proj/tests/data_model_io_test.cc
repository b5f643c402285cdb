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


#include <set>

#include "biasaudit/data_model.h"
#include "biasaudit/io.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace biasaudit {
namespace {

using ::testing::HasSubstr;
using testing::MakeSet;

TEST(ProtectedAttributeTest, ValidatesLabels) {
  EXPECT_TRUE(MakeProtectedAttribute("gender", {"female", "male"}).ok());
  EXPECT_FALSE(MakeProtectedAttribute("gender", {"female"}).ok());
  EXPECT_FALSE(MakeProtectedAttribute("gender", {"a", "a"}).ok());
  EXPECT_FALSE(MakeProtectedAttribute("", {"a", "b"}).ok());
  const ProtectedAttribute attribute{"gender", {"female", "male"}};
  EXPECT_EQ(attribute.IndexOf("male"), 1u);
  EXPECT_FALSE(attribute.IndexOf("other").has_value());
}

TEST(EmbeddingSetTest, RejectsBadInput) {
  EXPECT_FALSE(EmbeddingSet::Create("m", {"a", "a"}, 1, {1, 2}).ok());
  EXPECT_FALSE(EmbeddingSet::Create("m", {"a"}, 0, {}).ok());
  EXPECT_FALSE(EmbeddingSet::Create("m", {"a"}, 2, {1}).ok());
  EXPECT_FALSE(
      EmbeddingSet::Create("m", {"a"}, 1, {std::numeric_limits<float>::quiet_NaN()})
          .ok());
  EXPECT_FALSE(
      EmbeddingSet::Create("m", {"a"}, 1, {std::numeric_limits<float>::infinity()})
          .ok());
}

TEST(EmbeddingIoTest, ThreeRowRoundTrip) {
  const EmbeddingSet set = MakeSet("m", {"a", "b", "c"}, {{1, 0}, {0, 1}, {1, 1}});
  const std::string bytes = SerializeEmbeddings(set);
  auto parsed = ParseEmbeddings(bytes);
  ASSERT_TRUE(parsed.ok()) << parsed.status();
  EXPECT_EQ(parsed->size(), 3u);
  EXPECT_EQ(parsed->dim(), 2u);
  EXPECT_EQ(parsed->ids(), set.ids());
  EXPECT_EQ(parsed->values(), set.values());
  EXPECT_EQ(parsed->RowOf("c"), 2u);
}

TEST(EmbeddingIoTest, TruncatedPayload) {
  const EmbeddingSet set =
      MakeSet("m", {"a", "b", "c", "d"}, {{1, 0}, {0, 1}, {1, 1}, {2, 2}});
  std::string bytes = SerializeEmbeddings(set);
  bytes.resize(bytes.size() - 8);  // declared 4 rows, 3 present
  auto parsed = ParseEmbeddings(bytes);
  ASSERT_FALSE(parsed.ok());
  EXPECT_THAT(std::string(parsed.status().message()), HasSubstr("truncated payload"));
}

TEST(EmbeddingIoTest, DistinctDiagnostics) {
  const std::string good = SerializeEmbeddings(MakeSet("m", {"a"}, {{1, 2}}));
  std::set<std::string> messages;
  auto message = [&](const std::string& bytes) {
    auto parsed = ParseEmbeddings(bytes);
    EXPECT_FALSE(parsed.ok());
    messages.insert(std::string(parsed.status().message()));
  };
  message("XXXXXXXX" + good.substr(8));
  message(good.substr(0, 10));
  message(good.substr(0, 20));
  message(good + "x");
  EXPECT_EQ(messages.size(), 4u);
}

TEST(EmbeddingIoTest, RandomRoundTripIsByteIdentical) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 1 + rng.Below(30), dim = 1 + rng.Below(16);
    const EmbeddingSet set = MakeSet(
        "model-" + std::to_string(trial), testing::Ids("x", n), testing::RandomRows(rng, n, dim));
    const std::string bytes = SerializeEmbeddings(set);
    auto parsed = ParseEmbeddings(bytes);
    ASSERT_TRUE(parsed.ok()) << parsed.status();
    EXPECT_EQ(SerializeEmbeddings(*parsed), bytes);
  }
}

TEST(EmbeddingIoTest, FileRoundTrip) {
  const std::string dir = testing::TempDir("io");
  const EmbeddingSet set = MakeSet("m", {"a", "b"}, {{1, 0.5}, {-2, 3}});
  ASSERT_TRUE(WriteEmbeddings(set, dir + "/e.emb").ok());
  auto loaded = LoadEmbeddings(dir + "/e.emb");
  ASSERT_TRUE(loaded.ok());
  EXPECT_EQ(loaded->values(), set.values());
  EXPECT_FALSE(LoadEmbeddings(dir + "/missing.emb").ok());
}

TEST(AnnotationTest, ParseAndSerialize) {
  const AttributeSchema schema = testing::TwoAttributeSchema();
  const std::string text =
      "{\"id\":\"a\",\"attributes\":{\"gender\":\"female\"}}\n"
      "{\"id\":\"b\",\"attributes\":{\"gender\":[\"female\",\"male\"]}}\n"
      "{\"id\":\"c\"}\n";
  auto table = ParseAnnotations(text, schema);
  ASSERT_TRUE(table.ok()) << table.status();
  EXPECT_EQ(table->size(), 3u);
  EXPECT_EQ(table->Labels("b", "gender").size(), 2u);
  auto again = ParseAnnotations(SerializeAnnotations(*table), schema);
  ASSERT_TRUE(again.ok());
  EXPECT_EQ(SerializeAnnotations(*again), SerializeAnnotations(*table));

  EXPECT_FALSE(ParseAnnotations("{\"id\":\"a\",\"attributes\":{\"gender\":\"x\"}}\n",
                                schema)
                   .ok());
  EXPECT_FALSE(ParseAnnotations("{\"id\":\"a\"}\n{\"id\":\"a\"}\n", schema).ok());
  EXPECT_FALSE(ParseAnnotations("not json\n", schema).ok());
}

TEST(AnnotationTest, InferSchema) {
  auto schema = InferAttributeSchema(
      "{\"id\":\"a\",\"attributes\":{\"gender\":\"male\",\"age\":\"old\"}}\n"
      "{\"id\":\"b\",\"attributes\":{\"gender\":[\"female\"],\"age\":\"young\"}}\n");
  ASSERT_TRUE(schema.ok());
  ASSERT_EQ(schema->attributes.size(), 2u);
  EXPECT_EQ(schema->attributes[1].name, "gender");
  EXPECT_EQ(schema->attributes[1].demographics,
            (std::vector<std::string>{"female", "male"}));
}

TEST(SchemaTest, RoundTrip) {
  const AttributeSchema schema = testing::TwoAttributeSchema();
  auto parsed = ParseAttributeSchema(SerializeAttributeSchema(schema));
  ASSERT_TRUE(parsed.ok()) << parsed.status();
  EXPECT_EQ(parsed->attributes.size(), 2u);
  EXPECT_EQ(parsed->attributes[1].demographics[1], "darker");
  EXPECT_FALSE(parsed->Find("age").ok());
}

TEST(PredictionsTest, RoundTripPerTask) {
  PredictionSet vqa;
  vqa.task = TaskKind::kVqa;
  vqa.vqa.push_back({"a", "q1", "what color?", "red", {"red", "red", "blue"}});
  auto parsed = ParsePredictions(SerializePredictions(vqa), TaskKind::kVqa);
  ASSERT_TRUE(parsed.ok()) << parsed.status();
  EXPECT_EQ(parsed->vqa[0].gt.size(), 3u);

  PredictionSet captions;
  captions.task = TaskKind::kCaptioning;
  captions.captions.push_back({"a", "a photo", CaptionOrigin::kGenerated});
  captions.captions.push_back({"a", "a picture", CaptionOrigin::kGroundTruth});
  parsed = ParsePredictions(SerializePredictions(captions), TaskKind::kCaptioning);
  ASSERT_TRUE(parsed.ok()) << parsed.status();
  EXPECT_EQ(parsed->captions[0].origin, CaptionOrigin::kGenerated);

  PredictionSet scored;
  scored.task = TaskKind::kScored;
  scored.scored.push_back({"a", "cider", 0.75});
  parsed = ParsePredictions(SerializePredictions(scored), TaskKind::kScored);
  ASSERT_TRUE(parsed.ok()) << parsed.status();
  EXPECT_EQ(parsed->scored[0].value, 0.75);
  EXPECT_FALSE(ParsePredictions("{\"id\":\"a\"}\n", TaskKind::kVqa).ok());
}

TEST(PairsTest, RoundTrip) {
  const RetrievalPairs pairs = {{"i1", {"t1", "t2"}}, {"i2", {"t3"}}};
  auto parsed = ParsePairs(SerializePairs(pairs));
  ASSERT_TRUE(parsed.ok()) << parsed.status();
  EXPECT_EQ(*parsed, pairs);
}

TEST(Sha256Test, KnownVector) {
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(PartitionTest, FourIdExample) {
  const ProtectedAttribute gender{"gender", {"female", "male"}};
  const std::vector<std::string> ids = {"A", "B", "C", "D"};
  const AnnotationTable table = testing::SingleAttributeTable(gender, ids, {0, 1, 0, -1});
  auto partition = PartitionByDemographic(table, gender, ids);
  ASSERT_TRUE(partition.ok());
  EXPECT_EQ(partition->buckets[0], (std::vector<std::string>{"A", "C"}));
  EXPECT_EQ(partition->buckets[1], (std::vector<std::string>{"B"}));
  EXPECT_EQ(partition->excluded(), 1u);
  EXPECT_EQ(partition->DemographicOf("C"), 0u);
  EXPECT_FALSE(partition->DemographicOf("D").has_value());
}

TEST(PartitionTest, EmptyIdsAndUnknownAttribute) {
  const ProtectedAttribute gender{"gender", {"female", "male"}};
  const AnnotationTable table = testing::SingleAttributeTable(gender, {"A"}, {0});
  auto partition = PartitionByDemographic(table, gender, {});
  ASSERT_TRUE(partition.ok());
  EXPECT_TRUE(partition->buckets[0].empty());
  EXPECT_TRUE(partition->buckets[1].empty());
  EXPECT_FALSE(
      PartitionByDemographic(table, ProtectedAttribute{"age", {"x", "y"}}, {}).ok());
}

TEST(PartitionTest, MixedLabelsAreExcludedAndMissingIdsCounted) {
  const AttributeSchema schema = testing::TwoAttributeSchema();
  AnnotationTable table(schema);
  ASSERT_TRUE(table.Add("a", "gender", {"female", "male"}).ok());
  ASSERT_TRUE(table.Add("b", "gender", {"male"}).ok());
  const std::vector<std::string> ids = {"a", "b", "zz"};
  auto partition = PartitionByDemographic(table, schema.attributes[0], ids);
  ASSERT_TRUE(partition.ok());
  EXPECT_EQ(partition->excluded_ids, (std::vector<std::string>{"a"}));
  EXPECT_EQ(partition->unannotated, 1u);
  EXPECT_EQ(partition->assigned(), 1u);
}

TEST(PartitionTest, RandomCountingProperty) {
  SplitMix64 rng(3);
  const ProtectedAttribute attribute{"a", {"x", "y", "z"}};
  const auto ids = testing::Ids("s", 1000);
  std::vector<int> labels;
  for (size_t i = 0; i < ids.size(); ++i) labels.push_back(static_cast<int>(rng.Below(4)) - 1);
  const AnnotationTable table = testing::SingleAttributeTable(attribute, ids, labels);
  auto partition = PartitionByDemographic(table, attribute, ids);
  ASSERT_TRUE(partition.ok());
  std::set<std::string> seen;
  size_t total = 0;
  for (size_t a = 0; a < 3; ++a) {
    size_t expected = 0;
    for (int label : labels) expected += label == static_cast<int>(a);
    EXPECT_EQ(partition->buckets[a].size(), expected);
    for (const auto& id : partition->buckets[a]) EXPECT_TRUE(seen.insert(id).second);
    total += partition->buckets[a].size();
  }
  EXPECT_EQ(total + partition->excluded(), ids.size());

  const std::set<std::string> subset(ids.begin(), ids.begin() + 100);
  const DemographicPartition restricted = partition->Restrict(subset);
  EXPECT_EQ(restricted.assigned() + restricted.excluded(), 100u);
}

}  // namespace
}  // namespace biasaudit
