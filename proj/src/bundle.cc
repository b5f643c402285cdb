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


#include "biasaudit/bundle.h"

#include <filesystem>

#include "absl/strings/str_cat.h"
#include "biasaudit/retrieval_bias.h"
#include "biasaudit/status_macros.h"
#include "nlohmann/json.hpp"

namespace biasaudit {
namespace {

using Json = nlohmann::json;

// Records one metric cell, defined or not.
void Put(MetricTables& tables, const std::string& metric,
         const std::string& attribute, const std::string& model,
         const Measurement& measurement) {
  tables.values[metric][attribute][model] = measurement.value;
  if (!measurement.defined()) {
    tables.reasons[metric][attribute][model] = measurement.reason;
  }
}

Measurement FromStatus(const absl::Status& status) {
  return Measurement::Undefined(std::string(status.message()));
}

}  // namespace

absl::StatusOr<BundleManifest> LoadManifest(const std::string& path) {
  ASSIGN_OR_RETURN(const std::string text, ReadFile(path));
  const Json json = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (json.is_discarded() || !json.is_object()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": manifest is not a JSON object"));
  }
  const std::filesystem::path base =
      std::filesystem::path(path).parent_path();
  auto resolve = [&](const Json& object, const char* key) -> std::string {
    if (!object.contains(key)) return "";
    return (base / object.at(key).get<std::string>()).string();
  };
  BundleManifest manifest;
  manifest.path = path;
  try {
    manifest.schema = resolve(json, "schema");
    manifest.annotations = resolve(json, "annotations");
    manifest.pairs = resolve(json, "pairs");
    if (json.contains("settings")) {
      const Json& settings = json.at("settings");
      if (settings.contains("recall_k")) {
        manifest.recall_k = settings.at("recall_k").get<int>();
      }
      if (settings.contains("skew_k")) {
        manifest.skew_k = settings.at("skew_k").get<int>();
      }
    }
    for (const Json& entry : json.at("models")) {
      BundleModel model;
      model.id = entry.at("id").get<std::string>();
      model.images = resolve(entry, "images");
      model.texts = resolve(entry, "texts");
      model.prompts = resolve(entry, "prompts");
      model.post = resolve(entry, "post");
      model.vqa = resolve(entry, "vqa");
      model.captions = resolve(entry, "captions");
      model.scores = resolve(entry, "scores");
      manifest.models.push_back(std::move(model));
    }
  } catch (const Json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": malformed manifest: ", e.what()));
  }
  if (manifest.schema.empty() || manifest.annotations.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": manifest needs \"schema\" and \"annotations\""));
  }
  if (manifest.models.empty()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": no models listed"));
  }
  return manifest;
}

absl::StatusOr<BundleStage> ParseBundleStage(std::string_view name) {
  if (name == "pre") return BundleStage::kPre;
  if (name == "down") return BundleStage::kDown;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown stage '", std::string(name), "' (pre|down)"));
}

absl::StatusOr<BundleAudit> AuditBundle(const BundleManifest& manifest,
                                        BundleStage stage,
                                        const BundleAuditOptions& options) {
  BundleAudit audit;
  ASSIGN_OR_RETURN(const AttributeSchema schema,
                   LoadAttributeSchema(manifest.schema));
  ASSIGN_OR_RETURN(const AnnotationTable annotations,
                   LoadAnnotations(manifest.annotations, schema));
  audit.inputs = {manifest.path, manifest.schema, manifest.annotations};
  const int recall_k = options.recall_k > 0 ? options.recall_k : manifest.recall_k;
  const int skew_k = options.skew_k > 0 ? options.skew_k : manifest.skew_k;
  MetricTables& tables = audit.tables;
  for (const ProtectedAttribute& attribute : schema.attributes) {
    tables.demographics[attribute.name] = attribute.demographics;
  }

  RetrievalPairs pairs;
  if (stage == BundleStage::kPre) {
    if (manifest.pairs.empty()) {
      return absl::InvalidArgumentError("pre-stage audit needs \"pairs\"");
    }
    ASSIGN_OR_RETURN(pairs, LoadPairs(manifest.pairs));
    audit.inputs.push_back(manifest.pairs);
  }

  for (const BundleModel& model : manifest.models) {
    if (stage == BundleStage::kPre) {
      ASSIGN_OR_RETURN(EmbeddingSet images, LoadEmbeddings(model.images));
      ASSIGN_OR_RETURN(EmbeddingSet texts, LoadEmbeddings(model.texts));
      audit.inputs.push_back(model.images);
      audit.inputs.push_back(model.texts);
      std::optional<EmbeddingSet> prompts;
      if (!model.prompts.empty()) {
        ASSIGN_OR_RETURN(prompts, LoadEmbeddings(model.prompts));
        audit.inputs.push_back(model.prompts);
      }
      const RetrievalCorpus corpus{std::move(images), std::move(texts), pairs};
      RETURN_IF_ERROR(ValidateCorpus(corpus));
      for (const ProtectedAttribute& attribute : schema.attributes) {
        ASSIGN_OR_RETURN(const DemographicPartition partition,
                         PartitionByDemographic(annotations, attribute,
                                                corpus.images.ids()));
        auto recall = RecallAtK(corpus, partition, recall_k);
        if (recall.ok()) {
          Put(tables, "recall-kl", attribute.name, model.id, KlOfRecall(*recall));
          tables.per_demographic["recall"][attribute.name][model.id] =
              recall->recall;
        } else {
          Put(tables, "recall-kl", attribute.name, model.id,
              FromStatus(recall.status()));
        }
        if (prompts) {
          auto skew = MeanMaxSkew(corpus.images, *prompts, partition, skew_k);
          Put(tables, "maxskew", attribute.name, model.id,
              skew.ok() ? skew->mean : FromStatus(skew.status()));
        }
      }
      continue;
    }

    std::optional<PredictionSet> vqa, captions, scores;
    if (!model.vqa.empty()) {
      ASSIGN_OR_RETURN(vqa, LoadPredictions(model.vqa, TaskKind::kVqa));
      audit.inputs.push_back(model.vqa);
    }
    if (!model.captions.empty()) {
      ASSIGN_OR_RETURN(captions,
                       LoadPredictions(model.captions, TaskKind::kCaptioning));
      audit.inputs.push_back(model.captions);
    }
    if (!model.scores.empty()) {
      ASSIGN_OR_RETURN(scores, LoadPredictions(model.scores, TaskKind::kScored));
      audit.inputs.push_back(model.scores);
    }
    for (const ProtectedAttribute& attribute : schema.attributes) {
      std::vector<std::string> ids;
      for (const auto& [id, labels] : annotations.rows()) ids.push_back(id);
      ASSIGN_OR_RETURN(const DemographicPartition partition,
                       PartitionByDemographic(annotations, attribute, ids));
      if (vqa) {
        const ScoreTable accuracy =
            VqaScoreTable(*vqa, partition, options.vqa_mode);
        Put(tables, "vqa-kl", attribute.name, model.id, KlDisparity(accuracy));
        tables.per_demographic["vqa-accuracy"][attribute.name][model.id] =
            accuracy.mean;
        const DbaInputs filtered =
            FilterAnswers(MakeDbaInputs(*vqa, partition), options.top_answers);
        auto dba = Dba(filtered);
        Put(tables, "dba", attribute.name, model.id,
            dba.ok() ? Measurement::Of(dba->value) : FromStatus(dba.status()));
      }
      if (scores) {
        const ScoreTable means =
            MeanScoreTable(*scores, partition, options.score_metric);
        Put(tables, options.score_metric + "-kl", attribute.name, model.id,
            KlDisparity(means));
        tables.per_demographic[options.score_metric][attribute.name][model.id] =
            means.mean;
      }
      if (captions) {
        const auto gt =
            LabelCaptions(*captions, partition, CaptionOrigin::kGroundTruth);
        const auto pred =
            LabelCaptions(*captions, partition, CaptionOrigin::kGenerated);
        auto lic = Lic(gt, pred, attribute.size(), options.seed, options.leakage);
        Put(tables, "lic", attribute.name, model.id,
            lic.ok() ? Measurement::Of(lic->lic) : FromStatus(lic.status()));
      }
    }
  }
  return audit;
}

}  // namespace biasaudit
