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


// biasaudit: command-line surface of the toolkit.
//
//   biasaudit audit recall|maxskew|downstream|bundle ...
//   biasaudit groups discover|audit ...
//   biasaudit transfer correlate|gaps ...
//   biasaudit converge compare ...
//   biasaudit synth generate ...
//
// Global flags: --seed, --config (JSON; command line wins), --out,
// --format json|csv, --plot PATH.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "biasaudit/bundle.h"
#include "biasaudit/convergence.h"
#include "biasaudit/data_model.h"
#include "biasaudit/downstream_bias.h"
#include "biasaudit/io.h"
#include "biasaudit/leakage.h"
#include "biasaudit/local_bias.h"
#include "biasaudit/plot.h"
#include "biasaudit/report.h"
#include "biasaudit/retrieval_bias.h"
#include "biasaudit/status_macros.h"
#include "biasaudit/synthetic.h"
#include "biasaudit/transfer_stats.h"
#include "nlohmann/json.hpp"

namespace biasaudit {
namespace {

using Json = nlohmann::json;

// Reads a JSON object as CLI11 configuration. Nested objects name
// subcommands, e.g. {"seed": 1, "audit": {"recall": {"k": 10}}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool,
                        std::string) const override {
    Json out = Json::object();
    for (const CLI::Option* option : app->get_options()) {
      const std::string name = option->get_single_name();
      if (name.empty() || name == "help") continue;
      if (option->count() > 0) {
        out[name] = option->as<std::string>();
      } else if (default_also && !option->get_default_str().empty()) {
        out[name] = option->get_default_str();
      }
    }
    return out.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    Json json;
    try {
      input >> json;
    } catch (const Json::exception& e) {
      throw CLI::ConversionError(absl::StrCat("config is not valid JSON: ", e.what()));
    }
    if (!json.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    Collect(json, {}, items);
    return items;
  }

 private:
  static std::string Scalar(const Json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
  }

  static void Collect(const Json& object, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : object.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        Collect(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& element : value) item.inputs.push_back(Scalar(element));
      } else {
        item.inputs.push_back(Scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Globals {
  uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  std::string plot;
};

// Output destinations and the config path do not change results and are
// left out of the parameter echo.
const std::set<std::string>& UnechoedOptions() {
  static const auto* names =
      new std::set<std::string>{"help", "config", "out", "plot"};
  return *names;
}

void EchoOptions(const CLI::App* app, Json& params) {
  for (const CLI::Option* option : app->get_options()) {
    std::string name = option->get_single_name();
    if (name.empty() || UnechoedOptions().count(name)) continue;
    std::vector<std::string> values = option->results();
    if (values.empty() && !option->get_default_str().empty()) {
      values = {option->get_default_str()};
    }
    if (option->get_expected_max() > 1) {
      params[name] = values;
    } else if (values.empty()) {
      params[name] = option->get_type_size() == 0 ? Json(false) : Json(nullptr);
    } else if (option->get_type_size() == 0) {
      params[name] = values.back() != "false" && values.back() != "0";
    } else {
      params[name] = values.back();
    }
  }
}

absl::StatusOr<AttributeSchema> SchemaFor(const std::string& schema_path,
                                          const std::string& annotations_path,
                                          BiasReport& report) {
  if (!schema_path.empty()) {
    RETURN_IF_ERROR(AddInputDigest(report, schema_path));
    return LoadAttributeSchema(schema_path);
  }
  ASSIGN_OR_RETURN(const std::string text, ReadFile(annotations_path));
  return InferAttributeSchema(text);
}

struct LabeledData {
  AttributeSchema schema;
  AnnotationTable annotations;
  ProtectedAttribute attribute;
};

absl::StatusOr<LabeledData> LoadLabeled(const std::string& schema_path,
                                        const std::string& annotations_path,
                                        const std::string& attribute,
                                        BiasReport& report) {
  ASSIGN_OR_RETURN(AttributeSchema schema,
                   SchemaFor(schema_path, annotations_path, report));
  RETURN_IF_ERROR(AddInputDigest(report, annotations_path));
  ASSIGN_OR_RETURN(AnnotationTable annotations,
                   LoadAnnotations(annotations_path, schema));
  ASSIGN_OR_RETURN(ProtectedAttribute found, schema.Find(attribute));
  return LabeledData{std::move(schema), std::move(annotations), std::move(found)};
}

absl::StatusOr<EmbeddingSet> LoadTracked(const std::string& path,
                                         BiasReport& report) {
  RETURN_IF_ERROR(AddInputDigest(report, path));
  return LoadEmbeddings(path);
}

Json PerDemographic(const ProtectedAttribute& attribute,
                    const std::vector<std::optional<double>>& values) {
  Json out = Json::object();
  for (size_t d = 0; d < attribute.size(); ++d) {
    out[attribute.demographics[d]] = OptionalJson(values[d]);
  }
  return out;
}

Json PartitionJson(const DemographicPartition& partition) {
  Json sizes = Json::object();
  for (size_t d = 0; d < partition.attribute.size(); ++d) {
    sizes[partition.attribute.demographics[d]] = partition.buckets[d].size();
  }
  return Json{{"attribute", partition.attribute.name},
              {"sizes", std::move(sizes)},
              {"excluded", partition.excluded()},
              {"unannotated", partition.unannotated}};
}

absl::Status WritePlot(const std::string& path, absl::StatusOr<std::string> svg) {
  if (path.empty()) return absl::OkStatus();
  if (!svg.ok()) return svg.status();
  return WriteFile(path, *svg);
}

// ---------------------------------------------------------------- audit

struct RecallFlags {
  std::string images, texts, pairs, annotations, schema, attribute;
  int k = kDefaultRecallK;
};

absl::Status RunAuditRecall(const RecallFlags& flags, const Globals&,
                            BiasReport& report) {
  ASSIGN_OR_RETURN(auto labeled, LoadLabeled(flags.schema, flags.annotations,
                                             flags.attribute, report));
  ASSIGN_OR_RETURN(EmbeddingSet images, LoadTracked(flags.images, report));
  ASSIGN_OR_RETURN(EmbeddingSet texts, LoadTracked(flags.texts, report));
  RETURN_IF_ERROR(AddInputDigest(report, flags.pairs));
  ASSIGN_OR_RETURN(RetrievalPairs pairs, LoadPairs(flags.pairs));
  const RetrievalCorpus corpus{std::move(images), std::move(texts),
                               std::move(pairs)};
  RETURN_IF_ERROR(ValidateCorpus(corpus));
  ASSIGN_OR_RETURN(auto partition,
                   PartitionByDemographic(labeled.annotations, labeled.attribute,
                                          corpus.images.ids()));
  ASSIGN_OR_RETURN(const RecallVector recall, RecallAtK(corpus, partition, flags.k));
  Json hits = Json::object(), counts = Json::object();
  for (size_t d = 0; d < labeled.attribute.size(); ++d) {
    hits[labeled.attribute.demographics[d]] = recall.hits[d];
    counts[labeled.attribute.demographics[d]] = recall.counts[d];
  }
  report.results = {{"model", corpus.images.model_id()},
                    {"k", flags.k},
                    {"recall", PerDemographic(labeled.attribute, recall.recall)},
                    {"hits", std::move(hits)},
                    {"counts", std::move(counts)},
                    {"recall-kl", MeasurementJson(KlOfRecall(recall))},
                    {"partition", PartitionJson(partition)}};
  return absl::OkStatus();
}

struct SkewFlags {
  std::string images, prompts, annotations, schema, attribute;
  int k = kDefaultSkewK;
};

absl::Status RunAuditMaxSkew(const SkewFlags& flags, const Globals&,
                             BiasReport& report) {
  ASSIGN_OR_RETURN(auto labeled, LoadLabeled(flags.schema, flags.annotations,
                                             flags.attribute, report));
  ASSIGN_OR_RETURN(EmbeddingSet images, LoadTracked(flags.images, report));
  ASSIGN_OR_RETURN(EmbeddingSet prompts, LoadTracked(flags.prompts, report));
  ASSIGN_OR_RETURN(auto partition,
                   PartitionByDemographic(labeled.annotations, labeled.attribute,
                                          images.ids()));
  ASSIGN_OR_RETURN(const MeanSkew skew,
                   MeanMaxSkew(images, prompts, partition, flags.k));
  Json per_prompt = Json::array();
  for (const SkewResult& result : skew.per_prompt) {
    Json observed = Json::object(), ideal = Json::object();
    for (size_t d = 0; d < labeled.attribute.size(); ++d) {
      observed[labeled.attribute.demographics[d]] = result.observed[d];
      ideal[labeled.attribute.demographics[d]] = result.ideal[d];
    }
    per_prompt.push_back({{"prompt", result.prompt},
                          {"max_skew", OptionalJson(result.max_skew)},
                          {"observed", std::move(observed)},
                          {"ideal", std::move(ideal)}});
  }
  report.results = {{"model", images.model_id()},
                    {"k", flags.k},
                    {"maxskew", MeasurementJson(skew.mean)},
                    {"skipped_prompts", skew.skipped},
                    {"prompts", std::move(per_prompt)},
                    {"partition", PartitionJson(partition)}};
  return absl::OkStatus();
}

struct DownstreamFlags {
  std::string task, pred, gt, annotations, schema, attribute, scores;
  std::vector<std::string> metrics;
  std::string vqa_mode = "soft";
  int top_answers = kDefaultTopAnswers;
  bool no_mask = false;
  std::string score_metric;
};

absl::Status RunAuditDownstream(const DownstreamFlags& flags,
                                const Globals& globals, BiasReport& report) {
  ASSIGN_OR_RETURN(auto labeled, LoadLabeled(flags.schema, flags.annotations,
                                             flags.attribute, report));
  std::vector<std::string> ids;
  for (const auto& [id, labels] : labeled.annotations.rows()) ids.push_back(id);
  ASSIGN_OR_RETURN(auto partition,
                   PartitionByDemographic(labeled.annotations, labeled.attribute,
                                          ids));
  const bool vqa = flags.task == "vqa";
  std::vector<std::string> metrics = flags.metrics;
  if (metrics.empty()) {
    metrics = vqa ? std::vector<std::string>{"kl", "dba"}
                  : std::vector<std::string>{"lic"};
    if (!vqa && !flags.scores.empty()) metrics.push_back("kl");
  }
  Json results = {{"task", flags.task},
                  {"attribute", labeled.attribute.name},
                  {"partition", PartitionJson(partition)}};

  if (vqa) {
    RETURN_IF_ERROR(AddInputDigest(report, flags.pred));
    ASSIGN_OR_RETURN(PredictionSet predictions,
                     LoadPredictions(flags.pred, TaskKind::kVqa));
    if (!flags.gt.empty()) {
      // Ground-truth answers from a separate file, matched by question id.
      RETURN_IF_ERROR(AddInputDigest(report, flags.gt));
      ASSIGN_OR_RETURN(PredictionSet truth, LoadPredictions(flags.gt, TaskKind::kVqa));
      std::map<std::string, std::vector<std::string>> answers;
      for (const auto& entry : truth.vqa) answers[entry.qid] = entry.gt;
      for (auto& entry : predictions.vqa) {
        const auto found = answers.find(entry.qid);
        if (found == answers.end()) {
          return absl::InvalidArgumentError(
              absl::StrCat("question ", entry.qid, " has no ground truth in ",
                           flags.gt));
        }
        entry.gt = found->second;
      }
    }
    const VqaAccuracyMode mode =
        flags.vqa_mode == "hard" ? VqaAccuracyMode::kHard : VqaAccuracyMode::kSoft;
    for (const std::string& metric : metrics) {
      if (metric == "kl") {
        const ScoreTable accuracy = VqaScoreTable(predictions, partition, mode);
        results["vqa-accuracy"] = PerDemographic(labeled.attribute, accuracy.mean);
        results["vqa-kl"] = MeasurementJson(KlDisparity(accuracy));
        results["vqa_mode"] = flags.vqa_mode;
      } else if (metric == "dba") {
        AnswerFilterStats stats;
        const DbaInputs filtered = FilterAnswers(
            MakeDbaInputs(predictions, partition), flags.top_answers, &stats);
        auto dba = Dba(filtered);
        results["dba"] = MeasurementJson(
            dba.ok() ? Measurement::Of(dba->value)
                     : Measurement::Undefined(std::string(dba.status().message())));
        results["dba_filter"] = {{"binary", stats.binary},
                                 {"numeric", stats.numeric},
                                 {"infrequent", stats.infrequent},
                                 {"kept", stats.kept},
                                 {"top_answers", flags.top_answers}};
        if (dba.ok()) {
          results["dba_vocabulary"] = dba->vocabulary.size();
          results["dba_empty_demographics"] = dba->empty_demographics;
        }
      } else {
        return absl::InvalidArgumentError(
            absl::StrCat("metric '", metric, "' does not apply to vqa (kl|dba)"));
      }
    }
    report.results = std::move(results);
    return absl::OkStatus();
  }

  for (const std::string& metric : metrics) {
    if (metric == "lic") {
      RETURN_IF_ERROR(AddInputDigest(report, flags.pred));
      ASSIGN_OR_RETURN(PredictionSet generated,
                       LoadPredictions(flags.pred, TaskKind::kCaptioning));
      PredictionSet truth = generated;
      if (!flags.gt.empty()) {
        RETURN_IF_ERROR(AddInputDigest(report, flags.gt));
        ASSIGN_OR_RETURN(truth, LoadPredictions(flags.gt, TaskKind::kCaptioning));
        // File roles decide the origin when both files are given.
        for (auto& entry : generated.captions) entry.origin = CaptionOrigin::kGenerated;
        for (auto& entry : truth.captions) entry.origin = CaptionOrigin::kGroundTruth;
      }
      LeakageOptions options = DefaultLeakageOptions();
      options.mask = !flags.no_mask;
      const auto gt = LabelCaptions(truth, partition, CaptionOrigin::kGroundTruth);
      const auto pred =
          LabelCaptions(generated, partition, CaptionOrigin::kGenerated);
      auto lic = Lic(gt, pred, labeled.attribute.size(), globals.seed, options);
      if (lic.ok()) {
        results["lic"] = {{"value", lic->lic},
                          {"lic_gt", lic->lic_gt},
                          {"lic_pred", lic->lic_pred},
                          {"accuracy_gt", lic->accuracy_gt},
                          {"accuracy_pred", lic->accuracy_pred}};
      } else {
        results["lic"] = MeasurementJson(
            Measurement::Undefined(std::string(lic.status().message())));
      }
      results["lic_captions"] = {{"ground_truth", gt.size()},
                                 {"generated", pred.size()}};
      results["masking"] = options.mask;
    } else if (metric == "kl") {
      if (flags.scores.empty()) {
        return absl::InvalidArgumentError(
            "caption kl needs --scores with per-sample scores");
      }
      RETURN_IF_ERROR(AddInputDigest(report, flags.scores));
      ASSIGN_OR_RETURN(PredictionSet scores,
                       LoadPredictions(flags.scores, TaskKind::kScored));
      const ScoreTable means = MeanScoreTable(scores, partition, flags.score_metric);
      results["scores"] = PerDemographic(labeled.attribute, means.mean);
      results["score-kl"] = MeasurementJson(KlDisparity(means));
    } else {
      return absl::InvalidArgumentError(
          absl::StrCat("metric '", metric, "' does not apply to captions (lic|kl)"));
    }
  }
  report.results = std::move(results);
  return absl::OkStatus();
}

struct BundleFlags {
  std::string manifest;
  std::string stage = "pre";
  int recall_k = 0;
  int skew_k = 0;
  std::string vqa_mode = "soft";
  int top_answers = kDefaultTopAnswers;
  bool no_mask = false;
};

absl::Status RunAuditBundle(const BundleFlags& flags, const Globals& globals,
                            BiasReport& report) {
  ASSIGN_OR_RETURN(const BundleStage stage, ParseBundleStage(flags.stage));
  ASSIGN_OR_RETURN(const BundleManifest manifest, LoadManifest(flags.manifest));
  BundleAuditOptions options;
  options.recall_k = flags.recall_k;
  options.skew_k = flags.skew_k;
  options.vqa_mode =
      flags.vqa_mode == "hard" ? VqaAccuracyMode::kHard : VqaAccuracyMode::kSoft;
  options.top_answers = flags.top_answers;
  options.leakage.mask = !flags.no_mask;
  options.seed = globals.seed;
  ASSIGN_OR_RETURN(const BundleAudit audit, AuditBundle(manifest, stage, options));
  for (const std::string& path : audit.inputs) {
    RETURN_IF_ERROR(AddInputDigest(report, path));
  }
  report.results = MetricTablesToJson(audit.tables);
  report.results["stage"] = flags.stage;
  report.results["models"] = manifest.models.size();

  if (!globals.plot.empty()) {
    // Rows: metric x attribute, columns: models; normalized per attribute.
    HeatmapInput heatmap;
    heatmap.title = absl::StrCat(flags.stage, " bias");
    for (const auto& model : manifest.models) heatmap.column_labels.push_back(model.id);
    for (const auto& [metric, by_attribute] : audit.tables.values) {
      for (const auto& [attribute, by_model] : by_attribute) {
        heatmap.row_labels.push_back(absl::StrCat(metric, " / ", attribute));
        heatmap.row_groups.push_back(attribute);
        std::vector<std::optional<double>> row;
        for (const auto& model : manifest.models) {
          const auto found = by_model.find(model.id);
          row.push_back(found == by_model.end() ? std::nullopt : found->second);
        }
        heatmap.values.push_back(std::move(row));
      }
    }
    RETURN_IF_ERROR(WritePlot(globals.plot, HeatmapSvg(heatmap)));
  }
  return absl::OkStatus();
}

// ---------------------------------------------------------------- groups

struct DiscoverFlags {
  std::vector<std::string> embeddings;
  int k = kDefaultClusters;
  size_t min_size = kDefaultMinGroupSize;
  std::string reference;
  int restarts = KMeansOptions{}.restarts;
};

absl::Status RunGroupsDiscover(const DiscoverFlags& flags, const Globals& globals,
                               BiasReport& report) {
  std::vector<Clustering> clusterings;
  for (const std::string& path : flags.embeddings) {
    ASSIGN_OR_RETURN(EmbeddingSet embeddings, LoadTracked(path, report));
    KMeansOptions options;
    options.restarts = flags.restarts;
    ASSIGN_OR_RETURN(Clustering clustering,
                     KMeans(embeddings, flags.k, globals.seed, options));
    clusterings.push_back(std::move(clustering));
  }
  ASSIGN_OR_RETURN(const GroupAssignment groups,
                   MatchGroups(clusterings, flags.min_size, flags.reference));
  report.results = GroupsToJson(groups);
  Json clustering_json = Json::object();
  for (const Clustering& clustering : clusterings) {
    std::vector<size_t> sizes(clustering.k, 0);
    for (const auto& [id, cluster] : clustering.assignment) ++sizes[cluster];
    clustering_json[clustering.model_id] = {{"inertia", clustering.inertia},
                                            {"iterations", clustering.iterations},
                                            {"cluster_sizes", sizes}};
  }
  report.results["clusterings"] = std::move(clustering_json);
  report.results["k"] = flags.k;
  return absl::OkStatus();
}

struct GroupAuditFlags {
  std::string groups, manifest, metric = "recall-kl", attribute, method = "auto";
  int k = 0;
};

absl::Status RunGroupsAudit(const GroupAuditFlags& flags, const Globals& globals,
                            BiasReport& report) {
  if (flags.metric != "recall-kl" && flags.metric != "maxskew") {
    return absl::InvalidArgumentError("--metric must be recall-kl or maxskew");
  }
  ASSIGN_OR_RETURN(const PValueMethod method, ParsePValueMethod(flags.method));
  RETURN_IF_ERROR(AddInputDigest(report, flags.groups));
  ASSIGN_OR_RETURN(const std::string groups_text, ReadFile(flags.groups));
  const Json groups_json = Json::parse(groups_text, nullptr, false);
  if (groups_json.is_discarded()) {
    return absl::InvalidArgumentError(absl::StrCat(flags.groups, ": not valid JSON"));
  }
  ASSIGN_OR_RETURN(const GroupAssignment groups, GroupsFromJson(groups_json));
  ASSIGN_OR_RETURN(const BundleManifest manifest, LoadManifest(flags.manifest));
  RETURN_IF_ERROR(AddInputDigest(report, flags.manifest));
  ASSIGN_OR_RETURN(const AttributeSchema schema,
                   LoadAttributeSchema(manifest.schema));
  RETURN_IF_ERROR(AddInputDigest(report, manifest.schema));
  RETURN_IF_ERROR(AddInputDigest(report, manifest.annotations));
  ASSIGN_OR_RETURN(const AnnotationTable annotations,
                   LoadAnnotations(manifest.annotations, schema));
  RetrievalPairs pairs;
  if (flags.metric == "recall-kl") {
    RETURN_IF_ERROR(AddInputDigest(report, manifest.pairs));
    ASSIGN_OR_RETURN(pairs, LoadPairs(manifest.pairs));
  }
  const int k = flags.k > 0 ? flags.k
                            : (flags.metric == "recall-kl" ? manifest.recall_k
                                                           : manifest.skew_k);

  std::map<std::string, RetrievalCorpus> corpora;
  std::map<std::string, EmbeddingSet> prompts;
  std::vector<std::string> models;
  std::set<std::string> all_ids;
  for (const BundleModel& model : manifest.models) {
    models.push_back(model.id);
    ASSIGN_OR_RETURN(EmbeddingSet images, LoadTracked(model.images, report));
    for (const auto& id : images.ids()) all_ids.insert(id);
    RetrievalCorpus corpus{std::move(images), {}, pairs};
    if (flags.metric == "recall-kl") {
      ASSIGN_OR_RETURN(corpus.texts, LoadTracked(model.texts, report));
      RETURN_IF_ERROR(ValidateCorpus(corpus));
    } else {
      ASSIGN_OR_RETURN(prompts[model.id], LoadTracked(model.prompts, report));
    }
    corpora[model.id] = std::move(corpus);
  }

  std::vector<ProtectedAttribute> attributes;
  if (flags.attribute.empty()) {
    attributes = schema.attributes;
  } else {
    ASSIGN_OR_RETURN(ProtectedAttribute found, schema.Find(flags.attribute));
    attributes.push_back(std::move(found));
  }

  Json per_attribute = Json::object();
  HeatmapInput heatmap;
  heatmap.title = absl::StrCat(flags.metric, " per group");
  heatmap.column_labels = models;
  for (const ProtectedAttribute& attribute : attributes) {
    ASSIGN_OR_RETURN(const DemographicPartition partition,
                     PartitionByDemographic(
                         annotations, attribute,
                         std::vector<std::string>(all_ids.begin(), all_ids.end())));
    const SubsetMetric metric =
        [&](const std::string& model_id,
            const std::set<std::string>& ids) -> absl::StatusOr<Measurement> {
      const DemographicPartition subset = partition.Restrict(ids);
      const RetrievalCorpus& corpus = corpora.at(model_id);
      if (flags.metric == "recall-kl") {
        ASSIGN_OR_RETURN(const RecallVector recall, RecallAtK(corpus, subset, k));
        return KlOfRecall(recall);
      }
      ASSIGN_OR_RETURN(const MeanSkew skew,
                       MeanMaxSkew(corpus.images, prompts.at(model_id), subset, k));
      return skew.mean;
    };
    ASSIGN_OR_RETURN(const GroupBiasTable table,
                     PerGroupBias(groups, models, all_ids, metric));
    const auto correlations = GlobalLocalCorrelation(table, method);

    Json local = Json::object();
    for (size_t g = 0; g < table.groups.size(); ++g) {
      Json row = Json::object();
      std::vector<std::optional<double>> values;
      for (size_t m = 0; m < models.size(); ++m) {
        row[models[m]] = MeasurementJson(table.local[g][m]);
        values.push_back(table.local[g][m].value);
      }
      local[table.groups[g]] = std::move(row);
      heatmap.row_labels.push_back(absl::StrCat(attribute.name, " / ", table.groups[g]));
      heatmap.row_groups.push_back(attribute.name);
      heatmap.values.push_back(std::move(values));
    }
    Json global = Json::object();
    for (size_t m = 0; m < models.size(); ++m) {
      global[models[m]] = MeasurementJson(table.global[m]);
    }
    Json correlation_json = Json::array();
    for (const GroupCorrelation& entry : correlations) {
      Json item = {{"group", entry.group}};
      if (entry.correlation) {
        item["correlation"] = CorrelationJson(*entry.correlation);
      } else {
        item["correlation"] = nullptr;
        item["reason"] = entry.reason;
      }
      correlation_json.push_back(std::move(item));
    }
    per_attribute[attribute.name] = {
        {"local", std::move(local)},
        {"global", std::move(global)},
        {"correlations", std::move(correlation_json)},
        {"grid", CorrelationGridJson(groups, correlations,
                                     absl::StrCat(flags.metric, " / ", attribute.name))}};
  }
  report.results = {{"metric", flags.metric},
                    {"k", k},
                    {"groups", groups.groups.size()},
                    {"attributes", std::move(per_attribute)}};
  return WritePlot(globals.plot, HeatmapSvg(heatmap));
}

// ---------------------------------------------------------------- transfer

struct CorrelateFlags {
  std::string pre, down, method = "auto";
  std::vector<std::string> cross;
};

absl::Status RunTransferCorrelate(const CorrelateFlags& flags,
                                  const Globals& globals, BiasReport& report) {
  RETURN_IF_ERROR(AddInputDigest(report, flags.pre));
  RETURN_IF_ERROR(AddInputDigest(report, flags.down));
  ASSIGN_OR_RETURN(const MetricTables pre, LoadMetricTables(flags.pre));
  ASSIGN_OR_RETURN(const MetricTables down, LoadMetricTables(flags.down));
  SweepOptions options;
  ASSIGN_OR_RETURN(options.method, ParsePValueMethod(flags.method));
  options.seed = globals.seed;
  for (const std::string& pair : flags.cross) {
    const size_t colon = pair.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == pair.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("--cross-attr expects PRE:DOWN, got '", pair, "'"));
    }
    options.cross_attributes.push_back({pair.substr(0, colon), pair.substr(colon + 1)});
  }
  const SweepResult sweep = CorrelationSweep(pre.values, down.values, options);
  auto entry_json = [](const SweepEntry& entry) {
    Json out = {{"label", entry.combination.Label()},
                {"pre_metric", entry.combination.pre_metric},
                {"pre_attribute", entry.combination.pre_attribute},
                {"down_metric", entry.combination.down_metric},
                {"down_attribute", entry.combination.down_attribute},
                {"models", entry.models}};
    if (entry.result) {
      out["correlation"] = CorrelationJson(*entry.result);
    } else {
      out["correlation"] = nullptr;
      out["reason"] = entry.skipped_reason;
    }
    return out;
  };
  Json results = Json::array(), skipped = Json::array();
  std::vector<double> rhos;
  for (const SweepEntry& entry : sweep.results) {
    results.push_back(entry_json(entry));
    rhos.push_back(entry.result->rho);
  }
  for (const SweepEntry& entry : sweep.skipped) skipped.push_back(entry_json(entry));
  report.results = {{"results", std::move(results)},
                    {"skipped", std::move(skipped)},
                    {"method", flags.method}};
  HistogramInput histogram = BinValues(rhos, -1.0, 1.0, 20);
  histogram.title = "Spearman rho across combinations";
  histogram.marker = 0.3;
  return WritePlot(globals.plot, HistogramSvg(histogram));
}

struct GapFlags {
  std::string pre, down, attribute, pre_metric = "recall",
                                    down_metric = "vqa-accuracy";
};

absl::Status RunTransferGaps(const GapFlags& flags, const Globals& globals,
                             BiasReport& report) {
  RETURN_IF_ERROR(AddInputDigest(report, flags.pre));
  RETURN_IF_ERROR(AddInputDigest(report, flags.down));
  ASSIGN_OR_RETURN(const MetricTables pre, LoadMetricTables(flags.pre));
  ASSIGN_OR_RETURN(const MetricTables down, LoadMetricTables(flags.down));
  auto lookup = [&](const MetricTables& tables, const std::string& metric,
                    const std::string& file)
      -> absl::StatusOr<PerDemographicValues> {
    const auto by_metric = tables.per_demographic.find(metric);
    if (by_metric == tables.per_demographic.end() ||
        !by_metric->second.count(flags.attribute)) {
      return absl::NotFoundError(absl::StrCat(
          file, " has no per-demographic '", metric, "' for ", flags.attribute));
    }
    return by_metric->second.at(flags.attribute);
  };
  ASSIGN_OR_RETURN(const auto pre_values, lookup(pre, flags.pre_metric, flags.pre));
  ASSIGN_OR_RETURN(const auto down_values,
                   lookup(down, flags.down_metric, flags.down));
  std::vector<std::string> names;
  if (pre.demographics.count(flags.attribute)) {
    names = pre.demographics.at(flags.attribute);
  } else if (down.demographics.count(flags.attribute)) {
    names = down.demographics.at(flags.attribute);
  }
  if (names.empty()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "no demographic names for ", flags.attribute, " in either table"));
  }
  ASSIGN_OR_RETURN(const ProtectedAttribute attribute,
                   MakeProtectedAttribute(flags.attribute, names));
  ASSIGN_OR_RETURN(const GapSummary summary,
                   GapQuadrants(attribute, pre_values, down_values));
  Json points = Json::array();
  for (const GapPoint& point : summary.points) {
    points.push_back({{"model", point.model},
                      {"pre_gap", point.pre_gap},
                      {"down_gap", point.down_gap},
                      {"quadrant", std::string(QuadrantName(point.quadrant))}});
  }
  report.results = {{"attribute", flags.attribute},
                    {"gap", absl::StrCat(names[0], " - ", names[1])},
                    {"points", std::move(points)},
                    {"same_sign", summary.same_sign},
                    {"opposite_sign", summary.opposite_sign},
                    {"on_axis", summary.on_axis},
                    {"skipped_models", summary.skipped_models}};
  return WritePlot(globals.plot,
                   ScatterSvg(summary, absl::StrCat("performance gap, ",
                                                    flags.attribute)));
}

// ---------------------------------------------------------------- converge

struct ConvergeFlags {
  std::vector<std::string> pre, post;
  std::string ids;
};

Json StatsJson(const ConvergenceStats& stats) {
  return Json{{"models", stats.models},
              {"matrix", stats.matrix},
              {"mean", stats.mean},
              {"stddev", stats.stddev},
              {"min", stats.min},
              {"max", stats.max},
              {"histogram",
               {{"edges", stats.histogram.edges},
                {"counts", stats.histogram.counts}}}};
}

absl::Status RunConvergeCompare(const ConvergeFlags& flags, const Globals& globals,
                                BiasReport& report) {
  std::vector<std::string> order;
  if (!flags.ids.empty()) {
    RETURN_IF_ERROR(AddInputDigest(report, flags.ids));
    ASSIGN_OR_RETURN(const std::string text, ReadFile(flags.ids));
    const Json json = Json::parse(text, nullptr, false);
    if (json.is_discarded() || !json.is_array()) {
      return absl::InvalidArgumentError(
          absl::StrCat(flags.ids, ": expected a JSON array of sample ids"));
    }
    for (const Json& id : json) {
      if (!id.is_string()) {
        return absl::InvalidArgumentError(absl::StrCat(flags.ids, ": ids must be strings"));
      }
      order.push_back(id.get<std::string>());
    }
  }
  auto profiles = [&](const std::vector<std::string>& paths, Stage stage)
      -> absl::StatusOr<std::vector<SimilarityProfile>> {
    std::vector<SimilarityProfile> out;
    for (const std::string& path : paths) {
      ASSIGN_OR_RETURN(EmbeddingSet embeddings, LoadTracked(path, report));
      if (order.empty()) {
        order = embeddings.ids();
        std::sort(order.begin(), order.end());
      }
      ASSIGN_OR_RETURN(SimilarityProfile profile,
                       MakeSimilarityProfile(embeddings, order, stage));
      out.push_back(std::move(profile));
    }
    return out;
  };
  ASSIGN_OR_RETURN(const auto pre_profiles, profiles(flags.pre, Stage::kPre));
  ASSIGN_OR_RETURN(const auto post_profiles, profiles(flags.post, Stage::kPost));
  ASSIGN_OR_RETURN(const ConvergenceStats pre, InterModelSimilarity(pre_profiles));
  ASSIGN_OR_RETURN(const ConvergenceStats post, InterModelSimilarity(post_profiles));
  if (pre.models != post.models) {
    return absl::InvalidArgumentError(
        "pre and post embeddings must cover the same models in the same order");
  }
  const ConvergenceReport summary = MakeConvergenceReport(pre, post);
  report.results = {
      {"samples", order.size()},
      {"pre", StatsJson(pre)},
      {"post", StatsJson(post)},
      {"report",
       {{"mean_pre", summary.mean_pre},
        {"stddev_pre", summary.stddev_pre},
        {"mean_post", summary.mean_post},
        {"stddev_post", summary.stddev_post},
        {"z_min_post", OptionalJson(summary.z_min_post)},
        {"stddev_ratio", OptionalJson(summary.stddev_ratio)}}}};
  HistogramInput histogram{"inter-model similarity after adaptation",
                           post.histogram.edges, post.histogram.counts,
                           summary.mean_pre};
  return WritePlot(globals.plot, HistogramSvg(histogram));
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
  std::string spec;
  bool seed_given = false;
};

absl::Status RunSynthGenerate(const SynthFlags& flags, const Globals& globals,
                              BiasReport& report) {
  if (globals.out.empty()) {
    return absl::InvalidArgumentError("synth generate needs --out DIR");
  }
  Json spec_json = Json::object();
  if (!flags.spec.empty()) {
    RETURN_IF_ERROR(AddInputDigest(report, flags.spec));
    ASSIGN_OR_RETURN(const std::string text, ReadFile(flags.spec));
    spec_json = Json::parse(text, nullptr, false);
    if (spec_json.is_discarded()) {
      return absl::InvalidArgumentError(absl::StrCat(flags.spec, ": not valid JSON"));
    }
  }
  if (flags.seed_given || !spec_json.contains("seed")) spec_json["seed"] = globals.seed;
  ASSIGN_OR_RETURN(const SynthSpec spec, SynthSpecFromJson(spec_json));
  ASSIGN_OR_RETURN(const SynthBundle bundle, GenBundle(spec));
  RETURN_IF_ERROR(WriteBundle(bundle, globals.out));
  report.results = {{"spec", SynthSpecToJson(spec)},
                    {"manifest", "manifest.json"},
                    {"models", bundle.models.size()},
                    {"samples", bundle.spaces.ids.size()},
                    {"planted", bundle.expected.at("planted")}};
  return absl::OkStatus();
}

}  // namespace
}  // namespace biasaudit

int main(int argc, char** argv) {
  using namespace biasaudit;
  CLI::App app{"biasaudit: bias audits for vision-language models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON file supplying any flag");

  Globals globals;
  CLI::Option* seed_option =
      app.add_option("--seed", globals.seed, "Seed for all randomness")
          ->capture_default_str();
  app.add_option("--out", globals.out, "Report path (stdout if omitted)");
  app.add_option("--format", globals.format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app.add_option("--plot", globals.plot, "Write an SVG plot to this path");

  std::function<absl::Status(BiasReport&)> run;
  std::string command;
  auto bind = [&](CLI::App* sub, const std::string& name, auto flags_ptr,
                  auto handler) {
    sub->callback([&, name, flags_ptr, handler] {
      command = name;
      run = [&globals, flags_ptr, handler](BiasReport& report) {
        return handler(*flags_ptr, globals, report);
      };
    });
  };

  // audit
  CLI::App* audit = app.add_subcommand("audit", "Bias metrics on one model")
                        ->require_subcommand(1);
  auto recall = std::make_shared<RecallFlags>();
  {
    CLI::App* sub = audit->add_subcommand("recall", "Recall@k disparity");
    sub->add_option("--images", recall->images)->required();
    sub->add_option("--texts", recall->texts)->required();
    sub->add_option("--pairs", recall->pairs)->required();
    sub->add_option("--annotations", recall->annotations)->required();
    sub->add_option("--schema", recall->schema, "Attribute schema (inferred if omitted)");
    sub->add_option("--attr", recall->attribute)->required();
    sub->add_option("--k", recall->k)->capture_default_str()->check(CLI::PositiveNumber);
    bind(sub, "audit recall", recall, RunAuditRecall);
  }
  auto skew = std::make_shared<SkewFlags>();
  {
    CLI::App* sub = audit->add_subcommand("maxskew", "Mean MaxSkew@k over prompts");
    sub->add_option("--images", skew->images)->required();
    sub->add_option("--prompts", skew->prompts)->required();
    sub->add_option("--annotations", skew->annotations)->required();
    sub->add_option("--schema", skew->schema, "Attribute schema (inferred if omitted)");
    sub->add_option("--attr", skew->attribute)->required();
    sub->add_option("--k", skew->k)->capture_default_str()->check(CLI::PositiveNumber);
    bind(sub, "audit maxskew", skew, RunAuditMaxSkew);
  }
  auto downstream = std::make_shared<DownstreamFlags>();
  {
    CLI::App* sub = audit->add_subcommand("downstream", "VQA / captioning bias");
    sub->add_option("--task", downstream->task)
        ->required()
        ->check(CLI::IsMember({"vqa", "caption"}));
    sub->add_option("--pred", downstream->pred)->required();
    sub->add_option("--gt", downstream->gt, "Ground truth (VQA answers or captions)");
    sub->add_option("--annotations", downstream->annotations)->required();
    sub->add_option("--schema", downstream->schema, "Attribute schema (inferred if omitted)");
    sub->add_option("--attr", downstream->attribute)->required();
    sub->add_option("--metric", downstream->metrics, "kl, dba (vqa) or lic, kl (caption)")
        ->check(CLI::IsMember({"kl", "dba", "lic"}));
    sub->add_option("--scores", downstream->scores, "Per-sample scores, e.g. CIDEr");
    sub->add_option("--score-metric", downstream->score_metric,
                    "Only use scored entries with this metric name");
    sub->add_option("--vqa-mode", downstream->vqa_mode)
        ->check(CLI::IsMember({"soft", "hard"}))
        ->capture_default_str();
    sub->add_option("--top-answers", downstream->top_answers)->capture_default_str();
    sub->add_flag("--no-mask", downstream->no_mask, "Keep demographic words for LIC");
    bind(sub, "audit downstream", downstream, RunAuditDownstream);
  }
  auto bundle = std::make_shared<BundleFlags>();
  {
    CLI::App* sub = audit->add_subcommand("bundle", "Every metric of a bundle stage");
    sub->add_option("--manifest", bundle->manifest)->required();
    sub->add_option("--stage", bundle->stage)
        ->check(CLI::IsMember({"pre", "down"}))
        ->capture_default_str();
    sub->add_option("--recall-k", bundle->recall_k, "Override the manifest setting");
    sub->add_option("--skew-k", bundle->skew_k, "Override the manifest setting");
    sub->add_option("--vqa-mode", bundle->vqa_mode)
        ->check(CLI::IsMember({"soft", "hard"}))
        ->capture_default_str();
    sub->add_option("--top-answers", bundle->top_answers)->capture_default_str();
    sub->add_flag("--no-mask", bundle->no_mask, "Keep demographic words for LIC");
    bind(sub, "audit bundle", bundle, RunAuditBundle);
  }

  // groups
  CLI::App* groups = app.add_subcommand("groups", "Cross-model local groups")
                         ->require_subcommand(1);
  auto discover = std::make_shared<DiscoverFlags>();
  {
    CLI::App* sub = groups->add_subcommand("discover", "Cluster and match groups");
    sub->add_option("--embeddings", discover->embeddings)->required()->expected(1, -1);
    sub->add_option("--k", discover->k)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--min-size", discover->min_size)->capture_default_str();
    sub->add_option("--reference", discover->reference, "Reference model id");
    sub->add_option("--restarts", discover->restarts)
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    bind(sub, "groups discover", discover, RunGroupsDiscover);
  }
  auto group_audit = std::make_shared<GroupAuditFlags>();
  {
    CLI::App* sub = groups->add_subcommand("audit", "Local vs global bias");
    sub->add_option("--groups", group_audit->groups)->required();
    sub->add_option("--manifest", group_audit->manifest)->required();
    sub->add_option("--metric", group_audit->metric)
        ->check(CLI::IsMember({"recall-kl", "maxskew"}))
        ->capture_default_str();
    sub->add_option("--attr", group_audit->attribute, "Attribute (all if omitted)");
    sub->add_option("--k", group_audit->k, "Override the manifest setting");
    sub->add_option("--method", group_audit->method)->capture_default_str();
    bind(sub, "groups audit", group_audit, RunGroupsAudit);
  }

  // transfer
  CLI::App* transfer = app.add_subcommand("transfer", "Pre vs downstream bias")
                           ->require_subcommand(1);
  auto correlate = std::make_shared<CorrelateFlags>();
  {
    CLI::App* sub = transfer->add_subcommand("correlate", "Spearman sweep");
    sub->add_option("--pre", correlate->pre)->required();
    sub->add_option("--down", correlate->down)->required();
    sub->add_option("--cross-attr", correlate->cross, "PRE:DOWN attribute pair");
    sub->add_option("--method", correlate->method, "auto|t|exact|permutation")
        ->capture_default_str();
    bind(sub, "transfer correlate", correlate, RunTransferCorrelate);
  }
  auto gaps = std::make_shared<GapFlags>();
  {
    CLI::App* sub = transfer->add_subcommand("gaps", "Performance-gap quadrants");
    sub->add_option("--pre", gaps->pre)->required();
    sub->add_option("--down", gaps->down)->required();
    sub->add_option("--attr", gaps->attribute)->required();
    sub->add_option("--pre-metric", gaps->pre_metric)->capture_default_str();
    sub->add_option("--down-metric", gaps->down_metric)->capture_default_str();
    bind(sub, "transfer gaps", gaps, RunTransferGaps);
  }

  // converge
  CLI::App* converge = app.add_subcommand("converge", "Representation convergence")
                           ->require_subcommand(1);
  auto compare = std::make_shared<ConvergeFlags>();
  {
    CLI::App* sub = converge->add_subcommand("compare", "Pre vs post similarity");
    sub->add_option("--pre", compare->pre)->required()->expected(2, -1);
    sub->add_option("--post", compare->post)->required()->expected(2, -1);
    sub->add_option("--ids", compare->ids, "JSON array fixing the sample order");
    bind(sub, "converge compare", compare, RunConvergeCompare);
  }

  // synth
  CLI::App* synth = app.add_subcommand("synth", "Synthetic bundles")
                        ->require_subcommand(1);
  auto generate = std::make_shared<SynthFlags>();
  {
    CLI::App* sub = synth->add_subcommand("generate", "Write a planted bundle to --out");
    sub->add_option("--spec", generate->spec, "JSON generator spec");
    bind(sub, "synth generate", generate, RunSynthGenerate);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  generate->seed_given = seed_option->count() > 0;

  const auto format = ParseReportFormat(globals.format);
  BiasReport report;
  report.command = command;
  EchoOptions(&app, report.params);
  for (const CLI::App* level = &app;;) {
    const auto selected = level->get_subcommands();
    if (selected.empty()) break;
    level = selected.front();
    EchoOptions(level, report.params);
  }

  const auto start = std::chrono::steady_clock::now();
  absl::Status status = run(report);
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (status.ok()) {
    // synth writes a directory; its report goes to stdout.
    const std::string destination = command == "synth generate" ? "" : globals.out;
    status = EmitReport(report, destination, *format);
  }
  if (!status.ok()) {
    std::cerr << "biasaudit " << command << ": " << status.message() << "\n";
    return 1;
  }
  return 0;
}
