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

// Whole-bundle audits: every model listed in a manifest, every attribute of
// the schema, every metric of one stage.

#ifndef BIASAUDIT_BUNDLE_H_
#define BIASAUDIT_BUNDLE_H_

#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"
#include "biasaudit/downstream_bias.h"
#include "biasaudit/io.h"
#include "biasaudit/leakage.h"
#include "biasaudit/report.h"

namespace biasaudit {

// Paths are resolved relative to the manifest's directory; empty entries
// mean the model lacks that input.
struct BundleModel {
  std::string id;
  std::string images;
  std::string texts;
  std::string prompts;
  std::string post;
  std::string vqa;
  std::string captions;
  std::string scores;
};

struct BundleManifest {
  std::string path;
  std::string schema;
  std::string annotations;
  std::string pairs;
  std::vector<BundleModel> models;
  int recall_k = 5;
  int skew_k = 1000;
};

absl::StatusOr<BundleManifest> LoadManifest(const std::string& path);

enum class BundleStage { kPre, kDown };

absl::StatusOr<BundleStage> ParseBundleStage(std::string_view name);

struct BundleAuditOptions {
  // Non-positive values take the manifest settings.
  int recall_k = 0;
  int skew_k = 0;
  VqaAccuracyMode vqa_mode = VqaAccuracyMode::kSoft;
  int top_answers = kDefaultTopAnswers;
  LeakageOptions leakage = DefaultLeakageOptions();
  uint64_t seed = 0;
  // Metric name of the scored-caption entries.
  std::string score_metric = "cider";
};

struct BundleAudit {
  MetricTables tables;
  // Every file read, for digests.
  std::vector<std::string> inputs;
};

// Pre stage: recall-kl, maxskew (and per-demographic recall).
// Down stage: vqa-kl, dba, <score>-kl, lic (and per-demographic vqa-accuracy
// and scores). Metric failures become undefined cells with a reason.
absl::StatusOr<BundleAudit> AuditBundle(const BundleManifest& manifest,
                                        BundleStage stage,
                                        const BundleAuditOptions& options);

}  // namespace biasaudit

#endif  // BIASAUDIT_BUNDLE_H_
