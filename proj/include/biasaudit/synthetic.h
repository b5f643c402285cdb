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

// Seeded generators of synthetic audit bundles with planted, known bias.
//
// Geometry: samples belong to planted concepts (tight clusters) or to a
// diffuse background. Each model sees every sample through its own random
// rotation plus model-specific noise. The post-adaptation space of a model
// blends its pre-training configuration with a shared target configuration:
//   post = R_e((1 - lambda) * pre_config + lambda * target) + noise.
//
// Bias: recall hits, VQA correctness, answer amplification, caption leakage
// and per-sample caption scores are assigned by exact counts, so the
// expected value of every closed-form metric is known before the files are
// written and is emitted alongside them.

#ifndef BIASAUDIT_SYNTHETIC_H_
#define BIASAUDIT_SYNTHETIC_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"
#include "biasaudit/io.h"
#include "biasaudit/leakage.h"
#include "nlohmann/json.hpp"

namespace biasaudit {

struct SynthSpec {
  uint64_t seed = 0;
  size_t samples = 700;
  size_t background = 50;
  size_t dim = 32;
  size_t models = 20;
  size_t concepts = 5;
  double separation = 1.0;
  // Per-dimension std of the sample offset shared by all models.
  double noise = 0.05;
  // Per-dimension std of model-specific noise (scaled per model by a factor
  // in [0.5, 1.5]).
  double model_noise = 0.05;
  double post_noise = 0.005;
  // lambda in [0, 1].
  double convergence = 0.9;
  std::vector<double> gender_proportions = {0.5, 0.5};
  std::vector<double> skintone_proportions = {0.6, 0.4};
  // Fraction of samples without a usable gender label (half missing, half
  // mixed); skintone is missing for the same samples.
  double unlabeled = 0.05;
  // Largest planted gender recall gap; per-model gaps are distinct.
  double recall_gap = 0.3;
  // Largest per-model share of wrong VQA answers replaced by the
  // demographic's stereotypical answer.
  double amplification = 0.3;
  // Mean leak rate of generated captions; per model drawn in [0, 2x].
  double caption_leak = 0.3;
  double gt_caption_leak = 0.0;
  size_t questions_per_image = 1;
  size_t prompts = 5;
  int recall_k = 5;
  int skew_k = 100;
  // Ties the scored-caption gender gap to the realized recall disparity so
  // that recall-kl/gender and cider-kl/gender rank models identically.
  bool planted_monotone = true;
};

absl::Status ValidateSynthSpec(const SynthSpec& spec);
// Missing keys keep their defaults; unknown keys are errors.
absl::StatusOr<SynthSpec> SynthSpecFromJson(const nlohmann::json& json);
nlohmann::json SynthSpecToJson(const SynthSpec& spec);

AttributeSchema SynthSchema();

struct SynthSpaces {
  std::vector<std::string> ids;
  // Planted concept per sample, -1 for background.
  std::vector<int> concept_of;
  std::vector<EmbeddingSet> pre;
  std::vector<EmbeddingSet> post;
};

absl::StatusOr<SynthSpaces> GenSpaces(const SynthSpec& spec);

struct SynthModelData {
  std::string model_id;
  EmbeddingSet texts;
  EmbeddingSet prompts;
  PredictionSet vqa;
  PredictionSet captions;
  PredictionSet scores;
};

struct SynthBundle {
  SynthSpec spec;
  SynthSpaces spaces;
  AttributeSchema schema;
  AnnotationTable annotations;
  RetrievalPairs pairs;
  std::vector<SynthModelData> models;
  nlohmann::json expected;
};

absl::StatusOr<SynthBundle> GenBundle(const SynthSpec& spec);

// Writes the bundle (manifest.json, expected.json, spec.json, schema,
// annotations, pairs, per-model embedding and prediction files) into `dir`,
// creating it if needed.
absl::Status WriteBundle(const SynthBundle& bundle, const std::string& dir);

// Captions for one two-demographic attribute: neutral filler words, with a
// demographic marker word inserted at the given rates.
struct CaptionPair {
  std::vector<LabeledCaption> ground_truth;
  std::vector<LabeledCaption> generated;
};
CaptionPair GenLeakCaptions(uint64_t seed, size_t per_demographic,
                            double gt_leak, double pred_leak);

}  // namespace biasaudit

#endif  // BIASAUDIT_SYNTHETIC_H_
