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

// Bias metrics computed directly on a pre-trained embedding space:
// demographic disparity of text-retrieval recall, and MaxSkew@k of
// prompt-to-image retrieval.

#ifndef BIASAUDIT_RETRIEVAL_BIAS_H_
#define BIASAUDIT_RETRIEVAL_BIAS_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"
#include "biasaudit/io.h"
#include "biasaudit/measurement.h"

namespace biasaudit {

inline constexpr int kDefaultRecallK = 5;
inline constexpr int kDefaultSkewK = 1000;

struct RetrievalCorpus {
  EmbeddingSet images;
  EmbeddingSet texts;
  RetrievalPairs pairs;
};

// Every pair endpoint must exist and no row may have zero norm.
absl::Status ValidateCorpus(const RetrievalCorpus& corpus);

struct RecallVector {
  ProtectedAttribute attribute;
  int k = 0;
  // Per demographic; nullopt when the bucket is empty.
  std::vector<std::optional<double>> recall;
  std::vector<size_t> hits;
  std::vector<size_t> counts;
};

// Image-to-text recall@k per demographic. Texts are ranked by cosine
// similarity, ties broken by ascending text id; an image counts as a hit
// when any of its correct texts is among the top k.
absl::StatusOr<RecallVector> RecallAtK(const RetrievalCorpus& corpus,
                                       const DemographicPartition& partition,
                                       int k);

// KL divergence of the L1-normalized recalls from uniform.
Measurement KlOfRecall(const RecallVector& recalls);

struct SkewResult {
  std::string prompt;
  int k = 0;
  // Share of the top-k images in each demographic.
  std::vector<double> observed;
  // Share of the whole partitioned corpus in each demographic.
  std::vector<double> ideal;
  // max over demographics of log(observed / ideal); undefined only when
  // every demographic is missing from the top k.
  std::optional<double> max_skew;
};

// Ranks the partitioned images by cosine similarity to `prompt` (ties by
// ascending image id) and compares the top-k composition to the corpus.
absl::StatusOr<SkewResult> MaxSkewAtK(const EmbeddingSet& images,
                                      std::span<const float> prompt,
                                      const std::string& prompt_id,
                                      const DemographicPartition& partition,
                                      int k);

struct MeanSkew {
  Measurement mean;
  size_t skipped = 0;
  std::vector<SkewResult> per_prompt;
};

// Mean MaxSkew@k over every row of `prompts`, skipping undefined prompts.
absl::StatusOr<MeanSkew> MeanMaxSkew(const EmbeddingSet& images,
                                     const EmbeddingSet& prompts,
                                     const DemographicPartition& partition,
                                     int k);

}  // namespace biasaudit

#endif  // BIASAUDIT_RETRIEVAL_BIAS_H_
