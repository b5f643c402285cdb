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

// Downstream bias metrics over task predictions: demographic disparity of
// per-sample task scores, and directional bias amplification (attribute to
// answer) for visual question answering.

#ifndef BIASAUDIT_DOWNSTREAM_BIAS_H_
#define BIASAUDIT_DOWNSTREAM_BIAS_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"
#include "biasaudit/measurement.h"

namespace biasaudit {

inline constexpr int kDefaultTopAnswers = 50;

// Mean task score per demographic.
struct ScoreTable {
  std::string metric;
  ProtectedAttribute attribute;
  std::vector<std::optional<double>> mean;
  std::vector<size_t> counts;
};

enum class VqaAccuracyMode {
  // min(#matching ground-truth answers / 3, 1).
  kSoft,
  // 1 if any ground-truth answer matches.
  kHard,
};

// Lowercases, replaces punctuation by spaces and collapses whitespace.
std::string NormalizeAnswer(std::string_view answer);

double VqaAccuracy(std::string_view prediction,
                   const std::vector<std::string>& ground_truth,
                   VqaAccuracyMode mode);

// Per-demographic mean VQA accuracy over the partitioned samples.
ScoreTable VqaScoreTable(const PredictionSet& predictions,
                         const DemographicPartition& partition,
                         VqaAccuracyMode mode);

// Per-demographic mean of precomputed per-sample scores (e.g. CIDEr). An
// empty `metric` accepts every entry.
ScoreTable MeanScoreTable(const PredictionSet& scored,
                          const DemographicPartition& partition,
                          const std::string& metric);

// KL divergence of the L1-normalized per-demographic scores from uniform.
Measurement KlDisparity(const ScoreTable& scores);

// One question with its ground-truth answer, predicted answer and the
// demographic of its image.
struct DbaSample {
  std::string qid;
  std::string truth;
  std::string predicted;
  size_t demographic = 0;
};

struct DbaInputs {
  ProtectedAttribute attribute;
  // Sorted by qid.
  std::vector<DbaSample> samples;
};

// Builds DBA samples from VQA predictions. The ground-truth answer of a
// question is its most frequent normalized annotator answer, ties broken
// lexicographically.
DbaInputs MakeDbaInputs(const PredictionSet& predictions,
                        const DemographicPartition& partition);

bool IsBinaryAnswer(std::string_view answer);
bool IsNumericAnswer(std::string_view answer);

struct AnswerFilterStats {
  size_t binary = 0;
  size_t numeric = 0;
  size_t infrequent = 0;
  size_t kept = 0;
};

// Drops questions whose ground-truth answer is yes/no, numeric, or not among
// the `top_n` most frequent remaining ground-truth answers (frequency ties
// broken lexicographically).
DbaInputs FilterAnswers(const DbaInputs& inputs, int top_n = kDefaultTopAnswers,
                        AnswerFilterStats* stats = nullptr);

struct DbaCell {
  size_t demographic = 0;
  std::string answer;
  bool positively_correlated = false;  // u_at
  double delta = 0.0;                  // P_pred(t|a) - P_truth(t|a)
  double term = 0.0;                   // u*delta - (1-u)*delta
};

struct DbaResult {
  double value = 0.0;
  std::vector<std::string> vocabulary;
  std::vector<DbaCell> cells;
  // Demographics without samples; their conditionals are taken as 0.
  std::vector<std::string> empty_demographics;
};

// Directional bias amplification A->T over every (demographic, answer) cell,
// answers drawn from the ground-truth vocabulary. Fails on an empty
// vocabulary.
absl::StatusOr<DbaResult> Dba(const DbaInputs& inputs);

}  // namespace biasaudit

#endif  // BIASAUDIT_DOWNSTREAM_BIAS_H_
