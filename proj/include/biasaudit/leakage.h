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

// Caption leakage (LIC): how well a classifier trained on captions predicts
// the demographic of the depicted person, for generated captions relative
// to ground-truth captions.
//
// The classifier is multinomial logistic regression over hashed unigram and
// bigram counts, trained by full-batch gradient descent. It is deterministic
// given the data, the seed and the options.

#ifndef BIASAUDIT_LEAKAGE_H_
#define BIASAUDIT_LEAKAGE_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "absl/status/statusor.h"
#include "biasaudit/data_model.h"

namespace biasaudit {

struct LeakageOptions {
  int hash_bits = 18;
  int epochs = 60;
  double learning_rate = 1.0;
  double l2 = 1e-3;
  // Captions are scored by classifiers that did not see them during
  // training, using this many seeded folds. 1 trains and scores on the
  // same captions.
  int folds = 5;
  bool mask = true;
  std::vector<std::string> mask_words;
};

// Demographic-revealing words replaced by a mask token when masking is on.
std::vector<std::string> DefaultMaskWords();

LeakageOptions DefaultLeakageOptions();

// Lowercase alphanumeric runs.
std::vector<std::string> Tokenize(std::string_view text);

struct LabeledCaption {
  std::string id;
  std::string caption;
  size_t demographic = 0;
};

class LeakageClassifier {
 public:
  // Softmax over demographics; sums to 1.
  std::vector<double> Probabilities(std::string_view caption) const;
  // Arg-max of Probabilities, ties to the lowest demographic index.
  size_t Predict(std::string_view caption) const;

  size_t num_classes() const { return num_classes_; }
  uint64_t seed() const { return seed_; }
  const LeakageOptions& options() const { return options_; }

 private:
  friend absl::StatusOr<LeakageClassifier> TrainLeakageClassifier(
      std::span<const LabeledCaption>, size_t, uint64_t,
      const LeakageOptions&);

  std::vector<std::pair<uint32_t, double>> Features(
      std::string_view caption) const;

  size_t num_classes_ = 0;
  uint64_t seed_ = 0;
  LeakageOptions options_;
  std::unordered_map<uint32_t, size_t> column_of_;
  // num_classes_ x column_of_.size(), row-major.
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// Fails when some demographic in [0, num_classes) has no caption.
absl::StatusOr<LeakageClassifier> TrainLeakageClassifier(
    std::span<const LabeledCaption> captions, size_t num_classes,
    uint64_t seed, const LeakageOptions& options);

struct LicResult {
  double lic_gt = 0.0;
  double lic_pred = 0.0;
  // lic_pred - lic_gt.
  double lic = 0.0;
  double accuracy_gt = 0.0;
  double accuracy_pred = 0.0;
};

// Mean of s_a(y) * [f(y) == a] over captions, where f is trained on the
// same caption set (scored out of fold).
absl::StatusOr<double> LeakageScore(std::span<const LabeledCaption> captions,
                                    size_t num_classes, uint64_t seed,
                                    const LeakageOptions& options,
                                    double* accuracy = nullptr);

absl::StatusOr<LicResult> Lic(std::span<const LabeledCaption> gt_captions,
                              std::span<const LabeledCaption> pred_captions,
                              size_t num_classes, uint64_t seed,
                              const LeakageOptions& options);

// Captions of one origin whose sample falls in the partition, sorted by id
// then caption text.
std::vector<LabeledCaption> LabelCaptions(const PredictionSet& predictions,
                                          const DemographicPartition& partition,
                                          CaptionOrigin origin);

}  // namespace biasaudit

#endif  // BIASAUDIT_LEAKAGE_H_
