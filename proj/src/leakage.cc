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

#include "biasaudit/leakage.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "absl/strings/str_cat.h"
#include "biasaudit/random.h"
#include "biasaudit/status_macros.h"

namespace biasaudit {
namespace {

constexpr std::string_view kMaskToken = "[mask]";

uint64_t Fnv1a(std::string_view text) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void Softmax(std::vector<double>& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - top);
    sum += z;
  }
  for (double& z : logits) z /= sum;
}

std::vector<std::pair<uint32_t, double>> HashedFeatures(
    std::string_view caption, const LeakageOptions& options,
    const std::set<std::string, std::less<>>& mask) {
  std::vector<std::string> tokens = Tokenize(caption);
  if (options.mask) {
    for (auto& token : tokens) {
      if (mask.count(token)) token = std::string(kMaskToken);
    }
  }
  const uint32_t width_mask = (1u << options.hash_bits) - 1u;
  std::map<uint32_t, double> counts;
  for (size_t i = 0; i < tokens.size(); ++i) {
    counts[static_cast<uint32_t>(Fnv1a(tokens[i])) & width_mask] += 1.0;
    if (i + 1 < tokens.size()) {
      const std::string bigram = absl::StrCat(tokens[i], " ", tokens[i + 1]);
      counts[static_cast<uint32_t>(Fnv1a(bigram)) & width_mask] += 1.0;
    }
  }
  double norm = 0.0;
  for (const auto& [index, count] : counts) norm += count * count;
  norm = std::sqrt(norm);
  std::vector<std::pair<uint32_t, double>> features(counts.begin(),
                                                    counts.end());
  if (norm > 0.0) {
    for (auto& [index, value] : features) value /= norm;
  }
  return features;
}

std::set<std::string, std::less<>> MaskSet(const LeakageOptions& options) {
  return {options.mask_words.begin(), options.mask_words.end()};
}

}  // namespace

std::vector<std::string> DefaultMaskWords() {
  return {"man",      "men",     "male",     "boy",      "boys",
          "gentleman", "gentlemen", "guy",   "guys",     "he",
          "him",      "his",     "himself",  "father",   "dad",
          "son",      "brother", "husband",  "king",     "woman",
          "women",    "female",  "girl",     "girls",    "lady",
          "ladies",   "she",     "her",      "hers",     "herself",
          "mother",   "mom",     "daughter", "sister",   "wife",
          "queen",    "white",   "black",    "asian",    "caucasian",
          "african",  "latino",  "latina",   "hispanic", "dark",
          "darker",   "light",   "lighter",  "skinned"};
}

LeakageOptions DefaultLeakageOptions() {
  LeakageOptions options;
  options.mask_words = DefaultMaskWords();
  return options;
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::pair<uint32_t, double>> LeakageClassifier::Features(
    std::string_view caption) const {
  return HashedFeatures(caption, options_, MaskSet(options_));
}

std::vector<double> LeakageClassifier::Probabilities(
    std::string_view caption) const {
  std::vector<double> logits = bias_;
  const size_t columns = column_of_.size();
  for (const auto& [index, value] : Features(caption)) {
    const auto column = column_of_.find(index);
    if (column == column_of_.end()) continue;
    for (size_t c = 0; c < num_classes_; ++c) {
      logits[c] += weights_[c * columns + column->second] * value;
    }
  }
  Softmax(logits);
  return logits;
}

size_t LeakageClassifier::Predict(std::string_view caption) const {
  const std::vector<double> probabilities = Probabilities(caption);
  return static_cast<size_t>(
      std::max_element(probabilities.begin(), probabilities.end()) -
      probabilities.begin());
}

absl::StatusOr<LeakageClassifier> TrainLeakageClassifier(
    std::span<const LabeledCaption> captions, size_t num_classes,
    uint64_t seed, const LeakageOptions& options) {
  if (num_classes < 2) {
    return absl::InvalidArgumentError("Leakage needs >= 2 demographics");
  }
  if (options.hash_bits < 1 || options.hash_bits > 30) {
    return absl::InvalidArgumentError("hash_bits must lie in [1, 30]");
  }
  std::vector<size_t> per_class(num_classes, 0);
  for (const auto& caption : captions) {
    if (caption.demographic >= num_classes) {
      return absl::InvalidArgumentError(
          absl::StrCat("Caption \"", caption.id, "\" has demographic #",
                       caption.demographic, " out of range"));
    }
    ++per_class[caption.demographic];
  }
  for (size_t c = 0; c < num_classes; ++c) {
    if (per_class[c] == 0) {
      return absl::FailedPreconditionError(
          absl::StrCat("No captions for demographic #", c));
    }
  }

  LeakageClassifier model;
  model.num_classes_ = num_classes;
  model.seed_ = seed;
  model.options_ = options;

  // Sorting the inputs makes training independent of caption order.
  std::vector<const LabeledCaption*> ordered;
  for (const auto& caption : captions) ordered.push_back(&caption);
  std::sort(ordered.begin(), ordered.end(),
            [](const LabeledCaption* x, const LabeledCaption* y) {
              if (x->id != y->id) return x->id < y->id;
              if (x->caption != y->caption) return x->caption < y->caption;
              return x->demographic < y->demographic;
            });

  const auto mask = MaskSet(options);
  std::vector<std::vector<std::pair<uint32_t, double>>> rows;
  std::set<uint32_t> active;
  for (const LabeledCaption* caption : ordered) {
    rows.push_back(HashedFeatures(caption->caption, options, mask));
    for (const auto& [index, value] : rows.back()) active.insert(index);
  }
  for (const uint32_t index : active) {
    model.column_of_.emplace(index, model.column_of_.size());
  }
  const size_t columns = model.column_of_.size();
  model.weights_.assign(num_classes * columns, 0.0);
  model.bias_.assign(num_classes, 0.0);

  // Column indices per row, resolved once.
  std::vector<std::vector<std::pair<size_t, double>>> sparse(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [index, value] : rows[i]) {
      sparse[i].emplace_back(model.column_of_.at(index), value);
    }
  }

  const double n = static_cast<double>(ordered.size());
  std::vector<double> grad_w(model.weights_.size());
  std::vector<double> grad_b(num_classes);
  std::vector<double> logits(num_classes);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (size_t i = 0; i < sparse.size(); ++i) {
      logits = model.bias_;
      for (const auto& [column, value] : sparse[i]) {
        for (size_t c = 0; c < num_classes; ++c) {
          logits[c] += model.weights_[c * columns + column] * value;
        }
      }
      Softmax(logits);
      logits[ordered[i]->demographic] -= 1.0;
      for (size_t c = 0; c < num_classes; ++c) {
        grad_b[c] += logits[c];
        for (const auto& [column, value] : sparse[i]) {
          grad_w[c * columns + column] += logits[c] * value;
        }
      }
    }
    for (size_t j = 0; j < model.weights_.size(); ++j) {
      model.weights_[j] -= options.learning_rate *
                           (grad_w[j] / n + options.l2 * model.weights_[j]);
    }
    for (size_t c = 0; c < num_classes; ++c) {
      model.bias_[c] -= options.learning_rate * grad_b[c] / n;
    }
  }
  return model;
}

absl::StatusOr<double> LeakageScore(std::span<const LabeledCaption> captions,
                                    size_t num_classes, uint64_t seed,
                                    const LeakageOptions& options,
                                    double* accuracy) {
  if (captions.empty()) {
    return absl::FailedPreconditionError("No captions to score");
  }
  if (options.folds < 1) {
    return absl::InvalidArgumentError("folds must be >= 1");
  }
  std::vector<LabeledCaption> ordered(captions.begin(), captions.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const LabeledCaption& x, const LabeledCaption& y) {
              if (x.id != y.id) return x.id < y.id;
              if (x.caption != y.caption) return x.caption < y.caption;
              return x.demographic < y.demographic;
            });

  // Stratified fold assignment: shuffle each demographic, then deal.
  std::vector<int> fold(ordered.size(), 0);
  if (options.folds > 1) {
    SplitMix64 rng(seed);
    std::vector<std::vector<size_t>> by_class(num_classes);
    for (size_t i = 0; i < ordered.size(); ++i) {
      if (ordered[i].demographic < num_classes) {
        by_class[ordered[i].demographic].push_back(i);
      }
    }
    size_t dealt = 0;
    for (auto& members : by_class) {
      rng.Shuffle(members);
      for (const size_t i : members) {
        fold[i] = static_cast<int>(dealt++ % options.folds);
      }
    }
  }

  double score = 0.0;
  size_t correct = 0;
  for (int f = 0; f < options.folds; ++f) {
    std::vector<LabeledCaption> train;
    std::vector<const LabeledCaption*> held_out;
    for (size_t i = 0; i < ordered.size(); ++i) {
      if (options.folds == 1 || fold[i] != f) train.push_back(ordered[i]);
      if (options.folds == 1 || fold[i] == f) held_out.push_back(&ordered[i]);
    }
    if (held_out.empty()) continue;
    ASSIGN_OR_RETURN(const auto classifier,
                     TrainLeakageClassifier(train, num_classes, seed, options));
    for (const LabeledCaption* caption : held_out) {
      const std::vector<double> p = classifier.Probabilities(caption->caption);
      const size_t predicted = static_cast<size_t>(
          std::max_element(p.begin(), p.end()) - p.begin());
      if (predicted == caption->demographic) {
        score += p[predicted];
        ++correct;
      }
    }
  }
  const double n = static_cast<double>(ordered.size());
  if (accuracy != nullptr) *accuracy = static_cast<double>(correct) / n;
  return score / n;
}

absl::StatusOr<LicResult> Lic(std::span<const LabeledCaption> gt_captions,
                              std::span<const LabeledCaption> pred_captions,
                              size_t num_classes, uint64_t seed,
                              const LeakageOptions& options) {
  LicResult result;
  ASSIGN_OR_RETURN(result.lic_gt,
                   LeakageScore(gt_captions, num_classes, seed, options,
                                &result.accuracy_gt));
  ASSIGN_OR_RETURN(result.lic_pred,
                   LeakageScore(pred_captions, num_classes, seed, options,
                                &result.accuracy_pred));
  result.lic = result.lic_pred - result.lic_gt;
  return result;
}

std::vector<LabeledCaption> LabelCaptions(const PredictionSet& predictions,
                                          const DemographicPartition& partition,
                                          CaptionOrigin origin) {
  std::vector<LabeledCaption> out;
  for (const auto& entry : predictions.captions) {
    if (entry.origin != origin) continue;
    const auto a = partition.DemographicOf(entry.id);
    if (!a.has_value()) continue;
    out.push_back({entry.id, entry.caption, *a});
  }
  std::sort(out.begin(), out.end(),
            [](const LabeledCaption& x, const LabeledCaption& y) {
              if (x.id != y.id) return x.id < y.id;
              return x.caption < y.caption;
            });
  return out;
}

}  // namespace biasaudit
