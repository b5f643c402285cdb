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

#include "biasaudit/retrieval_bias.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "biasaudit/status_macros.h"
#include "biasaudit/vector_math.h"

namespace biasaudit {
namespace {

absl::Status CheckNonZeroRows(const EmbeddingSet& set, const char* what) {
  for (size_t row = 0; row < set.size(); ++row) {
    if (Norm(set.Row(row)) == 0.0) {
      return absl::InvalidArgumentError(absl::StrCat(
          what, " row \"", set.ids()[row], "\" has zero magnitude"));
    }
  }
  return absl::OkStatus();
}

std::vector<double> RowNorms(const EmbeddingSet& set) {
  std::vector<double> norms(set.size());
  for (size_t row = 0; row < set.size(); ++row) norms[row] = Norm(set.Row(row));
  return norms;
}

}  // namespace

absl::Status ValidateCorpus(const RetrievalCorpus& corpus) {
  if (corpus.images.dim() != corpus.texts.dim()) {
    return absl::InvalidArgumentError(
        absl::StrCat("Image dim ", corpus.images.dim(), " != text dim ",
                     corpus.texts.dim()));
  }
  for (const auto& [image, texts] : corpus.pairs) {
    if (!corpus.images.RowOf(image).has_value()) {
      return absl::InvalidArgumentError(
          absl::StrCat("Pair references unknown image \"", image, "\""));
    }
    if (texts.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("Image \"", image, "\" has no correct text"));
    }
    for (const auto& text : texts) {
      if (!corpus.texts.RowOf(text).has_value()) {
        return absl::InvalidArgumentError(
            absl::StrCat("Pair references unknown text \"", text, "\""));
      }
    }
  }
  RETURN_IF_ERROR(CheckNonZeroRows(corpus.images, "Image"));
  return CheckNonZeroRows(corpus.texts, "Text");
}

absl::StatusOr<RecallVector> RecallAtK(const RetrievalCorpus& corpus,
                                       const DemographicPartition& partition,
                                       int k) {
  if (k < 1 || static_cast<size_t>(k) > corpus.texts.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "k=", k, " must lie in [1, ", corpus.texts.size(), "]"));
  }
  RETURN_IF_ERROR(ValidateCorpus(corpus));
  const std::vector<double> text_norms = RowNorms(corpus.texts);
  const auto& text_ids = corpus.texts.ids();

  RecallVector out;
  out.attribute = partition.attribute;
  out.k = k;
  out.recall.assign(partition.buckets.size(), std::nullopt);
  out.hits.assign(partition.buckets.size(), 0);
  out.counts.assign(partition.buckets.size(), 0);

  std::vector<double> similarity(corpus.texts.size());
  for (size_t a = 0; a < partition.buckets.size(); ++a) {
    for (const auto& image_id : partition.buckets[a]) {
      const auto row = corpus.images.RowOf(image_id);
      if (!row.has_value()) {
        return absl::InvalidArgumentError(
            absl::StrCat("Partitioned image \"", image_id,
                         "\" has no embedding"));
      }
      const auto pair = corpus.pairs.find(image_id);
      if (pair == corpus.pairs.end()) {
        return absl::InvalidArgumentError(
            absl::StrCat("Image \"", image_id, "\" has no correct text"));
      }
      const auto image = corpus.images.Row(*row);
      const double image_norm = Norm(image);
      for (size_t t = 0; t < similarity.size(); ++t) {
        similarity[t] =
            Dot(image, corpus.texts.Row(t)) / (image_norm * text_norms[t]);
      }
      // Position of the best-placed correct text in the full ranking.
      size_t best_rank = std::numeric_limits<size_t>::max();
      for (const auto& text_id : pair->second) {
        const size_t c = *corpus.texts.RowOf(text_id);
        size_t rank = 0;
        for (size_t t = 0; t < similarity.size(); ++t) {
          if (similarity[t] > similarity[c] ||
              (similarity[t] == similarity[c] && text_ids[t] < text_ids[c])) {
            ++rank;
          }
        }
        best_rank = std::min(best_rank, rank);
      }
      ++out.counts[a];
      if (best_rank < static_cast<size_t>(k)) ++out.hits[a];
    }
    if (out.counts[a] > 0) {
      out.recall[a] = static_cast<double>(out.hits[a]) /
                      static_cast<double>(out.counts[a]);
    }
  }
  return out;
}

Measurement KlOfRecall(const RecallVector& recalls) {
  for (size_t a = 0; a < recalls.recall.size(); ++a) {
    if (!recalls.recall[a].has_value()) {
      return Measurement::Undefined(
          absl::StrCat("no images for demographic \"",
                       recalls.attribute.demographics[a], "\""));
    }
  }
  return KlFromUniform(recalls.recall);
}

absl::StatusOr<SkewResult> MaxSkewAtK(const EmbeddingSet& images,
                                      std::span<const float> prompt,
                                      const std::string& prompt_id,
                                      const DemographicPartition& partition,
                                      int k) {
  if (prompt.size() != images.dim()) {
    return absl::InvalidArgumentError(
        absl::StrCat("Prompt dim ", prompt.size(), " != image dim ",
                     images.dim()));
  }
  const double prompt_norm = Norm(prompt);
  if (prompt_norm == 0.0) {
    return absl::InvalidArgumentError(
        absl::StrCat("Prompt \"", prompt_id, "\" has zero magnitude"));
  }
  const size_t total = partition.assigned();
  if (k < 1 || static_cast<size_t>(k) > total) {
    return absl::InvalidArgumentError(absl::StrCat(
        "k=", k, " must lie in [1, ", total, "] (annotated images)"));
  }
  for (size_t a = 0; a < partition.buckets.size(); ++a) {
    if (partition.buckets[a].empty()) {
      return absl::FailedPreconditionError(
          absl::StrCat("Demographic \"", partition.attribute.demographics[a],
                       "\" is absent from the corpus"));
    }
  }

  struct Ranked {
    double similarity;
    const std::string* id;
    size_t demographic;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(total);
  for (size_t a = 0; a < partition.buckets.size(); ++a) {
    for (const auto& id : partition.buckets[a]) {
      const auto row = images.RowOf(id);
      if (!row.has_value()) {
        return absl::InvalidArgumentError(
            absl::StrCat("Partitioned image \"", id, "\" has no embedding"));
      }
      const auto image = images.Row(*row);
      const double norm = Norm(image);
      if (norm == 0.0) {
        return absl::InvalidArgumentError(
            absl::StrCat("Image \"", id, "\" has zero magnitude"));
      }
      ranked.push_back({Dot(image, prompt) / (norm * prompt_norm), &id, a});
    }
  }
  const auto before = [](const Ranked& x, const Ranked& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return *x.id < *y.id;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + k, ranked.end(), before);

  const size_t demographics = partition.buckets.size();
  std::vector<size_t> top_counts(demographics, 0);
  for (int i = 0; i < k; ++i) ++top_counts[ranked[i].demographic];

  SkewResult out;
  out.prompt = prompt_id;
  out.k = k;
  out.observed.resize(demographics);
  out.ideal.resize(demographics);
  for (size_t a = 0; a < demographics; ++a) {
    out.observed[a] =
        static_cast<double>(top_counts[a]) / static_cast<double>(k);
    out.ideal[a] = static_cast<double>(partition.buckets[a].size()) /
                   static_cast<double>(total);
    if (top_counts[a] == 0) continue;
    const double skew = std::log(out.observed[a] / out.ideal[a]);
    if (!out.max_skew.has_value() || skew > *out.max_skew) out.max_skew = skew;
  }
  return out;
}

absl::StatusOr<MeanSkew> MeanMaxSkew(const EmbeddingSet& images,
                                     const EmbeddingSet& prompts,
                                     const DemographicPartition& partition,
                                     int k) {
  if (prompts.size() == 0) {
    return absl::InvalidArgumentError("At least one prompt is required");
  }
  MeanSkew out;
  double sum = 0.0;
  size_t used = 0;
  for (size_t p = 0; p < prompts.size(); ++p) {
    ASSIGN_OR_RETURN(auto skew, MaxSkewAtK(images, prompts.Row(p),
                                           prompts.ids()[p], partition, k));
    if (skew.max_skew.has_value()) {
      sum += *skew.max_skew;
      ++used;
    } else {
      ++out.skipped;
    }
    out.per_prompt.push_back(std::move(skew));
  }
  out.mean = used == 0 ? Measurement::Undefined("every prompt is undefined")
                       : Measurement::Of(sum / static_cast<double>(used));
  return out;
}

}  // namespace biasaudit
