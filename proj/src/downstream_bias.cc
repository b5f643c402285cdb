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

#include "biasaudit/downstream_bias.h"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <set>

#include "absl/strings/str_cat.h"

namespace biasaudit {
namespace {

bool IsDigit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

}  // namespace

std::string NormalizeAnswer(std::string_view answer) {
  std::string spaced;
  spaced.reserve(answer.size());
  for (size_t i = 0; i < answer.size(); ++i) {
    const char c = answer[i];
    const bool decimal_point = c == '.' && i > 0 && i + 1 < answer.size() &&
                               IsDigit(answer[i - 1]) && IsDigit(answer[i + 1]);
    if (std::ispunct(static_cast<unsigned char>(c)) && !decimal_point) {
      spaced.push_back(' ');
    } else {
      spaced.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  std::string out;
  bool pending_space = false;
  for (const char c : spaced) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

double VqaAccuracy(std::string_view prediction,
                   const std::vector<std::string>& ground_truth,
                   VqaAccuracyMode mode) {
  const std::string normalized = NormalizeAnswer(prediction);
  size_t matches = 0;
  for (const auto& answer : ground_truth) {
    if (NormalizeAnswer(answer) == normalized) ++matches;
  }
  if (mode == VqaAccuracyMode::kHard) return matches > 0 ? 1.0 : 0.0;
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

namespace {

ScoreTable EmptyTable(std::string metric,
                      const DemographicPartition& partition) {
  ScoreTable table;
  table.metric = std::move(metric);
  table.attribute = partition.attribute;
  table.mean.assign(partition.buckets.size(), std::nullopt);
  table.counts.assign(partition.buckets.size(), 0);
  return table;
}

void Finish(const std::vector<double>& sums, ScoreTable* table) {
  for (size_t a = 0; a < sums.size(); ++a) {
    if (table->counts[a] > 0) {
      table->mean[a] = sums[a] / static_cast<double>(table->counts[a]);
    }
  }
}

}  // namespace

ScoreTable VqaScoreTable(const PredictionSet& predictions,
                         const DemographicPartition& partition,
                         VqaAccuracyMode mode) {
  ScoreTable table = EmptyTable(
      mode == VqaAccuracyMode::kSoft ? "vqa-accuracy" : "vqa-accuracy-hard",
      partition);
  std::vector<double> sums(partition.buckets.size(), 0.0);
  for (const auto& entry : predictions.vqa) {
    const auto a = partition.DemographicOf(entry.id);
    if (!a.has_value()) continue;
    sums[*a] += VqaAccuracy(entry.pred, entry.gt, mode);
    ++table.counts[*a];
  }
  Finish(sums, &table);
  return table;
}

ScoreTable MeanScoreTable(const PredictionSet& scored,
                          const DemographicPartition& partition,
                          const std::string& metric) {
  ScoreTable table = EmptyTable(metric, partition);
  std::vector<double> sums(partition.buckets.size(), 0.0);
  for (const auto& entry : scored.scored) {
    if (!metric.empty() && entry.metric != metric) continue;
    const auto a = partition.DemographicOf(entry.id);
    if (!a.has_value()) continue;
    sums[*a] += entry.value;
    ++table.counts[*a];
  }
  Finish(sums, &table);
  return table;
}

Measurement KlDisparity(const ScoreTable& scores) {
  for (size_t a = 0; a < scores.mean.size(); ++a) {
    const std::string& label = scores.attribute.demographics[a];
    if (!scores.mean[a].has_value()) {
      return Measurement::Undefined(
          absl::StrCat("no scored samples for demographic \"", label, "\""));
    }
    if (*scores.mean[a] < 0.0) {
      return Measurement::Undefined(
          absl::StrCat("negative mean score for demographic \"", label, "\""));
    }
  }
  return KlFromUniform(scores.mean);
}

DbaInputs MakeDbaInputs(const PredictionSet& predictions,
                        const DemographicPartition& partition) {
  DbaInputs inputs;
  inputs.attribute = partition.attribute;
  for (const auto& entry : predictions.vqa) {
    const auto a = partition.DemographicOf(entry.id);
    if (!a.has_value() || entry.gt.empty()) continue;
    std::map<std::string, size_t> votes;
    for (const auto& answer : entry.gt) ++votes[NormalizeAnswer(answer)];
    // std::map iterates lexicographically, so the first maximum wins ties.
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    inputs.samples.push_back(
        {entry.qid, best->first, NormalizeAnswer(entry.pred), *a});
  }
  std::sort(inputs.samples.begin(), inputs.samples.end(),
            [](const DbaSample& x, const DbaSample& y) { return x.qid < y.qid; });
  return inputs;
}

bool IsBinaryAnswer(std::string_view answer) {
  std::string lower;
  for (const char c : answer) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      lower.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return lower == "yes" || lower == "no";
}

bool IsNumericAnswer(std::string_view answer) {
  while (!answer.empty() && std::isspace(static_cast<unsigned char>(answer.front()))) {
    answer.remove_prefix(1);
  }
  while (!answer.empty() && std::isspace(static_cast<unsigned char>(answer.back()))) {
    answer.remove_suffix(1);
  }
  if (!answer.empty() && (answer.front() == '+' || answer.front() == '-')) {
    answer.remove_prefix(1);
  }
  size_t digits = 0;
  size_t points = 0;
  for (const char c : answer) {
    if (IsDigit(c)) {
      ++digits;
    } else if (c == '.') {
      ++points;
    } else {
      return false;
    }
  }
  return digits > 0 && points <= 1;
}

DbaInputs FilterAnswers(const DbaInputs& inputs, int top_n,
                        AnswerFilterStats* stats) {
  AnswerFilterStats local;
  std::vector<const DbaSample*> candidates;
  std::map<std::string, size_t> frequency;
  for (const auto& sample : inputs.samples) {
    if (IsBinaryAnswer(sample.truth)) {
      ++local.binary;
    } else if (IsNumericAnswer(sample.truth)) {
      ++local.numeric;
    } else {
      candidates.push_back(&sample);
      ++frequency[sample.truth];
    }
  }
  std::vector<std::pair<std::string, size_t>> ranked(frequency.begin(),
                                                     frequency.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  std::set<std::string> vocabulary;
  for (size_t i = 0; i < ranked.size() && i < static_cast<size_t>(std::max(top_n, 0)); ++i) {
    vocabulary.insert(ranked[i].first);
  }

  DbaInputs out;
  out.attribute = inputs.attribute;
  for (const DbaSample* sample : candidates) {
    if (vocabulary.count(sample->truth)) {
      out.samples.push_back(*sample);
    } else {
      ++local.infrequent;
    }
  }
  local.kept = out.samples.size();
  if (stats != nullptr) *stats = local;
  return out;
}

absl::StatusOr<DbaResult> Dba(const DbaInputs& inputs) {
  std::map<std::string, size_t> answer_index;
  for (const auto& sample : inputs.samples) answer_index[sample.truth];
  if (answer_index.empty()) {
    return absl::FailedPreconditionError(
        "DBA needs a non-empty ground-truth answer vocabulary");
  }
  DbaResult result;
  for (auto& [answer, index] : answer_index) {
    index = result.vocabulary.size();
    result.vocabulary.push_back(answer);
  }
  const size_t num_demographics = inputs.attribute.size();
  const size_t num_answers = result.vocabulary.size();

  // Integer counts keep u_at exact: P(a,t) > P(a)P(t) <=> n_at * N > n_a * n_t.
  const uint64_t total = inputs.samples.size();
  std::vector<uint64_t> per_demographic(num_demographics, 0);
  std::vector<uint64_t> per_answer(num_answers, 0);
  std::vector<uint64_t> joint(num_demographics * num_answers, 0);
  std::vector<uint64_t> predicted_joint(num_demographics * num_answers, 0);
  for (const auto& sample : inputs.samples) {
    const size_t a = sample.demographic;
    const size_t t = answer_index.at(sample.truth);
    ++per_demographic[a];
    ++per_answer[t];
    ++joint[a * num_answers + t];
    const auto predicted = answer_index.find(sample.predicted);
    if (predicted != answer_index.end()) {
      ++predicted_joint[a * num_answers + predicted->second];
    }
  }

  double sum = 0.0;
  for (size_t a = 0; a < num_demographics; ++a) {
    if (per_demographic[a] == 0) {
      result.empty_demographics.push_back(inputs.attribute.demographics[a]);
    }
    for (size_t t = 0; t < num_answers; ++t) {
      DbaCell cell;
      cell.demographic = a;
      cell.answer = result.vocabulary[t];
      cell.positively_correlated =
          joint[a * num_answers + t] * total > per_demographic[a] * per_answer[t];
      if (per_demographic[a] > 0) {
        const double n_a = static_cast<double>(per_demographic[a]);
        cell.delta =
            static_cast<double>(predicted_joint[a * num_answers + t]) / n_a -
            static_cast<double>(joint[a * num_answers + t]) / n_a;
      }
      const double u = cell.positively_correlated ? 1.0 : 0.0;
      cell.term = u * cell.delta - (1.0 - u) * cell.delta;
      sum += cell.term;
      result.cells.push_back(std::move(cell));
    }
  }
  result.value = sum / static_cast<double>(num_demographics * num_answers);
  return result;
}

}  // namespace biasaudit
