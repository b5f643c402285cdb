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


#include "biasaudit/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "biasaudit/random.h"
#include "biasaudit/status_macros.h"

namespace biasaudit {
namespace {

using Json = nlohmann::json;

constexpr int kMissing = -1;
constexpr int kMixed = -2;

const std::vector<std::string>& NeutralWords() {
  static const auto* words = new std::vector<std::string>{
      "photo",  "of",     "a",      "person",  "standing", "near",
      "the",    "table",  "street", "holding", "cup",      "in",
      "park",   "with",   "bag",    "looking", "at",       "camera",
      "sitting", "on",    "bench",  "walking", "dog",      "outside",
      "building", "wearing", "hat", "smiling", "next",     "to",
      "car",    "window", "book",   "reading", "garden",   "tree",
      "bicycle", "road",  "food",   "plate"};
  return *words;
}

const std::vector<std::string>& Colors() {
  static const auto* colors = new std::vector<std::string>{
      "red",  "blue",   "green", "yellow", "orange",
      "purple", "pink", "brown", "gray",   "silver"};
  return *colors;
}

// Marker words per (attribute, demographic); none is a masked word.
const std::string& Marker(size_t attribute, size_t demographic) {
  static const auto* markers = new std::vector<std::vector<std::string>>{
      {"floral", "tweed"}, {"sunlit", "shaded"}};
  return (*markers)[attribute][demographic];
}

std::string PaddedId(std::string_view prefix, size_t index, size_t count) {
  int width = 1;
  for (size_t c = count > 0 ? count - 1 : 0; c >= 10; c /= 10) ++width;
  return absl::StrFormat("%s%0*d", std::string(prefix), width,
                         static_cast<int>(index));
}

std::vector<double> Gaussian(SplitMix64& rng, size_t n, double scale) {
  std::vector<double> out(n);
  for (double& v : out) v = scale * rng.Normal();
  return out;
}

// Random orthogonal matrix (row-major) by modified Gram-Schmidt.
std::vector<double> RandomRotation(SplitMix64& rng, size_t dim) {
  std::vector<double> q(dim * dim);
  for (size_t row = 0; row < dim; ++row) {
    double* r = q.data() + row * dim;
    double norm = 0.0;
    do {
      for (size_t j = 0; j < dim; ++j) r[j] = rng.Normal();
      for (size_t prev = 0; prev < row; ++prev) {
        const double* p = q.data() + prev * dim;
        double dot = 0.0;
        for (size_t j = 0; j < dim; ++j) dot += r[j] * p[j];
        for (size_t j = 0; j < dim; ++j) r[j] -= dot * p[j];
      }
      norm = 0.0;
      for (size_t j = 0; j < dim; ++j) norm += r[j] * r[j];
      norm = std::sqrt(norm);
    } while (norm < 1e-6);
    for (size_t j = 0; j < dim; ++j) r[j] /= norm;
  }
  return q;
}

void AppendRotated(const std::vector<double>& rotation,
                   const std::vector<double>& x, std::vector<float>& out) {
  const size_t dim = x.size();
  for (size_t row = 0; row < dim; ++row) {
    double acc = 0.0;
    for (size_t j = 0; j < dim; ++j) acc += rotation[row * dim + j] * x[j];
    out.push_back(static_cast<float>(acc));
  }
}

// Splits `total` into integer counts proportional to `weights` (largest
// remainder, ties to the lower index).
std::vector<size_t> Apportion(size_t total, const std::vector<double>& weights) {
  std::vector<size_t> counts(weights.size());
  std::vector<std::pair<double, size_t>> remainders;
  size_t used = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    counts[i] = static_cast<size_t>(std::floor(exact));
    used += counts[i];
    remainders.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t i = 0; used < total; ++i, ++used) {
    ++counts[remainders[i % remainders.size()].second];
  }
  return counts;
}

size_t RoundCount(double fraction, size_t n) {
  const double clamped = std::clamp(fraction, 0.0, 1.0);
  return std::min(n, static_cast<size_t>(std::llround(clamped * n)));
}

// KL(p || uniform) of normalized scores; null when undefined.
Json KlJson(const std::vector<double>& scores) {
  double total = 0.0;
  for (double s : scores) total += s;
  if (!(total > 0.0)) return nullptr;
  const double n = static_cast<double>(scores.size());
  double kl = 0.0;
  for (double s : scores) {
    if (s > 0.0) kl += (s / total) * std::log((s / total) * n);
  }
  return std::max(kl, 0.0);
}

Json MeansJson(const std::vector<double>& sums,
               const std::vector<size_t>& counts,
               std::vector<double>* means) {
  Json out = Json::array();
  means->clear();
  bool complete = true;
  for (size_t d = 0; d < sums.size(); ++d) {
    if (counts[d] == 0) {
      out.push_back(nullptr);
      complete = false;
    } else {
      means->push_back(sums[d] / static_cast<double>(counts[d]));
      out.push_back(means->back());
    }
  }
  if (!complete) means->clear();
  return out;
}

std::string Caption(SplitMix64& rng, const std::vector<std::string>& markers) {
  std::vector<std::string> words;
  const size_t length = 6 + rng.Below(3);
  for (size_t i = 0; i < length; ++i) {
    words.push_back(NeutralWords()[rng.Below(NeutralWords().size())]);
  }
  for (const auto& marker : markers) {
    words.insert(words.begin() + rng.Below(words.size() + 1), marker);
  }
  std::string out;
  for (const auto& word : words) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

// Per-sample labels: gender/skintone index, kMissing or kMixed.
struct SampleLabels {
  std::vector<int> gender;
  std::vector<int> skintone;
};

SampleLabels DrawLabels(const SynthSpec& spec, SplitMix64& rng) {
  const size_t n = spec.samples;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.Shuffle(order);
  const size_t unlabeled = RoundCount(spec.unlabeled, n);
  SampleLabels labels;
  labels.gender.assign(n, kMissing);
  labels.skintone.assign(n, kMissing);
  for (size_t i = 0; i < unlabeled; ++i) {
    labels.gender[order[i]] = i % 2 == 0 ? kMissing : kMixed;
  }
  const size_t labeled = n - unlabeled;
  auto fill = [&](const std::vector<double>& proportions,
                  std::vector<int>& out) {
    std::vector<int> pool;
    const auto counts = Apportion(labeled, proportions);
    for (size_t d = 0; d < counts.size(); ++d) {
      pool.insert(pool.end(), counts[d], static_cast<int>(d));
    }
    rng.Shuffle(pool);
    for (size_t i = 0; i < labeled; ++i) out[order[unlabeled + i]] = pool[i];
  };
  fill(spec.gender_proportions, labels.gender);
  fill(spec.skintone_proportions, labels.skintone);
  return labels;
}

absl::Status CheckProportions(const std::vector<double>& proportions,
                              std::string_view name) {
  if (proportions.size() != 2) {
    return absl::InvalidArgumentError(
        absl::StrCat(std::string(name), " needs exactly 2 proportions"));
  }
  double total = 0.0;
  for (double p : proportions) {
    if (!(p > 0.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat(std::string(name), " proportions must be positive"));
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    return absl::InvalidArgumentError(
        absl::StrCat(std::string(name), " proportions must sum to 1, got ",
                     total));
  }
  return absl::OkStatus();
}

// Expected DBA, computed directly from per-question (demographic, truth,
// prediction) triples with colour truths.
double ExpectedDba(const std::vector<std::pair<int, std::pair<std::string,
                                                              std::string>>>&
                       samples,
                   size_t num_demographics) {
  std::map<std::string, size_t> index;
  for (const auto& [a, tp] : samples) index[tp.first];
  size_t next = 0;
  for (auto& [answer, i] : index) i = next++;
  const size_t m = index.size();
  std::vector<double> n_a(num_demographics), n_t(m),
      joint(num_demographics * m), pred(num_demographics * m);
  for (const auto& [a, tp] : samples) {
    const size_t t = index[tp.first];
    n_a[a] += 1;
    n_t[t] += 1;
    joint[a * m + t] += 1;
    auto p = index.find(tp.second);
    if (p != index.end()) pred[a * m + p->second] += 1;
  }
  const double total = static_cast<double>(samples.size());
  double sum = 0.0;
  for (size_t a = 0; a < num_demographics; ++a) {
    for (size_t t = 0; t < m; ++t) {
      if (n_a[a] == 0) continue;
      const bool u = joint[a * m + t] / total > (n_a[a] / total) * (n_t[t] / total);
      const double delta = (pred[a * m + t] - joint[a * m + t]) / n_a[a];
      sum += u ? delta : -delta;
    }
  }
  return sum / static_cast<double>(num_demographics * m);
}

}  // namespace

absl::Status ValidateSynthSpec(const SynthSpec& spec) {
  if (spec.samples < 3) {
    return absl::InvalidArgumentError("samples must be at least 3");
  }
  if (spec.background >= spec.samples) {
    return absl::InvalidArgumentError("background must be below samples");
  }
  if (spec.concepts < 1 || spec.samples - spec.background < spec.concepts) {
    return absl::InvalidArgumentError(
        "need at least one member per planted concept");
  }
  if (spec.dim < 2) return absl::InvalidArgumentError("dim must be >= 2");
  if (spec.models < 1) return absl::InvalidArgumentError("models must be >= 1");
  if (!(spec.separation > 0.0)) {
    return absl::InvalidArgumentError("separation must be positive");
  }
  if (spec.noise < 0.0 || spec.model_noise < 0.0 || spec.post_noise < 0.0) {
    return absl::InvalidArgumentError("noise levels must be non-negative");
  }
  if (!(spec.convergence >= 0.0 && spec.convergence <= 1.0)) {
    return absl::InvalidArgumentError("convergence must lie in [0, 1]");
  }
  RETURN_IF_ERROR(CheckProportions(spec.gender_proportions, "gender"));
  RETURN_IF_ERROR(CheckProportions(spec.skintone_proportions, "skintone"));
  for (double rate : {spec.unlabeled, spec.recall_gap, spec.amplification,
                      spec.caption_leak, spec.gt_caption_leak}) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
      return absl::InvalidArgumentError(
          "rates (unlabeled, recall_gap, amplification, caption leaks) must "
          "lie in [0, 1]");
    }
  }
  if (spec.questions_per_image < 1) {
    return absl::InvalidArgumentError("questions_per_image must be >= 1");
  }
  if (spec.prompts < 1) return absl::InvalidArgumentError("prompts must be >= 1");
  if (spec.recall_k < 1 || static_cast<size_t>(spec.recall_k) >= spec.samples) {
    return absl::InvalidArgumentError("recall_k must lie in [1, samples)");
  }
  if (spec.skew_k < 1) return absl::InvalidArgumentError("skew_k must be >= 1");
  return absl::OkStatus();
}

absl::StatusOr<SynthSpec> SynthSpecFromJson(const Json& json) {
  if (!json.is_object()) {
    return absl::InvalidArgumentError("synth spec must be a JSON object");
  }
  SynthSpec spec;
  try {
    for (const auto& [key, value] : json.items()) {
      if (key == "seed") spec.seed = value.get<uint64_t>();
      else if (key == "samples") spec.samples = value.get<size_t>();
      else if (key == "background") spec.background = value.get<size_t>();
      else if (key == "dim") spec.dim = value.get<size_t>();
      else if (key == "models") spec.models = value.get<size_t>();
      else if (key == "concepts") spec.concepts = value.get<size_t>();
      else if (key == "separation") spec.separation = value.get<double>();
      else if (key == "noise") spec.noise = value.get<double>();
      else if (key == "model_noise") spec.model_noise = value.get<double>();
      else if (key == "post_noise") spec.post_noise = value.get<double>();
      else if (key == "convergence") spec.convergence = value.get<double>();
      else if (key == "gender_proportions")
        spec.gender_proportions = value.get<std::vector<double>>();
      else if (key == "skintone_proportions")
        spec.skintone_proportions = value.get<std::vector<double>>();
      else if (key == "unlabeled") spec.unlabeled = value.get<double>();
      else if (key == "recall_gap") spec.recall_gap = value.get<double>();
      else if (key == "amplification") spec.amplification = value.get<double>();
      else if (key == "caption_leak") spec.caption_leak = value.get<double>();
      else if (key == "gt_caption_leak")
        spec.gt_caption_leak = value.get<double>();
      else if (key == "questions_per_image")
        spec.questions_per_image = value.get<size_t>();
      else if (key == "prompts") spec.prompts = value.get<size_t>();
      else if (key == "recall_k") spec.recall_k = value.get<int>();
      else if (key == "skew_k") spec.skew_k = value.get<int>();
      else if (key == "planted_monotone")
        spec.planted_monotone = value.get<bool>();
      else
        return absl::InvalidArgumentError(
            absl::StrCat("unknown synth spec key '", key, "'"));
    }
  } catch (const Json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad synth spec value: ", e.what()));
  }
  RETURN_IF_ERROR(ValidateSynthSpec(spec));
  return spec;
}

Json SynthSpecToJson(const SynthSpec& spec) {
  return Json{{"seed", spec.seed},
              {"samples", spec.samples},
              {"background", spec.background},
              {"dim", spec.dim},
              {"models", spec.models},
              {"concepts", spec.concepts},
              {"separation", spec.separation},
              {"noise", spec.noise},
              {"model_noise", spec.model_noise},
              {"post_noise", spec.post_noise},
              {"convergence", spec.convergence},
              {"gender_proportions", spec.gender_proportions},
              {"skintone_proportions", spec.skintone_proportions},
              {"unlabeled", spec.unlabeled},
              {"recall_gap", spec.recall_gap},
              {"amplification", spec.amplification},
              {"caption_leak", spec.caption_leak},
              {"gt_caption_leak", spec.gt_caption_leak},
              {"questions_per_image", spec.questions_per_image},
              {"prompts", spec.prompts},
              {"recall_k", spec.recall_k},
              {"skew_k", spec.skew_k},
              {"planted_monotone", spec.planted_monotone}};
}

AttributeSchema SynthSchema() {
  AttributeSchema schema;
  schema.attributes.push_back({"gender", {"female", "male"}});
  schema.attributes.push_back({"skintone", {"lighter", "darker"}});
  return schema;
}

absl::StatusOr<SynthSpaces> GenSpaces(const SynthSpec& spec) {
  RETURN_IF_ERROR(ValidateSynthSpec(spec));
  SplitMix64 root(spec.seed);
  SplitMix64 rng = root.Split(1);
  const size_t n = spec.samples;
  const size_t dim = spec.dim;

  SynthSpaces spaces;
  for (size_t i = 0; i < n; ++i) spaces.ids.push_back(PaddedId("s", i, n));

  // Concept sizes differ by at most one; the background is -1.
  spaces.concept_of.assign(n, -1);
  const size_t members = n - spec.background;
  std::vector<int> pool;
  for (size_t i = 0; i < members; ++i) {
    pool.push_back(static_cast<int>(i % spec.concepts));
  }
  pool.resize(n, -1);
  rng.Shuffle(pool);
  spaces.concept_of = pool;

  std::vector<std::vector<double>> centers;
  for (size_t c = 0; c < spec.concepts; ++c) {
    auto center = Gaussian(rng, dim, 1.0);
    double norm = 0.0;
    for (double v : center) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : center) v *= spec.separation / norm;
    centers.push_back(std::move(center));
  }
  const double diffuse = spec.separation / std::sqrt(static_cast<double>(dim));
  std::vector<std::vector<double>> base(n), target(n);
  for (size_t i = 0; i < n; ++i) {
    if (spaces.concept_of[i] < 0) {
      base[i] = Gaussian(rng, dim, diffuse);
    } else {
      base[i] = Gaussian(rng, dim, spec.noise);
      const auto& center = centers[spaces.concept_of[i]];
      for (size_t j = 0; j < dim; ++j) base[i][j] += center[j];
    }
    target[i] = Gaussian(rng, dim, spec.noise);
    for (size_t j = 0; j < dim; ++j) target[i][j] += base[i][j];
  }

  const double lambda = spec.convergence;
  for (size_t e = 0; e < spec.models; ++e) {
    SplitMix64 model_rng = root.Split(1000 + e);
    const auto rotation = RandomRotation(model_rng, dim);
    const double scale = spec.model_noise * (0.5 + model_rng.Uniform());
    std::vector<float> pre_values, post_values;
    pre_values.reserve(n * dim);
    post_values.reserve(n * dim);
    for (size_t i = 0; i < n; ++i) {
      auto config = Gaussian(model_rng, dim, scale);
      for (size_t j = 0; j < dim; ++j) config[j] += base[i][j];
      AppendRotated(rotation, config, pre_values);
      std::vector<double> blend(dim);
      for (size_t j = 0; j < dim; ++j) {
        blend[j] = (1.0 - lambda) * config[j] + lambda * target[i][j];
      }
      const size_t start = post_values.size();
      AppendRotated(rotation, blend, post_values);
      for (size_t j = 0; j < dim; ++j) {
        post_values[start + j] +=
            static_cast<float>(spec.post_noise * model_rng.Normal());
      }
    }
    const std::string model_id = PaddedId("m", e, spec.models);
    ASSIGN_OR_RETURN(auto pre, EmbeddingSet::Create(model_id, spaces.ids, dim,
                                                    std::move(pre_values)));
    ASSIGN_OR_RETURN(auto post, EmbeddingSet::Create(model_id, spaces.ids, dim,
                                                     std::move(post_values)));
    spaces.pre.push_back(std::move(pre));
    spaces.post.push_back(std::move(post));
  }
  return spaces;
}

CaptionPair GenLeakCaptions(uint64_t seed, size_t per_demographic,
                            double gt_leak, double pred_leak) {
  SplitMix64 rng(seed);
  CaptionPair out;
  const size_t total = 2 * per_demographic;
  for (size_t i = 0; i < total; ++i) {
    const size_t demographic = i % 2;
    const std::string id = PaddedId("c", i, total);
    std::vector<std::string> gt_markers, pred_markers;
    if (rng.Uniform() < gt_leak) gt_markers.push_back(Marker(0, demographic));
    if (rng.Uniform() < pred_leak) pred_markers.push_back(Marker(0, demographic));
    out.ground_truth.push_back({id, Caption(rng, gt_markers), demographic});
    out.generated.push_back({id, Caption(rng, pred_markers), demographic});
  }
  return out;
}

absl::StatusOr<SynthBundle> GenBundle(const SynthSpec& spec) {
  ASSIGN_OR_RETURN(SynthSpaces spaces, GenSpaces(spec));
  SplitMix64 root(spec.seed);
  SplitMix64 label_rng = root.Split(2);
  SplitMix64 task_rng = root.Split(3);
  const size_t n = spec.samples;
  const size_t num_models = spec.models;
  const auto& ids = spaces.ids;

  SynthBundle bundle{spec, {}, SynthSchema(), AnnotationTable(SynthSchema()),
                     {}, {}, Json::object()};
  const SampleLabels labels = DrawLabels(spec, label_rng);
  const std::vector<const std::vector<int>*> label_of = {&labels.gender,
                                                         &labels.skintone};
  for (size_t i = 0; i < n; ++i) {
    bundle.annotations.Touch(ids[i]);
    for (size_t a = 0; a < 2; ++a) {
      const auto& attribute = bundle.schema.attributes[a];
      const int label = (*label_of[a])[i];
      if (label >= 0) {
        RETURN_IF_ERROR(bundle.annotations.Add(
            ids[i], attribute.name, {attribute.demographics[label]}));
      } else if (label == kMixed) {
        RETURN_IF_ERROR(bundle.annotations.Add(ids[i], attribute.name,
                                               attribute.demographics));
      }
    }
  }
  std::vector<std::string> text_ids;
  for (size_t i = 0; i < n; ++i) {
    text_ids.push_back("t" + ids[i]);
    bundle.pairs[ids[i]] = {text_ids.back()};
  }

  // Shared VQA ground truth: colours lean towards one half of the palette
  // per gender; some binary and numeric questions exercise the filters.
  struct Question {
    size_t sample;
    std::string qid, question, truth;
  };
  std::vector<Question> questions;
  const size_t num_questions = n * spec.questions_per_image;
  for (size_t i = 0; i < n; ++i) {
    for (size_t q = 0; q < spec.questions_per_image; ++q) {
      Question question;
      question.sample = i;
      question.qid = PaddedId("q", questions.size(), num_questions);
      const double kind = task_rng.Uniform();
      if (kind < 0.15) {
        question.question = "is the person outdoors?";
        question.truth = task_rng.Below(2) == 0 ? "yes" : "no";
      } else if (kind < 0.25) {
        question.question = "how many people are there?";
        question.truth = task_rng.Below(2) == 0 ? "2" : "3";
      } else {
        question.question = "what color is the shirt?";
        const int g = labels.gender[i];
        std::vector<double> weights(Colors().size(), 1.0);
        for (size_t c = 0; c < weights.size(); ++c) {
          if (g >= 0 && (c < weights.size() / 2) == (g == 0)) weights[c] = 2.0;
        }
        double u = task_rng.Uniform() *
                   std::accumulate(weights.begin(), weights.end(), 0.0);
        size_t c = 0;
        while (c + 1 < weights.size() && u >= weights[c]) u -= weights[c++];
        question.truth = Colors()[c];
      }
      questions.push_back(std::move(question));
    }
  }
  // Most frequent colour truth per gender (ties to the smaller string).
  std::vector<std::string> stereotype(2);
  for (int g = 0; g < 2; ++g) {
    std::map<std::string, size_t> freq;
    for (const auto& q : questions) {
      if (labels.gender[q.sample] == g &&
          std::find(Colors().begin(), Colors().end(), q.truth) != Colors().end()) {
        ++freq[q.truth];
      }
    }
    size_t best = 0;
    for (const auto& [answer, count] : freq) {
      if (count > best) {
        best = count;
        stereotype[g] = answer;
      }
    }
  }

  std::vector<std::vector<std::string>> gt_captions(n);
  {
    SplitMix64 caption_rng = root.Split(4);
    for (size_t i = 0; i < n; ++i) {
      std::vector<std::string> markers;
      for (size_t a = 0; a < 2; ++a) {
        const int label = (*label_of[a])[i];
        if (label >= 0 && caption_rng.Uniform() < spec.gt_caption_leak) {
          markers.push_back(Marker(a, label));
        }
      }
      gt_captions[i] = {Caption(caption_rng, markers)};
    }
  }

  // Planted per-model gender recall gaps are distinct multiples of
  // recall_gap / models.
  std::vector<size_t> gap_rank(num_models);
  std::iota(gap_rank.begin(), gap_rank.end(), 0);
  task_rng.Shuffle(gap_rank);

  Json expected_models = Json::object();
  std::vector<double> recall_kl_gender(num_models, 0.0);
  std::vector<bool> recall_kl_defined(num_models, false);
  std::vector<SplitMix64> model_rngs;
  for (size_t e = 0; e < num_models; ++e) model_rngs.push_back(root.Split(5000 + e));

  for (size_t e = 0; e < num_models; ++e) {
    SplitMix64& rng = model_rngs[e];
    const EmbeddingSet& images = spaces.pre[e];
    SynthModelData model;
    model.model_id = images.model_id();
    Json expected;

    // Recall: a hit's text is the image embedding itself (cosine 1, rank 0),
    // a miss's text is its negation (ranked last).
    const double g_gender = spec.recall_gap * static_cast<double>(gap_rank[e] + 1) /
                            static_cast<double>(num_models);
    const double g_skin = spec.recall_gap * (2.0 * rng.Uniform() - 1.0);
    std::map<std::pair<int, int>, std::vector<size_t>> cells;
    for (size_t i = 0; i < n; ++i) {
      cells[{labels.gender[i], labels.skintone[i]}].push_back(i);
    }
    std::vector<bool> hit(n, false);
    for (auto& [key, members] : cells) {
      double p = 0.5;
      if (key.first >= 0 && key.second >= 0) {
        const double sg = key.first == 0 ? 1.0 : -1.0;
        const double ss = key.second == 0 ? 1.0 : -1.0;
        p = std::clamp(0.5 + sg * g_gender / 2.0 + ss * g_skin / 2.0, 0.02, 0.98);
      }
      rng.Shuffle(members);
      const size_t hits = RoundCount(p, members.size());
      for (size_t k = 0; k < hits; ++k) hit[members[k]] = true;
    }
    std::vector<float> text_values;
    text_values.reserve(n * spec.dim);
    for (size_t i = 0; i < n; ++i) {
      const auto row = images.Row(i);
      for (float v : row) text_values.push_back(hit[i] ? v : -v);
    }
    ASSIGN_OR_RETURN(model.texts,
                     EmbeddingSet::Create(model.model_id, text_ids, spec.dim,
                                          std::move(text_values)));
    std::vector<std::string> prompt_ids;
    std::vector<float> prompt_values;
    for (size_t p = 0; p < spec.prompts; ++p) {
      prompt_ids.push_back(PaddedId("p", p, spec.prompts));
      for (size_t j = 0; j < spec.dim; ++j) {
        prompt_values.push_back(static_cast<float>(rng.Normal()));
      }
    }
    ASSIGN_OR_RETURN(model.prompts,
                     EmbeddingSet::Create(model.model_id, prompt_ids, spec.dim,
                                          std::move(prompt_values)));

    for (size_t a = 0; a < 2; ++a) {
      const auto& attribute = bundle.schema.attributes[a];
      std::vector<double> hits(2, 0.0);
      std::vector<size_t> counts(2, 0);
      for (size_t i = 0; i < n; ++i) {
        const int label = (*label_of[a])[i];
        if (label < 0) continue;
        ++counts[label];
        if (hit[i]) hits[label] += 1.0;
      }
      std::vector<double> recalls;
      expected["recall"][attribute.name] = MeansJson(hits, counts, &recalls);
      expected["recall-kl"][attribute.name] =
          recalls.empty() ? Json(nullptr) : KlJson(recalls);
      if (a == 0 && !recalls.empty()) {
        recall_kl_gender[e] = expected["recall-kl"]["gender"].get<double>();
        recall_kl_defined[e] = true;
      }
    }
    expected["planted_recall_gap"] = {{"gender", g_gender}, {"skintone", g_skin}};

    // VQA: exact wrong counts per gender group; wrong colour answers take the
    // group's stereotype with probability gamma, otherwise a cyclic shift of
    // the group's own wrong truths (which leaves its answer mix unchanged).
    const double gamma = spec.amplification * rng.Uniform();
    std::map<int, std::vector<size_t>> groups;
    for (size_t q = 0; q < questions.size(); ++q) {
      groups[labels.gender[questions[q].sample]].push_back(q);
    }
    std::vector<std::string> predicted(questions.size());
    for (size_t q = 0; q < questions.size(); ++q) predicted[q] = questions[q].truth;
    Json planted_accuracy = Json::object();
    for (auto& [g, members] : groups) {
      const double accuracy = 0.55 + 0.3 * rng.Uniform();
      if (g >= 0) planted_accuracy[bundle.schema.attributes[0].demographics[g]] = accuracy;
      rng.Shuffle(members);
      const size_t wrong = RoundCount(1.0 - accuracy, members.size());
      std::map<int, std::vector<size_t>> shift;  // 0 colour, 1 binary, 2 numeric
      for (size_t k = 0; k < wrong; ++k) {
        const size_t q = members[k];
        const std::string& truth = questions[q].truth;
        const int kind = truth == "yes" || truth == "no" ? 1
                         : truth == "2" || truth == "3" ? 2 : 0;
        if (kind == 0 && g >= 0 && rng.Uniform() < gamma) {
          predicted[q] = stereotype[g];
        } else {
          shift[kind].push_back(q);
        }
      }
      for (auto& [kind, list] : shift) {
        for (size_t k = 0; k < list.size(); ++k) {
          predicted[list[k]] = questions[list[(k + 1) % list.size()]].truth;
        }
      }
    }
    model.vqa.task = TaskKind::kVqa;
    for (size_t q = 0; q < questions.size(); ++q) {
      const auto& question = questions[q];
      model.vqa.vqa.push_back({ids[question.sample], question.qid,
                               question.question, predicted[q],
                               {question.truth, question.truth, question.truth}});
    }
    for (size_t a = 0; a < 2; ++a) {
      const auto& attribute = bundle.schema.attributes[a];
      std::vector<double> correct(2, 0.0);
      std::vector<size_t> counts(2, 0);
      std::vector<std::pair<int, std::pair<std::string, std::string>>> dba;
      for (size_t q = 0; q < questions.size(); ++q) {
        const int label = (*label_of[a])[questions[q].sample];
        if (label < 0) continue;
        ++counts[label];
        if (predicted[q] == questions[q].truth) correct[label] += 1.0;
        if (std::find(Colors().begin(), Colors().end(), questions[q].truth) !=
            Colors().end()) {
          dba.push_back({label, {questions[q].truth, predicted[q]}});
        }
      }
      std::vector<double> accuracies;
      expected["vqa-accuracy"][attribute.name] =
          MeansJson(correct, counts, &accuracies);
      expected["vqa-kl"][attribute.name] =
          accuracies.empty() ? Json(nullptr) : KlJson(accuracies);
      expected["dba"][attribute.name] =
          dba.empty() ? Json(nullptr) : Json(ExpectedDba(dba, 2));
    }
    expected["amplification"] = gamma;
    expected["planted_vqa_accuracy"] = planted_accuracy;

    // Captions: generated captions leak markers at a per-model rate.
    const double leak = std::min(1.0, 2.0 * spec.caption_leak * rng.Uniform());
    model.captions.task = TaskKind::kCaptioning;
    for (size_t i = 0; i < n; ++i) {
      model.captions.captions.push_back(
          {ids[i], gt_captions[i][0], CaptionOrigin::kGroundTruth});
      std::vector<std::string> markers;
      for (size_t a = 0; a < 2; ++a) {
        const int label = (*label_of[a])[i];
        if (label >= 0 && rng.Uniform() < leak) markers.push_back(Marker(a, label));
      }
      model.captions.captions.push_back(
          {ids[i], Caption(rng, markers), CaptionOrigin::kGenerated});
    }
    const double sign = leak - spec.gt_caption_leak;
    expected["leak_rate"] = leak;
    expected["lic_sign"] = sign > 0 ? 1 : (sign < 0 ? -1 : 0);

    expected_models[model.model_id] = std::move(expected);
    bundle.models.push_back(std::move(model));
  }

  // Scored captions: the female mean score grows with the model's rank in
  // realized gender recall disparity (when planted), otherwise at random.
  std::vector<size_t> order(num_models);
  std::iota(order.begin(), order.end(), 0);
  if (spec.planted_monotone) {
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
      return recall_kl_gender[x] < recall_kl_gender[y];
    });
  } else {
    task_rng.Shuffle(order);
  }
  std::vector<size_t> rank_of(num_models);
  for (size_t r = 0; r < num_models; ++r) rank_of[order[r]] = r;
  for (size_t e = 0; e < num_models; ++e) {
    SplitMix64& rng = model_rngs[e];
    SynthModelData& model = bundle.models[e];
    Json& expected = expected_models[model.model_id];
    const double female_mean =
        0.6 * (1.0 + 0.05 * static_cast<double>(rank_of[e] + 1));
    std::map<int, std::vector<size_t>> groups;
    for (size_t i = 0; i < n; ++i) groups[labels.gender[i]].push_back(i);
    std::vector<double> score(n);
    for (const auto& [g, members] : groups) {
      const double mean = g == 0 ? female_mean : 0.6;
      std::vector<double> jitter;
      double jitter_mean = 0.0;
      for (size_t k = 0; k < members.size(); ++k) {
        jitter.push_back(std::clamp(0.08 * rng.Normal(), -0.3, 0.3));
        jitter_mean += jitter.back();
      }
      jitter_mean /= static_cast<double>(members.size());
      for (size_t k = 0; k < members.size(); ++k) {
        score[members[k]] = mean + jitter[k] - jitter_mean;
      }
    }
    model.scores.task = TaskKind::kScored;
    for (size_t i = 0; i < n; ++i) {
      model.scores.scored.push_back({ids[i], "cider", score[i]});
    }
    for (size_t a = 0; a < 2; ++a) {
      const auto& attribute = bundle.schema.attributes[a];
      std::vector<double> sums(2, 0.0);
      std::vector<size_t> counts(2, 0);
      for (size_t i = 0; i < n; ++i) {
        const int label = (*label_of[a])[i];
        if (label < 0) continue;
        ++counts[label];
        sums[label] += score[i];
      }
      std::vector<double> means;
      expected["cider"][attribute.name] = MeansJson(sums, counts, &means);
      expected["cider-kl"][attribute.name] =
          means.empty() ? Json(nullptr) : KlJson(means);
    }
  }

  Json concepts = Json::array();
  for (size_t c = 0; c < spec.concepts; ++c) {
    Json members = Json::array();
    for (size_t i = 0; i < n; ++i) {
      if (spaces.concept_of[i] == static_cast<int>(c)) members.push_back(ids[i]);
    }
    concepts.push_back(std::move(members));
  }
  bundle.expected = Json{
      {"models", std::move(expected_models)},
      {"concepts", std::move(concepts)},
      {"planted",
       {{"pre_metric", "recall-kl"},
        {"down_metric", "cider-kl"},
        {"attribute", "gender"},
        {"monotone", spec.planted_monotone}}},
      {"convergence",
       {{"lambda", spec.convergence},
        {"expect_shift", spec.convergence >= 0.5}}},
      {"tolerances", {{"closed_form", 1e-12}, {"float32_profile", 1e-6}}}};
  bundle.spaces = std::move(spaces);
  return bundle;
}

absl::Status WriteBundle(const SynthBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code error;
  for (const char* sub : {"", "pre", "post", "down"}) {
    fs::create_directories(fs::path(dir) / sub, error);
    if (error) {
      return absl::InternalError(absl::StrCat("cannot create ", dir, "/", sub,
                                              ": ", error.message()));
    }
  }
  auto path = [&](const std::string& name) {
    return (fs::path(dir) / name).string();
  };
  Json models = Json::array();
  for (size_t e = 0; e < bundle.models.size(); ++e) {
    const SynthModelData& model = bundle.models[e];
    const std::string& id = model.model_id;
    const Json entry = {{"id", id},
                        {"images", "pre/" + id + ".images.emb"},
                        {"texts", "pre/" + id + ".texts.emb"},
                        {"prompts", "pre/" + id + ".prompts.emb"},
                        {"post", "post/" + id + ".emb"},
                        {"vqa", "down/" + id + ".vqa.jsonl"},
                        {"captions", "down/" + id + ".captions.jsonl"},
                        {"scores", "down/" + id + ".cider.jsonl"}};
    RETURN_IF_ERROR(WriteEmbeddings(bundle.spaces.pre[e],
                                    path(entry["images"].get<std::string>())));
    RETURN_IF_ERROR(
        WriteEmbeddings(model.texts, path(entry["texts"].get<std::string>())));
    RETURN_IF_ERROR(WriteEmbeddings(model.prompts,
                                    path(entry["prompts"].get<std::string>())));
    RETURN_IF_ERROR(WriteEmbeddings(bundle.spaces.post[e],
                                    path(entry["post"].get<std::string>())));
    RETURN_IF_ERROR(WriteFile(path(entry["vqa"].get<std::string>()),
                              SerializePredictions(model.vqa)));
    RETURN_IF_ERROR(WriteFile(path(entry["captions"].get<std::string>()),
                              SerializePredictions(model.captions)));
    RETURN_IF_ERROR(WriteFile(path(entry["scores"].get<std::string>()),
                              SerializePredictions(model.scores)));
    models.push_back(entry);
  }
  const Json manifest = {
      {"version", 1},
      {"schema", "schema.json"},
      {"annotations", "annotations.jsonl"},
      {"pairs", "pairs.jsonl"},
      {"expected", "expected.json"},
      {"models", std::move(models)},
      {"settings",
       {{"recall_k", bundle.spec.recall_k}, {"skew_k", bundle.spec.skew_k}}}};
  RETURN_IF_ERROR(WriteFile(path("manifest.json"), manifest.dump(2) + "\n"));
  RETURN_IF_ERROR(
      WriteFile(path("schema.json"), SerializeAttributeSchema(bundle.schema)));
  RETURN_IF_ERROR(WriteFile(path("annotations.jsonl"),
                            SerializeAnnotations(bundle.annotations)));
  RETURN_IF_ERROR(WriteFile(path("pairs.jsonl"), SerializePairs(bundle.pairs)));
  RETURN_IF_ERROR(
      WriteFile(path("expected.json"), bundle.expected.dump(2) + "\n"));
  RETURN_IF_ERROR(WriteFile(path("spec.json"),
                            SynthSpecToJson(bundle.spec).dump(2) + "\n"));
  return absl::OkStatus();
}

}  // namespace biasaudit
