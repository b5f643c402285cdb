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


// Acceptance suite: one PASS/FAIL line per primary criterion. Exits non-zero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "biasaudit/convergence.h"
#include "biasaudit/downstream_bias.h"
#include "biasaudit/leakage.h"
#include "biasaudit/local_bias.h"
#include "biasaudit/measurement.h"
#include "biasaudit/random.h"
#include "biasaudit/retrieval_bias.h"
#include "biasaudit/synthetic.h"
#include "biasaudit/transfer_stats.h"
#include "cli_util.h"
#include "nlohmann/json.hpp"
#include "oracles.h"
#include "test_util.h"

namespace biasaudit {
namespace {

using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  // Wall-clock budget in seconds; 0 means none.
  double budget = 0.0;
  std::function<Outcome()> run;
};

std::vector<std::optional<double>> AsOptional(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

Outcome KlMetrics() {
  SplitMix64 rng(1001);
  const ProtectedAttribute attr{"a", {"0", "1", "2", "3", "4", "5", "6", "7"}};
  double worst = 0.0;
  size_t failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 2 + rng.Below(7);
    std::vector<double> r(n);
    for (double& v : r) v = 0.01 + rng.Uniform();
    const bool uniform = trial % 10 == 0;
    if (uniform) std::fill(r.begin(), r.end(), r[0]);

    const double expected = *oracle::KlUniform(r);
    const Measurement recall_kl = KlFromUniform(AsOptional(r));
    ProtectedAttribute sub{"a", {attr.demographics.begin(), attr.demographics.begin() + n}};
    const Measurement disparity = KlDisparity({"s", sub, AsOptional(r), std::vector<size_t>(n, 1)});
    if (!recall_kl.defined() || !disparity.defined()) {
      ++failures;
      continue;
    }
    worst = std::max({worst, std::abs(*recall_kl.value - expected),
                      std::abs(*disparity.value - expected)});
    if ((*recall_kl.value == 0.0) != uniform) ++failures;

    std::vector<double> permuted = r;
    rng.Shuffle(permuted);
    std::vector<double> scaled = r;
    const double factor = std::ldexp(1.0, static_cast<int>(rng.Below(20)) - 10);
    for (double& v : scaled) v *= factor;
    if (*KlFromUniform(AsOptional(permuted)).value != *recall_kl.value) ++failures;
    if (*KlFromUniform(AsOptional(scaled)).value != *recall_kl.value) ++failures;
  }
  return {failures == 0 && worst <= 1e-12,
          absl::StrFormat("max |err| %.2e, invariance failures %d", worst, failures)};
}

Outcome MaxSkew() {
  SplitMix64 rng(2002);
  double worst = 0.0;
  size_t failures = 0;
  for (int corpus = 0; corpus < 200; ++corpus) {
    const size_t d = 10 + rng.Below(491);
    const int demographics = 2 + static_cast<int>(rng.Below(3));
    const auto ids = testing::Ids("i", d);
    const auto rows = testing::RandomRows(rng, d, 8);
    const EmbeddingSet images = testing::MakeSet("m", ids, rows);
    std::vector<int> labels(d);
    std::map<std::string, int> demographic;
    for (size_t i = 0; i < d; ++i) {
      labels[i] = i < static_cast<size_t>(demographics) ? static_cast<int>(i)
                                                        : static_cast<int>(rng.Below(demographics));
      demographic[ids[i]] = labels[i];
    }
    ProtectedAttribute attr{"g", {}};
    for (int a = 0; a < demographics; ++a) attr.demographics.push_back(absl::StrCat("d", a));
    const auto table = testing::SingleAttributeTable(attr, ids, labels);
    const auto partition = *PartitionByDemographic(table, attr, ids);
    const auto prompt_row = testing::RandomRows(rng, 1, 8)[0];
    const std::vector<float> prompt(prompt_row.begin(), prompt_row.end());
    const auto items = testing::Items(images);
    for (const int k : {1 + static_cast<int>(rng.Below(d)), static_cast<int>(d)}) {
      auto skew = MaxSkewAtK(images, prompt, "p", partition, k);
      const auto expected = oracle::MaxSkew(prompt_row, items, demographic, demographics, k);
      if (!skew.ok() || !skew->max_skew || !expected) {
        ++failures;
        continue;
      }
      worst = std::max(worst, std::abs(*skew->max_skew - *expected));
      if (k == static_cast<int>(d) && *skew->max_skew != 0.0) ++failures;
    }
  }
  return {failures == 0 && worst <= 1e-12,
          absl::StrFormat("max |err| %.2e, failures %d", worst, failures)};
}

DbaInputs ToInputs(const std::vector<oracle::DbaTriple>& triples, int demographics) {
  DbaInputs inputs;
  for (int a = 0; a < demographics; ++a) inputs.attribute.demographics.push_back(absl::StrCat(a));
  for (size_t i = 0; i < triples.size(); ++i) {
    inputs.samples.push_back({absl::StrCat("q", i), triples[i].truth, triples[i].predicted,
                              static_cast<size_t>(triples[i].demographic)});
  }
  return inputs;
}

Outcome DbaCriterion() {
  SplitMix64 rng(3003);
  double worst = 0.0;
  size_t failures = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int demographics = 2 + static_cast<int>(rng.Below(3));
    const int answers = 1 + static_cast<int>(rng.Below(10));
    const size_t n = 1 + rng.Below(200);
    std::vector<oracle::DbaTriple> triples, perfect;
    for (size_t i = 0; i < n; ++i) {
      const int a = static_cast<int>(rng.Below(demographics));
      const std::string t = absl::StrCat("t", rng.Below(answers));
      triples.push_back({a, t, absl::StrCat("t", rng.Below(answers))});
      perfect.push_back({a, t, t});
    }
    auto got = Dba(ToInputs(triples, demographics));
    auto same = Dba(ToInputs(perfect, demographics));
    if (!got.ok() || !same.ok() || same->value != 0.0) {
      ++failures;
      continue;
    }
    worst = std::max(worst, std::abs(got->value - oracle::Dba(triples, demographics)));
  }
  std::vector<oracle::DbaTriple> worked;
  for (const auto& [a, truth, count] :
       std::vector<std::tuple<int, std::string, int>>{{0, "red", 3}, {0, "blue", 1},
                                                      {1, "red", 1}, {1, "blue", 3}}) {
    for (int i = 0; i < count; ++i) worked.push_back({a, truth, a == 0 ? "red" : "blue"});
  }
  const double example = Dba(ToInputs(worked, 2))->value;
  return {failures == 0 && worst <= 1e-12 && std::abs(example - 0.25) <= 1e-12,
          absl::StrFormat("max |err| %.2e, worked example %.17g, failures %d", worst, example,
                          failures)};
}

Outcome LicCriterion() {
  int correct = 0;
  bool zero = true;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const bool into_pred = seed % 2 == 0;
    const CaptionPair pair = GenLeakCaptions(seed, 150, into_pred ? 0.0 : 0.3,
                                             into_pred ? 0.3 : 0.0);
    auto result = Lic(pair.ground_truth, pair.generated, 2, seed, DefaultLeakageOptions());
    if (result.ok() && (into_pred ? result->lic > 0 : result->lic < 0)) ++correct;
    if (seed < 5) {
      auto same = Lic(pair.ground_truth, pair.ground_truth, 2, seed, DefaultLeakageOptions());
      zero = zero && same.ok() && same->lic == 0.0;
    }
  }
  return {correct >= 19 && zero,
          absl::StrFormat("sign correct %d/20, identical inputs give 0: %s", correct,
                          zero ? "yes" : "no")};
}

Outcome SpearmanCriterion() {
  SplitMix64 rng(5005);
  double worst_rho = 0.0;
  double worst_p = 0.0;
  int checked = 0;
  while (checked < 1000) {
    const size_t n = 3 + rng.Below(48);
    const uint64_t levels = 2 + rng.Below(n);
    std::vector<double> x(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.Below(levels));
      y[i] = rng.Uniform() < 0.5 ? static_cast<double>(rng.Below(levels)) : rng.Uniform();
    }
    auto result = Spearman(x, y, PValueMethod::kTApprox);
    if (!result.ok()) continue;  // constant draw
    const double rho = oracle::SpearmanRho(x, y);
    worst_rho = std::max(worst_rho, std::abs(result->rho - rho));
    worst_p = std::max(worst_p, std::abs(result->p - oracle::SpearmanTP(rho, n)));
    ++checked;
  }
  int agree = 0;
  std::string worst_z;
  double max_z = 0.0;
  for (int instance = 0; instance < 10; ++instance) {
    SplitMix64 draw(6000 + instance);
    const size_t n = 5 + instance % 4;
    std::vector<double> x(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = draw.Uniform();
      y[i] = x[i] + 0.4 * draw.Normal();
    }
    auto exact = Spearman(x, y, PValueMethod::kExact);
    auto mc = Spearman(x, y, PValueMethod::kPermutation, instance);
    const double se = std::sqrt(exact->p * (1 - exact->p) / kDefaultPermutationDraws);
    const double diff = std::abs(mc->p - exact->p);
    if (se > 0) max_z = std::max(max_z, diff / se);
    if (diff <= 3 * se || diff == 0.0) ++agree;
  }
  return {worst_rho <= 1e-12 && worst_p <= 1e-12 && agree == 10,
          absl::StrFormat("max |rho err| %.2e, max |t-p err| %.2e, exact vs Monte Carlo "
                          "within 3 SE %d/10 (max %.2f SE)",
                          worst_rho, worst_p, agree, max_z)};
}

std::vector<Clustering> ClusterAll(const std::vector<EmbeddingSet>& spaces, int k, uint64_t seed) {
  std::vector<Clustering> out;
  for (const auto& set : spaces) out.push_back(*KMeans(set, k, seed));
  return out;
}

Outcome GroupsCriterion() {
  std::string detail;
  bool pass = true;
  for (const size_t e : {3, 5, 10}) {
    int good = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      SynthSpec spec;
      spec.seed = seed;
      spec.models = e;
      auto spaces = GenSpaces(spec);
      auto groups = MatchGroups(ClusterAll(spaces->pre, 6, seed), 100);
      if (!groups.ok()) continue;
      std::vector<std::set<std::string>> planted(spec.concepts);
      for (size_t i = 0; i < spaces->ids.size(); ++i) {
        if (spaces->concept_of[i] >= 0) planted[spaces->concept_of[i]].insert(spaces->ids[i]);
      }
      bool all = true;
      for (const auto& concept_ids : planted) {
        double best = 0.0;
        for (const Group& g : groups->groups) {
          best = std::max(best, oracle::Jaccard(concept_ids, {g.members.begin(), g.members.end()}));
        }
        all = all && best >= 0.9;
      }
      good += all;
    }
    pass = pass && good >= 18;
    absl::StrAppend(&detail, "E=", e, " Jaccard>=0.9 ", good, "/20; ");
  }
  int equal = 0, instances = 0;
  for (const int e : {2, 3}) {
    for (const int k : {2, 3, 4}) {
      for (uint64_t seed = 0; seed < 20; ++seed) {
        SynthSpec spec;
        spec.seed = 100 + seed;
        spec.models = e;
        spec.samples = 300;
        spec.noise = 0.3;
        auto spaces = GenSpaces(spec);
        const auto clusterings = ClusterAll(spaces->pre, k, seed);
        std::vector<std::vector<int>> labels;
        for (const auto& c : clusterings) {
          labels.emplace_back();
          for (const auto& [id, cluster] : c.assignment) labels.back().push_back(cluster);
        }
        auto groups = MatchGroups(clusterings, 1);
        const size_t greedy = groups.ok() && !groups->groups.empty()
                                  ? groups->groups.front().members.size()
                                  : 0;
        equal += greedy == oracle::ExhaustiveBestGroup(labels, k);
        ++instances;
      }
    }
  }
  pass = pass && equal * 100 >= instances * 95;
  absl::StrAppend(&detail, "greedy == exhaustive ", equal, "/", instances);
  return {pass, detail};
}

Outcome ConvergenceCriterion() {
  SynthSpec probe;
  probe.samples = 200;
  probe.models = 2;
  auto spaces = GenSpaces(probe);
  double worst = 0.0;
  for (const auto& set : spaces->pre) {
    auto profile = MakeSimilarityProfile(set, spaces->ids);
    std::vector<std::vector<double>> rows;
    for (const auto& item : testing::Items(set)) rows.push_back(item.vec);
    const auto expected = oracle::Profile(rows);
    for (size_t i = 0; i < expected.size(); ++i) {
      worst = std::max(worst, std::abs(profile->similarities[i] - expected[i]));
    }
  }
  int converged = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.models = 10;
    spec.samples = 200;
    spec.convergence = 0.9;
    auto s = GenSpaces(spec);
    std::vector<SimilarityProfile> pre, post;
    for (size_t m = 0; m < s->pre.size(); ++m) {
      pre.push_back(*MakeSimilarityProfile(s->pre[m], s->ids, Stage::kPre));
      post.push_back(*MakeSimilarityProfile(s->post[m], s->ids, Stage::kPost));
    }
    const auto report =
        MakeConvergenceReport(*InterModelSimilarity(pre), *InterModelSimilarity(post));
    converged += report.mean_post > report.mean_pre && report.stddev_post < report.stddev_pre;
  }
  ConvergenceStats published_pre, published_post;
  published_pre.mean = 0.940;
  published_pre.stddev = 0.017;
  published_post.min = 0.9891;
  const double z = *MakeConvergenceReport(published_pre, published_post).z_min_post;
  return {worst <= 1e-6 && converged >= 19 && std::abs(z - 2.89) <= 0.01,
          absl::StrFormat("profile max |err| %.2e, converged %d/20, z %.4f", worst, converged,
                          z)};
}

std::string Dir(const std::string& name) { return testing::TempDir("accept_" + name); }

bool SameTree(const std::string& a, const std::string& b) {
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto other = std::filesystem::path(b) / std::filesystem::relative(entry.path(), a);
    if (testing::ReadFile(entry.path().string()) != testing::ReadFile(other.string())) return false;
  }
  return true;
}

Outcome DeterminismCriterion() {
  const std::string root = Dir("determinism");
  std::ofstream(root + "/spec.json") << R"({"samples": 300, "models": 5})";
  const std::string bundle = root + "/bundle";
  std::vector<std::string> mismatched;
  int commands = 0;

  // Each command runs twice; reports (minus timing) and plots must match.
  auto twice = [&](const std::string& label, std::vector<std::string> args, bool plot) {
    ++commands;
    std::string reports[2], plots[2];
    for (int run = 0; run < 2; ++run) {
      const std::string out = absl::StrCat(root, "/", commands, "_", run);
      std::vector<std::string> full = {"--seed", "0", "--out", out + ".json"};
      if (plot) full.insert(full.end(), {"--plot", out + ".svg"});
      full.insert(full.end(), args.begin(), args.end());
      const auto result = testing::RunCli(full);
      if (result.exit_code != 0) {
        mismatched.push_back(label + " (exit " + std::to_string(result.exit_code) + ")");
        return;
      }
      reports[run] = testing::WithoutTiming(testing::ReadFile(out + ".json"));
      if (plot) plots[run] = testing::ReadFile(out + ".svg");
    }
    if (reports[0] != reports[1] || plots[0] != plots[1]) mismatched.push_back(label);
  };

  // synth writes a directory and prints its report.
  ++commands;
  std::string synth_reports[2];
  for (int run = 0; run < 2; ++run) {
    const auto result = testing::RunCli({"--seed", "0", "synth", "generate", "--spec",
                                         root + "/spec.json", "--out", bundle + (run ? "2" : "")});
    synth_reports[run] = testing::WithoutTiming(result.out);
  }
  if (synth_reports[0] != synth_reports[1] || !SameTree(bundle, bundle + "2")) {
    mismatched.push_back("synth generate");
  }

  const std::string ann = bundle + "/annotations.jsonl";
  twice("audit recall",
        {"audit", "recall", "--images", bundle + "/pre/m0.images.emb", "--texts",
         bundle + "/pre/m0.texts.emb", "--pairs", bundle + "/pairs.jsonl", "--annotations", ann,
         "--attr", "gender"},
        false);
  twice("audit maxskew",
        {"audit", "maxskew", "--images", bundle + "/pre/m0.images.emb", "--prompts",
         bundle + "/pre/m0.prompts.emb", "--annotations", ann, "--attr", "skintone", "--k", "100"},
        false);
  twice("audit downstream vqa",
        {"audit", "downstream", "--task", "vqa", "--pred", bundle + "/down/m0.vqa.jsonl",
         "--annotations", ann, "--attr", "gender", "--metric", "kl", "--metric", "dba"},
        false);
  twice("audit downstream caption",
        {"audit", "downstream", "--task", "caption", "--pred", bundle + "/down/m0.captions.jsonl",
         "--scores", bundle + "/down/m0.cider.jsonl", "--annotations", ann, "--attr", "gender",
         "--metric", "kl", "--metric", "lic"},
        false);
  for (const std::string stage : {"pre", "down"}) {
    twice("audit bundle " + stage,
          {"audit", "bundle", "--manifest", bundle + "/manifest.json", "--stage", stage}, false);
    std::filesystem::copy_file(absl::StrCat(root, "/", commands, "_0.json"),
                               root + "/" + stage + ".json",
                               std::filesystem::copy_options::overwrite_existing);
  }
  std::vector<std::string> discover = {"groups", "discover", "--min-size", "40", "--embeddings"};
  for (int m = 0; m < 5; ++m) discover.push_back(absl::StrCat(bundle, "/pre/m", m, ".images.emb"));
  twice("groups discover", discover, false);
  std::filesystem::copy_file(absl::StrCat(root, "/", commands, "_0.json"), root + "/groups.json",
                             std::filesystem::copy_options::overwrite_existing);
  twice("groups audit",
        {"groups", "audit", "--groups", root + "/groups.json", "--manifest",
         bundle + "/manifest.json"},
        true);
  twice("transfer correlate",
        {"transfer", "correlate", "--pre", root + "/pre.json", "--down", root + "/down.json"},
        true);
  twice("transfer gaps",
        {"transfer", "gaps", "--pre", root + "/pre.json", "--down", root + "/down.json", "--attr",
         "gender"},
        true);
  std::vector<std::string> converge = {"converge", "compare", "--pre"};
  for (int m = 0; m < 5; ++m) converge.push_back(absl::StrCat(bundle, "/pre/m", m, ".images.emb"));
  converge.push_back("--post");
  for (int m = 0; m < 5; ++m) converge.push_back(absl::StrCat(bundle, "/post/m", m, ".emb"));
  twice("converge compare", converge, true);

  std::filesystem::remove_all(root);
  std::string detail = absl::StrCat(commands - mismatched.size(), "/", commands,
                                    " commands byte-identical");
  for (const auto& m : mismatched) absl::StrAppend(&detail, "; differs: ", m);
  return {mismatched.empty(), detail};
}

Outcome EndToEndCriterion() {
  int good = 0;
  double worst_other = 0.0;
  std::string failures;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const std::string root = Dir(absl::StrCat("e2e", seed));
    const std::string bundle = root + "/bundle";
    const std::string s = std::to_string(seed);
    bool ok = testing::RunCli({"--seed", s, "synth", "generate", "--out", bundle}).exit_code == 0;
    for (const std::string stage : {"pre", "down"}) {
      ok = ok && testing::RunCli({"--seed", s, "--out", root + "/" + stage + ".json", "audit",
                                  "bundle", "--manifest", bundle + "/manifest.json", "--stage",
                                  stage})
                         .exit_code == 0;
    }
    const auto corr = testing::RunCli({"--seed", s, "transfer", "correlate", "--pre",
                                       root + "/pre.json", "--down", root + "/down.json"});
    ok = ok && corr.exit_code == 0;
    if (ok) {
      const json planted = json::parse(testing::ReadFile(bundle + "/expected.json"))["planted"];
      const std::string label =
          absl::StrCat(planted["pre_metric"].get<std::string>(), "/",
                       planted["attribute"].get<std::string>(), " ~ ",
                       planted["down_metric"].get<std::string>(), "/",
                       planted["attribute"].get<std::string>());
      bool planted_perfect = false, others_small = true;
      const json report = json::parse(corr.out);
      for (const auto& entry : report["results"]["results"]) {
        const double rho = entry["correlation"]["rho"].get<double>();
        if (entry["label"] == label) {
          planted_perfect = rho == 1.0;
        } else {
          worst_other = std::max(worst_other, std::abs(rho));
          others_small = others_small && std::abs(rho) < 0.7;
        }
      }
      ok = planted_perfect && others_small;
    }
    if (ok) {
      ++good;
    } else {
      absl::StrAppend(&failures, " ", seed);
    }
    std::filesystem::remove_all(root);
  }
  return {good >= 18,
          absl::StrFormat("%d/20 seeds (planted rho = 1, others |rho| < 0.7); max other |rho| "
                          "%.3f%s",
                          good, worst_other, failures.empty() ? "" : "; failed seeds" + failures)};
}

int Main() {
  const std::vector<Criterion> criteria = {
      {"kl-metrics", 1.0, KlMetrics},
      {"maxskew", 10.0, MaxSkew},
      {"dba", 10.0, DbaCriterion},
      {"lic", 60.0, LicCriterion},
      {"spearman", 0.0, SpearmanCriterion},
      {"group-matching", 0.0, GroupsCriterion},
      {"convergence", 30.0, ConvergenceCriterion},
      {"determinism", 0.0, DeterminismCriterion},
      {"end-to-end", 0.0, EndToEndCriterion},
  };
  int failed = 0;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome = criterion.run();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string budget;
    if (criterion.budget > 0) {
      budget = absl::StrFormat(" / budget %.0f s", criterion.budget);
      if (seconds >= criterion.budget) outcome.pass = false;
    }
    failed += !outcome.pass;
    std::printf("%s %s: %s [%.2f s%s]\n", outcome.pass ? "PASS" : "FAIL", criterion.name.c_str(),
                outcome.detail.c_str(), seconds, budget.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace biasaudit

int main() { return biasaudit::Main(); }
