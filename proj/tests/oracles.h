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

// Independent reference implementations used only by tests. They follow the
// textbook definitions as literally as possible (full sorts, naive ranks,
// explicit probability tables) and share no code with the library.

#ifndef BIASAUDIT_TESTS_ORACLES_H_
#define BIASAUDIT_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <gsl/gsl_cdf.h>

namespace oracle {

// KL(p || uniform) with p = r / sum(r); nullopt when sum(r) <= 0.
inline std::optional<double> KlUniform(const std::vector<double>& r) {
  double total = 0.0;
  for (double v : r) total += v;
  if (!(total > 0.0)) return std::nullopt;
  const double q = 1.0 / static_cast<double>(r.size());
  double kl = 0.0;
  for (double v : r) {
    const double p = v / total;
    if (p > 0.0) kl += p * std::log(p / q);
  }
  return kl;
}

inline double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Item {
  std::string id;
  std::vector<double> vec;
};

// Items sorted by similarity to `query` descending, ties by id ascending.
inline std::vector<std::string> Ranking(const std::vector<double>& query,
                                        const std::vector<Item>& items) {
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& item : items) scored.push_back({Cosine(query, item.vec), item.id});
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::vector<std::string> out;
  for (const auto& [s, id] : scored) out.push_back(id);
  return out;
}

// Recall@k per demographic index: an image hits when one of its correct
// texts sits in the first k entries of the full text ranking.
inline std::vector<std::optional<double>> RecallAtK(
    const std::vector<Item>& images, const std::vector<Item>& texts,
    const std::map<std::string, std::vector<std::string>>& pairs,
    const std::map<std::string, int>& demographic, int num_demographics, int k) {
  std::vector<int> hits(num_demographics, 0), counts(num_demographics, 0);
  for (const auto& image : images) {
    const auto d = demographic.find(image.id);
    if (d == demographic.end()) continue;
    const auto p = pairs.find(image.id);
    if (p == pairs.end()) continue;
    ++counts[d->second];
    const auto ranking = Ranking(image.vec, texts);
    for (int r = 0; r < k && r < static_cast<int>(ranking.size()); ++r) {
      if (std::find(p->second.begin(), p->second.end(), ranking[r]) != p->second.end()) {
        ++hits[d->second];
        break;
      }
    }
  }
  std::vector<std::optional<double>> out;
  for (int a = 0; a < num_demographics; ++a) {
    if (counts[a] == 0) {
      out.push_back(std::nullopt);
    } else {
      out.push_back(static_cast<double>(hits[a]) / counts[a]);
    }
  }
  return out;
}

// MaxSkew@k by full sort and proportion counting.
inline std::optional<double> MaxSkew(const std::vector<double>& prompt,
                                     const std::vector<Item>& images,
                                     const std::map<std::string, int>& demographic,
                                     int num_demographics, int k) {
  std::vector<Item> labeled;
  for (const auto& image : images) {
    if (demographic.count(image.id)) labeled.push_back(image);
  }
  const auto ranking = Ranking(prompt, labeled);
  std::vector<double> top(num_demographics, 0.0), all(num_demographics, 0.0);
  for (size_t r = 0; r < ranking.size(); ++r) {
    const int a = demographic.at(ranking[r]);
    all[a] += 1.0;
    if (static_cast<int>(r) < k) top[a] += 1.0;
  }
  std::optional<double> best;
  for (int a = 0; a < num_demographics; ++a) {
    if (top[a] == 0.0) continue;
    const double skew = std::log((top[a] / k) / (all[a] / ranking.size()));
    if (!best || skew > *best) best = skew;
  }
  return best;
}

struct DbaTriple {
  int demographic;
  std::string truth;
  std::string predicted;
};

// Bias amplification A->T over the ground-truth vocabulary, using the
// Delta * (2u - 1) form of each term. u compares P(a,t) with P(a)P(t) by
// exact integer cross-multiplication.
inline double Dba(const std::vector<DbaTriple>& samples, int num_demographics) {
  std::set<std::string> vocabulary;
  for (const auto& s : samples) vocabulary.insert(s.truth);
  const long long n = static_cast<long long>(samples.size());
  double sum = 0.0;
  for (int a = 0; a < num_demographics; ++a) {
    long long n_a = 0;
    for (const auto& s : samples) n_a += s.demographic == a;
    for (const auto& t : vocabulary) {
      long long n_t = 0, n_at = 0, p_at = 0;
      for (const auto& s : samples) {
        n_t += s.truth == t;
        n_at += s.demographic == a && s.truth == t;
        p_at += s.demographic == a && s.predicted == t;
      }
      const int u = n_at * n > n_a * n_t ? 1 : 0;
      const double truth_cond = n_a ? static_cast<double>(n_at) / n_a : 0.0;
      const double pred_cond = n_a ? static_cast<double>(p_at) / n_a : 0.0;
      sum += (pred_cond - truth_cond) * (2 * u - 1);
    }
  }
  return sum / (num_demographics * static_cast<double>(vocabulary.size()));
}

// 1-based ranks, ties averaged, computed by counting (O(n^2)).
inline std::vector<double> NaiveRanks(const std::vector<double>& x) {
  std::vector<double> ranks(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double below = 0.0, equal = 0.0;
    for (size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) below += 1.0;
      if (x[j] == x[i]) equal += 1.0;
    }
    ranks[i] = below + (equal + 1.0) / 2.0;
  }
  return ranks;
}

inline double Pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double SpearmanRho(const std::vector<double>& x, const std::vector<double>& y) {
  return Pearson(NaiveRanks(x), NaiveRanks(y));
}

// Two-sided p from t = rho * sqrt((n - 2) / (1 - rho^2)) with n - 2 dof.
inline double SpearmanTP(double rho, size_t n) {
  if (std::abs(rho) >= 1.0) return 0.0;
  const double t = rho * std::sqrt((n - 2.0) / (1.0 - rho * rho));
  return std::min(1.0, 2.0 * gsl_cdf_tdist_Q(std::abs(t), n - 2.0));
}

// Two-sided exact permutation p: share of all orderings of y whose |rho|
// reaches the observed |rho|.
inline double SpearmanExactP(const std::vector<double>& x, const std::vector<double>& y) {
  const double observed = std::abs(SpearmanRho(x, y));
  std::vector<size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  size_t total = 0, extreme = 0;
  do {
    std::vector<double> permuted;
    for (size_t i : order) permuted.push_back(y[i]);
    ++total;
    if (std::abs(SpearmanRho(x, permuted)) >= observed - 1e-12) ++extreme;
  } while (std::next_permutation(order.begin(), order.end()));
  return static_cast<double>(extreme) / total;
}

// Largest intersection over every choice of one cluster per clustering.
inline size_t ExhaustiveBestGroup(const std::vector<std::vector<int>>& labels, int k) {
  const size_t e = labels.size();
  std::vector<int> choice(e, 0);
  size_t best = 0;
  while (true) {
    size_t count = 0;
    for (size_t i = 0; i < labels[0].size(); ++i) {
      bool all = true;
      for (size_t m = 0; m < e && all; ++m) all = labels[m][i] == choice[m];
      count += all;
    }
    best = std::max(best, count);
    size_t m = 0;
    while (m < e && ++choice[m] == k) choice[m++] = 0;
    if (m == e) break;
  }
  return best;
}

inline double Jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  size_t both = 0;
  for (const auto& x : a) both += b.count(x);
  const size_t either = a.size() + b.size() - both;
  return either == 0 ? 1.0 : static_cast<double>(both) / either;
}

// Pairwise cosine similarities (i < j) by double loop over rows.
inline std::vector<double> Profile(const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = i + 1; j < rows.size(); ++j) out.push_back(Cosine(rows[i], rows[j]));
  }
  return out;
}

}  // namespace oracle

#endif  // BIASAUDIT_TESTS_ORACLES_H_
