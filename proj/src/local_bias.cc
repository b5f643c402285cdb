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

#include "biasaudit/local_bias.h"

#include <algorithm>
#include <limits>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "biasaudit/random.h"
#include "biasaudit/vector_math.h"

namespace biasaudit {
namespace {

double SquaredDistance(const double* a, const double* b, size_t dim) {
  double sum = 0.0;
  for (size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return sum;
}

struct LloydRun {
  std::vector<int> labels;
  std::vector<double> centroids;
  std::vector<double> history;
  double inertia = 0.0;
  int iterations = 0;
};

// Nearest centroid per point (ties to the lowest index); returns inertia.
double Assign(const std::vector<double>& points, size_t n, size_t dim,
              const std::vector<double>& centroids, int k,
              std::vector<int>* labels, std::vector<double>* distances) {
  double inertia = 0.0;
  for (size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_distance = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d =
          SquaredDistance(&points[i * dim], &centroids[c * dim], dim);
      if (d < best_distance) {
        best_distance = d;
        best = c;
      }
    }
    (*labels)[i] = best;
    (*distances)[i] = best_distance;
    inertia += best_distance;
  }
  return inertia;
}

LloydRun RunLloyd(const std::vector<double>& points, size_t n, size_t dim,
                  int k, SplitMix64 rng, int max_iterations) {
  LloydRun run;
  run.centroids.assign(static_cast<size_t>(k) * dim, 0.0);

  // k-means++ seeding.
  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  size_t first = rng.Below(n);
  for (int c = 0; c < k; ++c) {
    size_t pick = first;
    if (c > 0) {
      double total = 0.0;
      for (size_t i = 0; i < n; ++i) total += nearest[i];
      if (total > 0.0) {
        const double target = rng.Uniform() * total;
        double running = 0.0;
        pick = n;
        for (size_t i = 0; i < n; ++i) {
          if (nearest[i] <= 0.0) continue;
          running += nearest[i];
          pick = i;
          if (running > target) break;
        }
      } else {
        pick = static_cast<size_t>(
            std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
      }
    }
    chosen[pick] = true;
    std::copy_n(&points[pick * dim], dim, &run.centroids[c * dim]);
    for (size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(
          nearest[i], SquaredDistance(&points[i * dim], &run.centroids[c * dim], dim));
    }
  }

  run.labels.assign(n, 0);
  std::vector<double> distances(n);
  run.inertia = Assign(points, n, dim, run.centroids, k, &run.labels, &distances);

  std::vector<int> previous;
  std::vector<size_t> sizes(k);
  for (int iteration = 0; iteration < max_iterations; ++iteration) {
    previous = run.labels;
    std::fill(run.centroids.begin(), run.centroids.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (size_t i = 0; i < n; ++i) {
      const int c = run.labels[i];
      ++sizes[c];
      for (size_t d = 0; d < dim; ++d) run.centroids[c * dim + d] += points[i * dim + d];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (size_t d = 0; d < dim; ++d) {
        run.centroids[c * dim + d] /= static_cast<double>(sizes[c]);
      }
    }
    // Reseed empty clusters with the point farthest from its centroid.
    for (int c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      size_t far = n;
      double far_distance = -1.0;
      for (size_t i = 0; i < n; ++i) {
        const int owner = run.labels[i];
        if (owner < 0 || sizes[owner] <= 1) continue;
        const double d = SquaredDistance(&points[i * dim],
                                         &run.centroids[owner * dim], dim);
        if (d > far_distance) {
          far_distance = d;
          far = i;
        }
      }
      if (far == n) continue;
      --sizes[run.labels[far]];
      run.labels[far] = c;
      sizes[c] = 1;
      std::copy_n(&points[far * dim], dim, &run.centroids[c * dim]);
    }
    run.inertia =
        Assign(points, n, dim, run.centroids, k, &run.labels, &distances);
    run.history.push_back(run.inertia);
    run.iterations = iteration + 1;
    if (run.labels == previous) break;
  }
  return run;
}

}  // namespace

std::vector<std::set<std::string>> Clustering::Members() const {
  std::vector<std::set<std::string>> members(k);
  for (const auto& [id, cluster] : assignment) members[cluster].insert(id);
  return members;
}

absl::StatusOr<Clustering> KMeans(const EmbeddingSet& embeddings, int k,
                                  uint64_t seed,
                                  const KMeansOptions& options) {
  const size_t n = embeddings.size();
  if (k < 1 || static_cast<size_t>(k) > n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "k=", k, " must lie in [1, ", n, "] for model \"",
        embeddings.model_id(), "\""));
  }
  const size_t dim = embeddings.dim();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return embeddings.ids()[a] < embeddings.ids()[b];
  });
  std::vector<double> points(n * dim);
  for (size_t i = 0; i < n; ++i) {
    const auto row = embeddings.Row(order[i]);
    const double norm = Norm(row);
    if (norm == 0.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("Row \"", embeddings.ids()[order[i]],
                       "\" has zero magnitude"));
    }
    for (size_t d = 0; d < dim; ++d) points[i * dim + d] = row[d] / norm;
  }

  SplitMix64 root(seed);
  LloydRun best;
  bool have_best = false;
  const int restarts = std::max(options.restarts, 1);
  for (int r = 0; r < restarts; ++r) {
    LloydRun run = RunLloyd(points, n, dim, k, root.Split(static_cast<uint64_t>(r)),
                            options.max_iterations);
    if (!have_best || run.inertia < best.inertia) {
      best = std::move(run);
      have_best = true;
    }
  }

  Clustering out;
  out.model_id = embeddings.model_id();
  out.k = k;
  out.seed = seed;
  for (size_t i = 0; i < n; ++i) {
    out.assignment.emplace(embeddings.ids()[order[i]], best.labels[i]);
  }
  out.centroids = std::move(best.centroids);
  out.inertia = best.inertia;
  out.inertia_history = std::move(best.history);
  out.iterations = best.iterations;
  return out;
}

absl::StatusOr<GroupAssignment> MatchGroups(
    const std::vector<Clustering>& clusterings, size_t min_size,
    const std::string& reference_model) {
  if (clusterings.empty()) {
    return absl::InvalidArgumentError("MatchGroups needs >= 1 clustering");
  }
  std::vector<const Clustering*> ordered;
  for (const auto& c : clusterings) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Clustering* a, const Clustering* b) {
                     return a->model_id < b->model_id;
                   });
  for (size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->model_id == ordered[i - 1]->model_id) {
      return absl::InvalidArgumentError(absl::StrCat(
          "Duplicate clustering for model \"", ordered[i]->model_id, "\""));
    }
  }
  const auto& ids0 = ordered.front()->assignment;
  for (const Clustering* c : ordered) {
    if (c->assignment.size() != ids0.size() ||
        !std::equal(c->assignment.begin(), c->assignment.end(), ids0.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; })) {
      return absl::InvalidArgumentError(absl::StrCat(
          "Clustering of \"", c->model_id, "\" covers a different id set"));
    }
  }
  const Clustering* reference = ordered.front();
  if (!reference_model.empty()) {
    const auto it = std::find_if(ordered.begin(), ordered.end(),
                                 [&](const Clustering* c) {
                                   return c->model_id == reference_model;
                                 });
    if (it == ordered.end()) {
      return absl::NotFoundError(absl::StrCat("Reference model \"",
                                              reference_model,
                                              "\" has no clustering"));
    }
    reference = *it;
  }

  GroupAssignment out;
  out.min_size = min_size;
  out.reference_model = reference->model_id;

  struct Candidate {
    int reference_cluster;
    std::vector<std::string> members;
    std::map<std::string, int> clusters;
  };
  std::vector<Candidate> candidates;
  const auto reference_members = reference->Members();
  for (int c = 0; c < reference->k; ++c) {
    Candidate candidate;
    candidate.reference_cluster = c;
    candidate.clusters[reference->model_id] = c;
    std::vector<std::string> current(reference_members[c].begin(),
                                     reference_members[c].end());
    for (const Clustering* other : ordered) {
      if (other == reference) continue;
      std::vector<size_t> overlap(other->k, 0);
      for (const auto& id : current) ++overlap[other->assignment.at(id)];
      int best = 0;
      for (int j = 1; j < other->k; ++j) {
        if (overlap[j] > overlap[best]) best = j;
      }
      if (overlap[best] > 0) {
        for (int j = best + 1; j < other->k; ++j) {
          if (overlap[j] == overlap[best]) {
            out.ambiguities.push_back(absl::StrCat(
                reference->model_id, "#", c, " vs ", other->model_id,
                ": clusters ", best, " and ", j, " tie at ", overlap[best],
                "; kept ", best));
          }
        }
      }
      candidate.clusters[other->model_id] = best;
      std::vector<std::string> next;
      for (const auto& id : current) {
        if (other->assignment.at(id) == best) next.push_back(id);
      }
      current = std::move(next);
    }
    if (current.size() >= min_size && !current.empty()) {
      candidate.members = std::move(current);
      candidates.push_back(std::move(candidate));
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.members.size() > b.members.size();
                   });
  for (auto& candidate : candidates) {
    Group group;
    group.id = absl::StrCat("g", out.groups.size());
    group.members = std::move(candidate.members);
    group.clusters = std::move(candidate.clusters);
    out.groups.push_back(std::move(group));
  }
  return out;
}

absl::StatusOr<GroupBiasTable> PerGroupBias(
    const GroupAssignment& groups, const std::vector<std::string>& models,
    const std::set<std::string>& all_ids, const SubsetMetric& metric) {
  if (models.empty()) {
    return absl::InvalidArgumentError("PerGroupBias needs >= 1 model");
  }
  const auto evaluate = [&](const std::string& model,
                            const std::set<std::string>& ids) {
    auto measured = metric(model, ids);
    if (!measured.ok()) {
      return Measurement::Undefined(std::string(measured.status().message()));
    }
    return *measured;
  };
  GroupBiasTable table;
  table.models = models;
  for (const auto& model : models) table.global.push_back(evaluate(model, all_ids));
  for (const auto& group : groups.groups) {
    table.groups.push_back(group.id);
    const std::set<std::string> ids(group.members.begin(), group.members.end());
    std::vector<Measurement> row;
    for (const auto& model : models) row.push_back(evaluate(model, ids));
    table.local.push_back(std::move(row));
  }
  return table;
}

namespace {

GroupCorrelation Correlate(const std::string& label,
                           const std::vector<Measurement>& global,
                           const std::vector<Measurement>& local,
                           PValueMethod method) {
  GroupCorrelation out;
  out.group = label;
  std::vector<double> xs, ys;
  for (size_t m = 0; m < global.size(); ++m) {
    if (global[m].defined() && local[m].defined()) {
      xs.push_back(*global[m].value);
      ys.push_back(*local[m].value);
    }
  }
  auto result = Spearman(xs, ys, method);
  if (result.ok()) {
    out.correlation = *result;
  } else {
    out.reason = std::string(result.status().message());
  }
  return out;
}

}  // namespace

std::vector<GroupCorrelation> GlobalLocalCorrelation(
    const GroupBiasTable& table, PValueMethod method) {
  std::vector<GroupCorrelation> out;
  out.push_back(Correlate("global", table.global, table.global, method));
  for (size_t g = 0; g < table.groups.size(); ++g) {
    out.push_back(Correlate(table.groups[g], table.global, table.local[g], method));
  }
  return out;
}

}  // namespace biasaudit
