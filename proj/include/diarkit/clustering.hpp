// diarkit/clustering.hpp
//
// Copyright 2026 The diarkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DIARKIT_CLUSTERING_HPP
#define DIARKIT_CLUSTERING_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "diarkit/common.hpp"
#include "diarkit/linalg.hpp"
#include "diarkit/matrix.hpp"
#include "diarkit/similarity.hpp"
#include "diarkit/vad.hpp"

namespace diarkit {

struct ClusterAssignment {
  std::vector<int> labels;  // dense 0..k-1
  int num_clusters = 0;
  double threshold = 0.0;
};

enum class Linkage { kAverage, kSingle, kComplete };

namespace clustering_detail {

// Dense relabeling ordered by each cluster's smallest member index.
inline ClusterAssignment densify(const std::vector<int>& raw, double threshold) {
  ClusterAssignment out;
  out.threshold = threshold;
  out.labels.assign(raw.size(), -1);
  std::vector<int> seen;  // raw labels in first-occurrence order
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int r = raw[i];
    auto it = std::find(seen.begin(), seen.end(), r);
    int dense;
    if (it == seen.end()) {
      dense = static_cast<int>(seen.size());
      seen.push_back(r);
    } else {
      dense = static_cast<int>(it - seen.begin());
    }
    out.labels[i] = dense;
  }
  out.num_clusters = static_cast<int>(seen.size());
  return out;
}

}  // namespace clustering_detail

// ---------------------------------------------------------------------------
// Agglomerative hierarchical clustering
// ---------------------------------------------------------------------------

/// Greedy bottom-up merging: repeatedly unify the active pair with maximal
/// inter-cluster similarity (average linkage by default) until the best
/// value falls below stop_threshold or one cluster remains. Ties break on
/// the lexicographically smallest (i, j); a merged pair keeps the smaller
/// index. Labels are dense, ordered by each cluster's smallest member.
inline ClusterAssignment ahc(const SimilarityMatrix& sim, double stop_threshold,
                             Linkage linkage = Linkage::kAverage) {
  sim.validate_symmetric();
  const std::size_t n = sim.size();
  if (n == 0) return {{}, 0, stop_threshold};

  // pair statistic between clusters: sum of cross-pair similarities for
  // average linkage, min/max for complete/single
  Matrix stat = sim.values;
  std::vector<double> sizes(n, 1.0);
  std::vector<bool> active(n, true);
  std::vector<int> cluster_of(n);
  std::iota(cluster_of.begin(), cluster_of.end(), 0);
  std::size_t num_active = n;

  auto link_value = [&](std::size_t i, std::size_t j) {
    return linkage == Linkage::kAverage ? stat(i, j) / (sizes[i] * sizes[j])
                                        : stat(i, j);
  };

  while (num_active > 1) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        if (link_value(i, j) > best) {
          best = link_value(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (!(best >= stop_threshold)) break;

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      switch (linkage) {
        case Linkage::kAverage: stat(bi, k) += stat(bj, k); break;
        case Linkage::kSingle: stat(bi, k) = std::max(stat(bi, k), stat(bj, k)); break;
        case Linkage::kComplete: stat(bi, k) = std::min(stat(bi, k), stat(bj, k)); break;
      }
      stat(k, bi) = stat(bi, k);
    }
    sizes[bi] += sizes[bj];
    active[bj] = false;
    --num_active;
    for (auto& c : cluster_of)
      if (c == static_cast<int>(bj)) c = static_cast<int>(bi);
  }

  return clustering_detail::densify(cluster_of, stop_threshold);
}

// ---------------------------------------------------------------------------
// k-means (used by spectral clustering)
// ---------------------------------------------------------------------------

struct KmeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
};

namespace clustering_detail {

inline double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

/// Lloyd iterations with k-means++ seeding; empty clusters are refilled
/// with the point farthest from its centroid.
inline KmeansResult kmeans_once(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();

  Matrix centroids(k, d);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  const std::size_t first =
      static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
  std::copy(points.row(first), points.row(first) + d, centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] =
          std::min(min_dist[i], sq_dist(points.row(i), centroids.row(c - 1), d));
      total += min_dist[i];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = rng.next_double() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_dist[i];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    }
    std::copy(points.row(chosen), points.row(chosen) + d, centroids.row(c));
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = sq_dist(points.row(i), centroids.row(c), d);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (labels[i] != static_cast<int>(best)) {
        labels[i] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    centroids.fill(0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double* c = centroids.row(static_cast<std::size_t>(labels[i]));
      const double* p = points.row(i);
      for (std::size_t j = 0; j < d; ++j) c[j] += p[j];
      ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // refill with the point farthest from its own centroid
        std::size_t worst = 0;
        double worst_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dist = sq_dist(
              points.row(i), centroids.row(static_cast<std::size_t>(labels[i])), d);
          if (dist > worst_d) {
            worst_d = dist;
            worst = i;
          }
        }
        std::copy(points.row(worst), points.row(worst) + d, centroids.row(c));
        labels[worst] = static_cast<int>(c);
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) centroids(c, j) /= static_cast<double>(counts[c]);
    }
  }

  KmeansResult res;
  res.labels = labels;
  for (std::size_t i = 0; i < n; ++i)
    res.inertia +=
        sq_dist(points.row(i), centroids.row(static_cast<std::size_t>(labels[i])), d);
  return res;
}

}  // namespace clustering_detail

inline KmeansResult kmeans(const Matrix& points, std::size_t k, int restarts,
                           std::uint64_t seed) {
  if (k == 0 || points.rows() == 0) throw ContractError("kmeans: empty problem");
  if (k >= points.rows()) {
    KmeansResult res;
    res.labels.resize(points.rows());
    std::iota(res.labels.begin(), res.labels.end(), 0);
    return res;
  }
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    Rng rng(mix_seed(seed, 0x3ea0ULL + static_cast<std::uint64_t>(r)));
    KmeansResult cur = clustering_detail::kmeans_once(points, k, rng);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Spectral clustering
// ---------------------------------------------------------------------------

struct SpectralOptions {
  int k = 0;                  // 0 = eigengap heuristic
  int kmeans_restarts = 10;
  std::uint64_t seed = 0;
  double prune_threshold = 0.0;  // edges below this weight are removed
};

struct SpectralIntermediates {
  std::vector<double> eigenvalues;  // of the symmetric normalized Laplacian
  Matrix laplacian_sym;
};

/// Graph spectral clustering. The diagonal is zeroed (self-similarity),
/// D_a = sum_b S_ab, L = D - S; the random-walk normalization D^-1 L is
/// computed through its symmetric similar matrix D^-1/2 L D^-1/2 and
/// eigenvectors mapped back through D^-1/2. Rows of the k smallest
/// eigenvectors are clustered with k-means (k-means++ seeding, best of
/// `kmeans_restarts` by inertia). With k = 0 the eigengap over the first
/// min(n, 10) eigenvalues picks the cluster count.
inline ClusterAssignment spectral_cluster(const SimilarityMatrix& sim,
                                          const SpectralOptions& opt = {},
                                          SpectralIntermediates* debug = nullptr) {
  sim.validate_symmetric();
  const std::size_t n = sim.size();
  if (n < 2) throw ContractError("spectral_cluster: need at least 2 segments");

  Matrix w = sim.values;
  for (std::size_t i = 0; i < n; ++i) w(i, i) = 0.0;
  if (opt.prune_threshold > 0.0) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (w(i, j) < opt.prune_threshold) w(i, j) = 0.0;
  }

  std::vector<double> degree(n, 0.0);
  bool floored = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) degree[i] += w(i, j);
    if (degree[i] < 1e-10) {
      degree[i] = 1e-10;
      floored = true;
    }
  }
  if (floored) log_debug("spectral_cluster: isolated node, degree floored at 1e-10");

  // L_sym = I - D^-1/2 W D^-1/2
  Matrix lsym(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double di = 1.0 / std::sqrt(degree[i]);
    for (std::size_t j = 0; j < n; ++j)
      lsym(i, j) = (i == j ? 1.0 : 0.0) - w(i, j) * di / std::sqrt(degree[j]);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (lsym(i, j) + lsym(j, i));
      lsym(i, j) = v;
      lsym(j, i) = v;
    }

  EigenDecomposition eig = jacobi_eigen(lsym);
  if (debug) {
    debug->eigenvalues = eig.eigenvalues;
    debug->laplacian_sym = lsym;
  }

  std::size_t k = static_cast<std::size_t>(opt.k);
  if (opt.k <= 0) {
    const std::size_t probe = std::min<std::size_t>(n, 10);
    double best_gap = -1.0;
    k = 1;
    for (std::size_t i = 0; i + 1 < probe; ++i) {
      const double gap = eig.eigenvalues[i + 1] - eig.eigenvalues[i];
      if (gap > best_gap) {
        best_gap = gap;
        k = i + 1;
      }
    }
  }
  if (k >= n) {
    ClusterAssignment out;
    out.labels.resize(n);
    std::iota(out.labels.begin(), out.labels.end(), 0);
    out.num_clusters = static_cast<int>(n);
    out.threshold = opt.prune_threshold;
    return out;
  }

  // rows of the k smallest random-walk eigenvectors (back-mapped by D^-1/2)
  Matrix p(n, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i)
      p(i, j) = eig.eigenvectors(i, j) / std::sqrt(degree[i]);

  const KmeansResult km = kmeans(p, k, opt.kmeans_restarts, opt.seed);
  ClusterAssignment out = clustering_detail::densify(km.labels, opt.prune_threshold);
  return out;
}

// ---------------------------------------------------------------------------
// Hypothesis assembly
// ---------------------------------------------------------------------------

/// Turns per-segment cluster labels into a speaker annotation. Overlapping
/// neighbours with different labels are cut at the midpoint of the overlap;
/// adjacent same-label spans are merged. Hypothesis speakers are named
/// "c<label>".
inline DiarizationAnnotation labels_to_annotation(const SegmentTable& segments,
                                                  const ClusterAssignment& assignment,
                                                  const std::string& recording_id) {
  if (segments.segments.size() != assignment.labels.size())
    throw ContractError("labels_to_annotation: segment/label count mismatch");

  struct Span {
    long start_ms, end_ms;
    int label;
  };
  std::vector<Span> spans;
  spans.reserve(segments.segments.size());
  for (std::size_t i = 0; i < segments.segments.size(); ++i)
    spans.push_back({std::lround(segments.segments[i].start * 1000.0),
                     std::lround(segments.segments[i].end * 1000.0),
                     assignment.labels[i]});
  std::stable_sort(spans.begin(), spans.end(),
                   [](const Span& a, const Span& b) { return a.start_ms < b.start_ms; });

  for (std::size_t i = 0; i + 1 < spans.size(); ++i) {
    if (spans[i + 1].start_ms < spans[i].end_ms) {
      const long mid = (spans[i + 1].start_ms + spans[i].end_ms) / 2;
      spans[i].end_ms = mid;
      spans[i + 1].start_ms = mid;
    }
  }

  DiarizationAnnotation ann;
  ann.recording_id = recording_id;
  for (const Span& s : spans) {
    if (s.end_ms <= s.start_ms) continue;
    if (!ann.turns.empty() &&
        ann.turns.back().speaker_id == format("c%d", s.label) &&
        std::lround((ann.turns.back().onset + ann.turns.back().duration) * 1000.0) >=
            s.start_ms) {
      const double new_end = s.end_ms / 1000.0;
      ann.turns.back().duration = new_end - ann.turns.back().onset;
    } else {
      ann.turns.push_back(
          SpeakerTurn{format("c%d", s.label), s.start_ms / 1000.0,
                      (s.end_ms - s.start_ms) / 1000.0});
    }
  }
  return ann;
}

}  // namespace diarkit

#endif  // DIARKIT_CLUSTERING_HPP

