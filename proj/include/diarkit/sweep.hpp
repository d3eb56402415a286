// diarkit/sweep.hpp
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

#ifndef DIARKIT_SWEEP_HPP
#define DIARKIT_SWEEP_HPP

#include <cmath>
#include <string>
#include <vector>

#include "diarkit/clustering.hpp"
#include "diarkit/common.hpp"
#include "diarkit/der.hpp"
#include "diarkit/similarity.hpp"
#include "diarkit/vad.hpp"

namespace diarkit {

enum class Clusterer { kAhc, kSpectral };

struct SweepRow {
  double threshold = 0.0;
  double der_percent = 0.0;
};

struct SweepResult {
  double best_threshold = 0.0;
  double best_der = 0.0;
  std::vector<SweepRow> table;
};

struct SweepCase {
  const SimilarityMatrix* similarity = nullptr;
  const SegmentTable* segments = nullptr;
  const DiarizationAnnotation* reference = nullptr;
  std::string recording_id;
};

inline std::vector<double> threshold_grid(double lo, double hi, double step) {
  if (step <= 0.0 || hi < lo) throw ContractError("sweep: empty threshold range");
  std::vector<double> out;
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) out.push_back(lo + i * step);
  return out;
}

inline ClusterAssignment cluster_at(const SimilarityMatrix& sim, Clusterer method,
                                    double threshold, const SpectralOptions& sc_opts) {
  if (method == Clusterer::kAhc) return ahc(sim, threshold);
  SpectralOptions opts = sc_opts;
  opts.prune_threshold = threshold;
  return spectral_cluster(sim, opts);
}

/// Clusters every case at every threshold in [lo, hi] (inclusive, fixed
/// step), scores pooled DER against the references and returns the argmin
/// with the full table. Ties go to the smallest threshold. For AHC the
/// threshold is the merge stopping value; for spectral clustering it is the
/// edge-pruning weight.
inline SweepResult sweep_thresholds(const std::vector<SweepCase>& cases,
                                    Clusterer method, double lo, double hi,
                                    double step, double collar,
                                    const SpectralOptions& sc_opts = {},
                                    int jobs = 1) {
  if (cases.empty()) throw ContractError("sweep: no cases");
  for (const auto& c : cases)
    if (!c.similarity || !c.segments || !c.reference)
      throw ContractError("sweep: incomplete case");

  const std::vector<double> grid = threshold_grid(lo, hi, step);
  std::vector<double> ders(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t gi) {
    std::vector<DERReport> reports;
    reports.reserve(cases.size());
    for (const auto& c : cases) {
      const ClusterAssignment labels =
          cluster_at(*c.similarity, method, grid[gi], sc_opts);
      const DiarizationAnnotation hyp =
          labels_to_annotation(*c.segments, labels, c.recording_id);
      reports.push_back(compute_der(*c.reference, hyp, collar));
    }
    ders[gi] = pool_reports(reports).der_percent;
  });

  SweepResult result;
  result.table.reserve(grid.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    result.table.push_back({grid[i], ders[i]});
    if (ders[i] < ders[best]) best = i;  // strict: ties keep the smaller threshold
  }
  result.best_threshold = grid[best];
  result.best_der = ders[best];
  return result;
}

/// Single-matrix convenience wrapper.
inline SweepResult sweep_thresholds(const SimilarityMatrix& similarity,
                                    const SegmentTable& segments,
                                    const DiarizationAnnotation& reference,
                                    Clusterer method, double lo, double hi,
                                    double step, double collar = 0.25,
                                    const SpectralOptions& sc_opts = {}) {
  SweepCase c;
  c.similarity = &similarity;
  c.segments = &segments;
  c.reference = &reference;
  c.recording_id = reference.recording_id;
  return sweep_thresholds({c}, method, lo, hi, step, collar, sc_opts);
}

}  // namespace diarkit

#endif  // DIARKIT_SWEEP_HPP
