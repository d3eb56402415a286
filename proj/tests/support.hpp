// tests/support.hpp
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
//
// Shared test fixtures and the independent oracles the test suites check
// the implementations against. Everything here recomputes results from
// first principles and stays off the library's fast paths.

#ifndef DIARKIT_TESTS_SUPPORT_HPP
#define DIARKIT_TESTS_SUPPORT_HPP

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "diarkit/audio_io.hpp"
#include "diarkit/common.hpp"
#include "diarkit/matrix.hpp"
#include "diarkit/nnet.hpp"
#include "diarkit/similarity.hpp"

namespace diarkit::test {

// A fixed random linear functional of the output, scaled small so that the
// finite-difference noise floor sits far below both real gradient
// magnitudes and the checker's 1e-8 denominator floor.
inline LossFn probe_loss(std::uint64_t seed, double scale = 1e-5) {
  return [seed, scale](const Matrix& out) {
    Rng r(mix_seed(seed, 0x9d0beULL));
    Matrix g(out.rows(), out.cols());
    double l = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      g.data()[i] = scale * r.uniform(-1.0, 1.0);
      l += g.data()[i] * out.data()[i];
    }
    return std::make_pair(l, g);
  };
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                            double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("diarkit_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Brute-force DER oracle: enumerate every injective partial speaker mapping
// and integrate errors per millisecond.
// ---------------------------------------------------------------------------

struct DerOracleResult {
  long miss_ms = 0, fa_ms = 0, spk_ms = 0, scored_ms = 0;
};

inline DerOracleResult der_oracle(const DiarizationAnnotation& ref,
                                  const DiarizationAnnotation& hyp, double collar) {
  auto ms = [](double s) { return std::lround(s * 1000.0); };

  std::vector<std::string> ref_spk, hyp_spk;
  for (const auto& t : ref.turns)
    if (std::find(ref_spk.begin(), ref_spk.end(), t.speaker_id) == ref_spk.end())
      ref_spk.push_back(t.speaker_id);
  for (const auto& t : hyp.turns)
    if (std::find(hyp_spk.begin(), hyp_spk.end(), t.speaker_id) == hyp_spk.end())
      hyp_spk.push_back(t.speaker_id);

  long t_min = 0, t_max = 0;
  for (const auto& t : ref.turns) {
    t_min = std::min(t_min, ms(t.onset));
    t_max = std::max(t_max, ms(t.offset()));
  }
  for (const auto& t : hyp.turns) {
    t_min = std::min(t_min, ms(t.onset));
    t_max = std::max(t_max, ms(t.offset()));
  }
  const long collar_ms = ms(collar);
  t_min -= collar_ms + 1;
  t_max += collar_ms + 1;
  const std::size_t len = static_cast<std::size_t>(t_max - t_min);

  std::vector<char> excl(len, 0);
  for (const auto& t : ref.turns)
    for (long b : {ms(t.onset), ms(t.offset())})
      for (long x = b - collar_ms; x < b + collar_ms; ++x)
        excl[static_cast<std::size_t>(x - t_min)] = 1;

  // per-ms speaker presence bitmasks
  std::vector<std::uint32_t> ref_at(len, 0), hyp_at(len, 0);
  for (const auto& t : ref.turns) {
    const std::uint32_t bit =
        1u << (std::find(ref_spk.begin(), ref_spk.end(), t.speaker_id) -
               ref_spk.begin());
    for (long x = ms(t.onset); x < ms(t.offset()); ++x)
      ref_at[static_cast<std::size_t>(x - t_min)] |= bit;
  }
  for (const auto& t : hyp.turns) {
    const std::uint32_t bit =
        1u << (std::find(hyp_spk.begin(), hyp_spk.end(), t.speaker_id) -
               hyp_spk.begin());
    for (long x = ms(t.onset); x < ms(t.offset()); ++x)
      hyp_at[static_cast<std::size_t>(x - t_min)] |= bit;
  }

  // enumerate injective partial mappings hyp index -> ref index or -1
  std::vector<int> mapping(hyp_spk.size(), -1);
  DerOracleResult best;
  best.spk_ms = -1;

  auto evaluate = [&]() {
    DerOracleResult r;
    for (std::size_t x = 0; x < len; ++x) {
      if (excl[x]) continue;
      const int n_ref = __builtin_popcount(ref_at[x]);
      const int n_hyp = __builtin_popcount(hyp_at[x]);
      if (n_ref == 0 && n_hyp == 0) continue;
      int n_match = 0;
      for (std::size_t h = 0; h < hyp_spk.size(); ++h)
        if ((hyp_at[x] & (1u << h)) && mapping[h] >= 0 &&
            (ref_at[x] & (1u << mapping[h])))
          ++n_match;
      r.scored_ms += n_ref;
      r.miss_ms += std::max(0, n_ref - n_hyp);
      r.fa_ms += std::max(0, n_hyp - n_ref);
      r.spk_ms += std::min(n_ref, n_hyp) - n_match;
    }
    if (best.spk_ms < 0 || r.spk_ms < best.spk_ms) best = r;
  };

  std::function<void(std::size_t, std::uint32_t)> recurse =
      [&](std::size_t h, std::uint32_t used) {
        if (h == hyp_spk.size()) {
          evaluate();
          return;
        }
        mapping[h] = -1;
        recurse(h + 1, used);
        for (std::size_t r = 0; r < ref_spk.size(); ++r) {
          if (used & (1u << r)) continue;
          mapping[h] = static_cast<int>(r);
          recurse(h + 1, used | (1u << r));
        }
        mapping[h] = -1;
      };
  if (hyp_spk.empty())
    evaluate();
  else
    recurse(0, 0);
  return best;
}

// Random small annotation pair on a millisecond grid.
inline std::pair<DiarizationAnnotation, DiarizationAnnotation> random_der_case(
    Rng& rng) {
  auto gen = [&](const char* prefix, int max_speakers,
                 int max_turns) {
    DiarizationAnnotation ann;
    ann.recording_id = "rec";
    const int speakers = static_cast<int>(rng.uniform_int(1, max_speakers));
    const int turns = static_cast<int>(rng.uniform_int(1, max_turns));
    for (int t = 0; t < turns; ++t) {
      const long onset = rng.uniform_int(0, 9000);
      const long dur = rng.uniform_int(50, 4000);
      ann.turns.push_back(SpeakerTurn{
          format("%s%ld", prefix, rng.uniform_int(0, speakers - 1)),
          onset / 1000.0, dur / 1000.0});
    }
    ann.normalize();
    return ann;
  };
  return {gen("r", 4, 8), gen("h", 4, 8)};
}

// ---------------------------------------------------------------------------
// Naive AHC oracle: recompute every inter-cluster average from scratch,
// greedy max with lexicographic (min member) tie-break, merge into the
// cluster with the smaller minimum member.
// ---------------------------------------------------------------------------

inline std::vector<int> ahc_oracle(const Matrix& s, double threshold) {
  const std::size_t n = s.rows();
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};

  auto average = [&](const std::vector<std::size_t>& a,
                     const std::vector<std::size_t>& b) {
    double sum = 0.0;
    for (std::size_t i : a)
      for (std::size_t j : b) sum += s(i, j);
    return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  };

  while (clusters.size() > 1) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j)
        if (average(clusters[i], clusters[j]) > best) {
          best = average(clusters[i], clusters[j]);
          bi = i;
          bj = j;
        }
    if (!(best >= threshold)) break;
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    std::sort(clusters[bi].begin(), clusters[bi].end());
    clusters.erase(clusters.begin() + static_cast<long>(bj));
    // keep clusters ordered by minimum member so indices mirror merge slots
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
  }

  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  std::vector<int> labels(n, -1);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (std::size_t member : clusters[c]) labels[member] = static_cast<int>(c);
  return labels;
}

// Random block-diagonal Boolean similarity matrix from a random partition.
struct BlockCase {
  SimilarityMatrix sim;
  std::vector<int> truth;
  int num_blocks = 0;
};

inline BlockCase random_block_case(std::size_t n, Rng& rng, int min_block = 1) {
  BlockCase bc;
  const int max_blocks =
      std::max(1, static_cast<int>(n) / std::max(1, min_block));
  const int k = static_cast<int>(rng.uniform_int(1, std::min<int>(8, max_blocks)));
  std::vector<int> truth(n);
  for (;;) {
    for (auto& t : truth) t = static_cast<int>(rng.uniform_int(0, k - 1));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int t : truth) ++counts[static_cast<std::size_t>(t)];
    bool ok = true;
    for (int c : counts) ok = ok && c >= min_block;
    if (ok) break;
  }
  bc.truth = truth;
  bc.num_blocks = k;
  bc.sim.values = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      bc.sim.values(i, j) = truth[i] == truth[j] ? 1.0 : 0.0;
  bc.sim.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) bc.sim.ids[i] = format("seg%zu", i);
  return bc;
}

// label vectors describe the same partition
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (fwd.count(a[i]) && fwd[a[i]] != b[i]) return false;
    if (bwd.count(b[i]) && bwd[b[i]] != a[i]) return false;
    fwd[a[i]] = b[i];
    bwd[b[i]] = a[i];
  }
  return true;
}

}  // namespace diarkit::test

#endif  // DIARKIT_TESTS_SUPPORT_HPP
