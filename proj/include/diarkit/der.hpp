// diarkit/der.hpp
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
// Diarization error rate with md-eval semantics: a no-score collar around
// reference turn boundaries, an exactly-solved one-to-one speaker mapping
// maximizing scored overlap, and miss / false-alarm / speaker-confusion
// decomposition. All arithmetic runs on an integer millisecond timeline.

#ifndef DIARKIT_DER_HPP
#define DIARKIT_DER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "diarkit/audio_io.hpp"
#include "diarkit/common.hpp"

namespace diarkit {

struct DERReport {
  double err_spk = 0.0;   // seconds of speaker confusion
  double err_fas = 0.0;   // seconds of false-alarm speech
  double err_miss = 0.0;  // seconds of missed speech
  double scored_time = 0.0;
  double der_percent = 0.0;
  std::map<std::string, std::string> mapping;  // hypothesis -> reference
};

namespace der_detail {

inline long to_ms(double seconds) { return std::lround(seconds * 1000.0); }

struct MsTurn {
  long start, end;
  int speaker;
};

struct MsAnnotation {
  std::vector<MsTurn> turns;
  std::vector<std::string> speakers;  // index -> id, annotation order
};

inline MsAnnotation to_ms_annotation(const DiarizationAnnotation& ann) {
  MsAnnotation out;
  std::map<std::string, int> index;
  for (const auto& t : ann.turns) {
    auto it = index.find(t.speaker_id);
    if (it == index.end()) {
      it = index.emplace(t.speaker_id, static_cast<int>(out.speakers.size())).first;
      out.speakers.push_back(t.speaker_id);
    }
    out.turns.push_back({to_ms(t.onset), to_ms(t.onset + t.duration), it->second});
  }
  return out;
}

inline std::vector<std::pair<long, long>> merge_intervals(
    std::vector<std::pair<long, long>> v) {
  std::sort(v.begin(), v.end());
  std::vector<std::pair<long, long>> merged;
  for (const auto& iv : v) {
    if (iv.second <= iv.first) continue;
    if (!merged.empty() && iv.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, iv.second);
    else
      merged.push_back(iv);
  }
  return merged;
}

// Exact maximum-weight one-to-one assignment via subset DP over the smaller
// side. Weights are integer milliseconds, scaled so that a lexicographic
// bonus (earlier reference, then earlier hypothesis speaker) breaks ties
// without ever outweighing one millisecond of overlap. Only pairs with
// positive overlap are mappable.
inline std::vector<int> best_assignment(const std::vector<std::vector<long>>& overlap,
                                        std::size_t num_ref, std::size_t num_hyp) {
  const bool hyp_small = num_hyp <= num_ref;
  const std::size_t small = hyp_small ? num_hyp : num_ref;
  const std::size_t large = hyp_small ? num_ref : num_hyp;
  if (small > 16)
    throw ContractError("optimal_mapping: more than 16 speakers on both sides");

  const std::int64_t r_count = static_cast<std::int64_t>(num_ref);
  const std::int64_t h_count = static_cast<std::int64_t>(num_hyp);
  const std::int64_t scale =
      static_cast<std::int64_t>(small) * (r_count + 1) * (h_count + 1) + 1;
  auto weight = [&](std::size_t large_i, std::size_t small_j) -> std::int64_t {
    const std::size_t h = hyp_small ? small_j : large_i;
    const std::size_t r = hyp_small ? large_i : small_j;
    const long ov = overlap[r][h];
    if (ov <= 0) return -1;
    const std::int64_t bonus = (r_count - static_cast<std::int64_t>(r)) * (h_count + 1) +
                               (h_count - static_cast<std::int64_t>(h));
    return static_cast<std::int64_t>(ov) * scale + bonus;
  };

  const std::size_t masks = std::size_t{1} << small;
  constexpr std::int64_t kUnreached = -1;
  std::vector<std::int64_t> prev(masks, kUnreached), cur(masks);
  prev[0] = 0;
  // choice[i][mask]: matched small-side index used to reach layer i+1 at
  // mask, or -1 when item i was skipped on that path
  std::vector<std::vector<std::int8_t>> choice(
      large, std::vector<std::int8_t>(masks, -1));
  for (std::size_t i = 0; i < large; ++i) {
    cur = prev;  // skip item i by default
    for (std::size_t mask = 0; mask < masks; ++mask) {
      if (prev[mask] < 0) continue;
      for (std::size_t j = 0; j < small; ++j) {
        if (mask & (std::size_t{1} << j)) continue;
        const std::int64_t w = weight(i, j);
        if (w < 0) continue;
        const std::size_t m2 = mask | (std::size_t{1} << j);
        if (prev[mask] + w > cur[m2]) {
          cur[m2] = prev[mask] + w;
          choice[i][m2] = static_cast<std::int8_t>(j);
        }
      }
    }
    prev.swap(cur);
  }

  std::size_t mask = 0;
  for (std::size_t m = 1; m < masks; ++m)
    if (prev[m] > prev[mask]) mask = m;

  std::vector<int> match_large(large, -1);
  for (std::size_t i = large; i-- > 0;) {
    const std::int8_t j = choice[i][mask];
    if (j >= 0) {
      match_large[i] = j;
      mask &= ~(std::size_t{1} << static_cast<std::size_t>(j));
    }
  }

  std::vector<int> hyp_to_ref(num_hyp, -1);
  for (std::size_t i = 0; i < large; ++i) {
    if (match_large[i] < 0) continue;
    const std::size_t j = static_cast<std::size_t>(match_large[i]);
    hyp_to_ref[hyp_small ? j : i] = static_cast<int>(hyp_small ? i : j);
  }
  return hyp_to_ref;
}

}  // namespace der_detail

/// No-score exclusions: [boundary - collar, boundary + collar] around every
/// reference turn onset and offset, merged. Times in seconds.
inline std::vector<std::pair<double, double>> apply_collar(
    const DiarizationAnnotation& reference, double collar = 0.25) {
  if (collar < 0.0) throw ContractError("apply_collar: collar must be >= 0");
  if (collar == 0.0) return {};
  std::vector<std::pair<long, long>> raw;
  for (const auto& t : reference.turns) {
    const long on = der_detail::to_ms(t.onset);
    const long off = der_detail::to_ms(t.onset + t.duration);
    const long c = der_detail::to_ms(collar);
    raw.emplace_back(on - c, on + c);
    raw.emplace_back(off - c, off + c);
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [a, b] : der_detail::merge_intervals(std::move(raw)))
    out.emplace_back(a / 1000.0, b / 1000.0);
  return out;
}

/// One-to-one partial mapping hypothesis speaker -> reference speaker
/// maximizing total overlap on the scored (collar-excluded) timeline.
inline std::map<std::string, std::string> optimal_mapping(
    const DiarizationAnnotation& reference, const DiarizationAnnotation& hypothesis,
    double collar = 0.0);

/// DER per Eq.-8 semantics. The timeline is partitioned at every turn and
/// exclusion boundary; each atomic interval outside the exclusions
/// contributes miss / false alarm / speaker error time using md-eval
/// counting, with the scored time T being reference speech time.
inline DERReport compute_der(const DiarizationAnnotation& reference,
                             const DiarizationAnnotation& hypothesis,
                             double collar = 0.25) {
  using der_detail::MsAnnotation;
  reference.validate();
  hypothesis.validate();

  const MsAnnotation ref = der_detail::to_ms_annotation(reference);
  const MsAnnotation hyp = der_detail::to_ms_annotation(hypothesis);

  std::vector<std::pair<long, long>> exclusions;
  if (collar > 0.0) {
    const long c = der_detail::to_ms(collar);
    std::vector<std::pair<long, long>> raw;
    for (const auto& t : ref.turns) {
      raw.emplace_back(t.start - c, t.start + c);
      raw.emplace_back(t.end - c, t.end + c);
    }
    exclusions = der_detail::merge_intervals(std::move(raw));
  } else if (collar < 0.0) {
    throw ContractError("compute_der: collar must be >= 0");
  }

  std::vector<long> boundaries;
  for (const auto& t : ref.turns) {
    boundaries.push_back(t.start);
    boundaries.push_back(t.end);
  }
  for (const auto& t : hyp.turns) {
    boundaries.push_back(t.start);
    boundaries.push_back(t.end);
  }
  for (const auto& [a, b] : exclusions) {
    boundaries.push_back(a);
    boundaries.push_back(b);
  }
  std::sort(boundaries.begin(), boundaries.end());
  boundaries.erase(std::unique(boundaries.begin(), boundaries.end()),
                   boundaries.end());

  auto excluded = [&](long a, long b) {
    for (const auto& [ea, eb] : exclusions)
      if (a >= ea && b <= eb) return true;
    return false;
  };

  const std::size_t num_ref = ref.speakers.size();
  const std::size_t num_hyp = hyp.speakers.size();

  // first pass: scored overlap per (ref, hyp) speaker pair (presence-based,
  // so overlapping same-speaker turns do not double count)
  std::vector<std::vector<long>> overlap(num_ref, std::vector<long>(num_hyp, 0));
  {
    std::vector<char> rp(num_ref), hp(num_hyp);
    for (std::size_t b = 0; b + 1 < boundaries.size(); ++b) {
      const long a = boundaries[b], z = boundaries[b + 1];
      if (excluded(a, z)) continue;
      std::fill(rp.begin(), rp.end(), 0);
      std::fill(hp.begin(), hp.end(), 0);
      for (const auto& t : ref.turns)
        if (t.start <= a && z <= t.end) rp[t.speaker] = 1;
      for (const auto& t : hyp.turns)
        if (t.start <= a && z <= t.end) hp[t.speaker] = 1;
      for (std::size_t r = 0; r < num_ref; ++r) {
        if (!rp[r]) continue;
        for (std::size_t h = 0; h < num_hyp; ++h)
          if (hp[h]) overlap[r][h] += z - a;
      }
    }
  }

  const std::vector<int> hyp_to_ref =
      num_ref && num_hyp ? der_detail::best_assignment(overlap, num_ref, num_hyp)
                         : std::vector<int>(num_hyp, -1);

  // second pass: error accumulation per atomic interval
  long miss_ms = 0, fa_ms = 0, spk_ms = 0, scored_ms = 0;
  std::vector<char> ref_present(num_ref), hyp_present(num_hyp);
  for (std::size_t b = 0; b + 1 < boundaries.size(); ++b) {
    const long a = boundaries[b], z = boundaries[b + 1];
    if (excluded(a, z)) continue;
    std::fill(ref_present.begin(), ref_present.end(), 0);
    std::fill(hyp_present.begin(), hyp_present.end(), 0);
    int n_ref = 0, n_hyp = 0;
    for (const auto& t : ref.turns)
      if (t.start <= a && z <= t.end && !ref_present[t.speaker]) {
        ref_present[t.speaker] = 1;
        ++n_ref;
      }
    for (const auto& t : hyp.turns)
      if (t.start <= a && z <= t.end && !hyp_present[t.speaker]) {
        hyp_present[t.speaker] = 1;
        ++n_hyp;
      }
    if (n_ref == 0 && n_hyp == 0) continue;
    int n_match = 0;
    for (std::size_t h = 0; h < num_hyp; ++h)
      if (hyp_present[h] && hyp_to_ref[h] >= 0 && ref_present[hyp_to_ref[h]])
        ++n_match;
    const long len = z - a;
    scored_ms += static_cast<long>(n_ref) * len;
    miss_ms += static_cast<long>(std::max(0, n_ref - n_hyp)) * len;
    fa_ms += static_cast<long>(std::max(0, n_hyp - n_ref)) * len;
    spk_ms += static_cast<long>(std::min(n_ref, n_hyp) - n_match) * len;
  }

  if (scored_ms == 0)
    throw DataError("compute_der: zero scored reference speech time (undefined DER)");

  DERReport report;
  report.err_miss = miss_ms / 1000.0;
  report.err_fas = fa_ms / 1000.0;
  report.err_spk = spk_ms / 1000.0;
  report.scored_time = scored_ms / 1000.0;
  report.der_percent =
      100.0 * static_cast<double>(miss_ms + fa_ms + spk_ms) / static_cast<double>(scored_ms);
  for (std::size_t h = 0; h < num_hyp; ++h)
    if (hyp_to_ref[h] >= 0)
      report.mapping[hyp.speakers[h]] = ref.speakers[static_cast<std::size_t>(hyp_to_ref[h])];
  return report;
}

inline std::map<std::string, std::string> optimal_mapping(
    const DiarizationAnnotation& reference, const DiarizationAnnotation& hypothesis,
    double collar) {
  return compute_der(reference, hypothesis, collar).mapping;
}

/// Pooled DER across recordings: component seconds are summed before the
/// final ratio (not a mean of per-file percentages).
inline DERReport pool_reports(const std::vector<DERReport>& reports) {
  DERReport total;
  for (const auto& r : reports) {
    total.err_spk += r.err_spk;
    total.err_fas += r.err_fas;
    total.err_miss += r.err_miss;
    total.scored_time += r.scored_time;
  }
  if (total.scored_time <= 0.0)
    throw DataError("pool_reports: zero scored time");
  total.der_percent =
      100.0 * (total.err_spk + total.err_fas + total.err_miss) / total.scored_time;
  return total;
}

}  // namespace diarkit

#endif  // DIARKIT_DER_HPP
