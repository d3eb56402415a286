// diarkit/vad.hpp
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

#ifndef DIARKIT_VAD_HPP
#define DIARKIT_VAD_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "diarkit/audio_io.hpp"
#include "diarkit/common.hpp"
#include "diarkit/features.hpp"

namespace diarkit {

struct VadOptions {
  double threshold_offset = 5.5;
  double mean_scale = 0.5;
  int context = 5;          // frames of smoothing on each side
  double proportion = 0.6;  // fraction of the context window that must be loud
};

using VadDecision = std::vector<bool>;

struct Segment {
  std::string utterance_id;
  std::string recording_id;
  double start = 0.0;
  double end = 0.0;
};

struct SegmentTable {
  std::vector<Segment> segments;
  double window = 0.0;
  double period = 0.0;
};

/// Energy VAD on the log-energy column (C0). Frame t is speech iff, within
/// +/- context frames, the fraction of frames whose C0 exceeds
/// threshold_offset + mean_scale * mean(C0) is at least `proportion`.
inline VadDecision energy_vad(const FeatureMatrix& features, const VadOptions& opt) {
  const std::size_t t = features.num_frames();
  VadDecision decision(t, false);
  if (t == 0) return decision;
  if (features.dim() == 0) throw ContractError("energy_vad: features have no columns");
  if (opt.context < 0) throw ContractError("energy_vad: negative context");

  double mean_energy = 0.0;
  for (std::size_t r = 0; r < t; ++r) mean_energy += features.values(r, 0);
  mean_energy /= static_cast<double>(t);
  const double threshold = opt.threshold_offset + opt.mean_scale * mean_energy;

  std::vector<bool> loud(t);
  for (std::size_t r = 0; r < t; ++r) loud[r] = features.values(r, 0) > threshold;

  for (std::size_t r = 0; r < t; ++r) {
    const long lo = std::max<long>(0, static_cast<long>(r) - opt.context);
    const long hi = std::min<long>(static_cast<long>(t) - 1,
                                   static_cast<long>(r) + opt.context);
    int count = 0;
    for (long k = lo; k <= hi; ++k) count += loud[static_cast<std::size_t>(k)] ? 1 : 0;
    decision[r] =
        static_cast<double>(count) >= opt.proportion * static_cast<double>(hi - lo + 1);
  }
  return decision;
}

/// Maximal runs of speech frames converted to second spans; runs shorter
/// than min_duration are dropped. Frame t covers [t*shift, (t+1)*shift).
inline std::vector<std::pair<double, double>> speech_regions(const VadDecision& vad,
                                                             double frame_shift_ms,
                                                             double min_duration = 0.0) {
  std::vector<std::pair<double, double>> regions;
  const double shift = frame_shift_ms / 1000.0;
  std::size_t i = 0;
  while (i < vad.size()) {
    if (!vad[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < vad.size() && vad[j]) ++j;
    const double start = static_cast<double>(i) * shift;
    const double end = static_cast<double>(j) * shift;
    if (end - start >= min_duration) regions.emplace_back(start, end);
    i = j;
  }
  return regions;
}

namespace detail {

inline std::string utt_id(const std::string& rec, double start, double end) {
  // centisecond zero-padded span, e.g. rec1-0000-0300
  const long s = std::lround(start * 100.0);
  const long e = std::lround(end * 100.0);
  return format("%s-%04ld-%04ld", rec.c_str(), s, e);
}

}  // namespace detail

/// Uniform segmentation of speech regions: windows start every `period`
/// while they fit; a leftover tail of at least min_tail gets one final
/// window anchored to the region end.
inline SegmentTable uniform_segments(
    const std::vector<std::pair<double, double>>& regions,
    const std::string& recording_id, double window, double period,
    double min_tail = 0.5) {
  if (period <= 0.0 || window < period)
    throw ContractError("uniform_segments: need window >= period > 0");

  SegmentTable table;
  table.window = window;
  table.period = period;
  for (const auto& [region_start, region_end] : regions) {
    double last_end = -1.0;
    int k = 0;
    for (;; ++k) {
      const double start = region_start + k * period;
      if (start + window > region_end + 1e-9) break;
      const double end = start + window;
      table.segments.push_back(Segment{detail::utt_id(recording_id, start, end),
                                       recording_id, start, end});
      last_end = end;
    }
    // tail rule: only when no emitted window already ends at the region end
    if (std::fabs(last_end - region_end) > 1e-9) {
      const double tail_start = region_start + k * period;
      if (region_end - tail_start >= min_tail - 1e-9) {
        const double start = std::max(region_start, region_end - window);
        table.segments.push_back(Segment{
            detail::utt_id(recording_id, start, region_end), recording_id, start,
            region_end});
      }
    }
  }
  return table;
}

/// Splits every turn longer than `chunk` seconds into consecutive sub-turns
/// of at most that length. Split sub-turns get "#<index>" appended to the
/// speaker id as training bookkeeping; unsplit turns pass through unchanged.
inline DiarizationAnnotation chunk_speakers(const DiarizationAnnotation& annotation,
                                            double chunk = 30.0) {
  if (chunk <= 0.0) throw ContractError("chunk_speakers: chunk must be positive");
  DiarizationAnnotation out;
  out.recording_id = annotation.recording_id;
  for (const auto& turn : annotation.turns) {
    if (turn.duration <= chunk) {
      out.turns.push_back(turn);
      continue;
    }
    const int num_sub = static_cast<int>(std::ceil(turn.duration / chunk - 1e-12));
    for (int index = 0; index < num_sub; ++index) {
      const double onset = turn.onset + index * chunk;
      const double len =
          index + 1 < num_sub ? chunk : turn.duration - (num_sub - 1) * chunk;
      out.turns.push_back(SpeakerTurn{format("%s#%d", turn.speaker_id.c_str(), index),
                                      onset, len});
    }
  }
  return out;
}

/// Strips the chunk_speakers bookkeeping suffix.
inline std::string base_speaker(const std::string& speaker_id) {
  const auto pos = speaker_id.rfind('#');
  return pos == std::string::npos ? speaker_id : speaker_id.substr(0, pos);
}

}  // namespace diarkit

#endif  // DIARKIT_VAD_HPP
