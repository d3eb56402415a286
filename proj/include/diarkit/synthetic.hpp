// diarkit/synthetic.hpp
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

#ifndef DIARKIT_SYNTHETIC_HPP
#define DIARKIT_SYNTHETIC_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "diarkit/audio_io.hpp"
#include "diarkit/common.hpp"

namespace diarkit {

struct SyntheticCorpusOptions {
  int num_speakers = 4;
  int num_recordings = 4;
  double duration = 120.0;      // seconds per recording
  double turn_min = 2.0;        // seconds
  double turn_max = 6.0;        // seconds
  std::uint64_t seed = 0;
  int sample_rate = 16000;
};

struct SyntheticCorpus {
  std::vector<AudioSignal> signals;
  std::vector<DiarizationAnnotation> annotations;
};

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

namespace detail {

// One synthetic voice: a harmonic stack with a speaker-specific fundamental
// and spectral rolloff, shaped by a fixed formant-like envelope shared by
// all speakers, plus low-level noise.
struct Voice {
  double f0 = 0.0;
  double rolloff = 1.0;
  std::vector<double> harmonic_amp;
  std::vector<double> harmonic_phase;
};

inline double formant_envelope(double freq) {
  auto bump = [](double f, double center, double width) {
    const double d = (f - center) / width;
    return std::exp(-0.5 * d * d);
  };
  return 0.2 + bump(freq, 500.0, 150.0) + 0.7 * bump(freq, 1500.0, 250.0) +
         0.4 * bump(freq, 2500.0, 350.0);
}

inline Voice make_voice(int speaker, int num_speakers, int sample_rate, Rng& rng) {
  Voice v;
  // fundamentals evenly spaced over 90-280 Hz so voices never collide
  if (num_speakers > 1)
    v.f0 = 90.0 + (280.0 - 90.0) * speaker / (num_speakers - 1);
  else
    v.f0 = 90.0;
  // per-speaker rolloff exponent varies the spectral envelope
  v.rolloff = 0.5 + 0.25 * (speaker % 5);

  const double max_freq = std::min(4000.0, 0.45 * sample_rate);
  const int num_harmonics = static_cast<int>(max_freq / v.f0);
  v.harmonic_amp.resize(num_harmonics);
  v.harmonic_phase.resize(num_harmonics);
  double peak = 0.0;
  for (int h = 0; h < num_harmonics; ++h) {
    const double freq = v.f0 * (h + 1);
    v.harmonic_amp[h] =
        std::pow(h + 1.0, -v.rolloff) * formant_envelope(freq);
    v.harmonic_phase[h] = rng.uniform(0.0, kTwoPi);
    peak += v.harmonic_amp[h];
  }
  // scale so the worst-case sum of harmonics peaks near 0.3
  if (peak > 0.0)
    for (auto& a : v.harmonic_amp) a *= 0.3 / peak;
  return v;
}

// Splits total_cs centiseconds into turn lengths within [min_cs, max_cs],
// tiling exactly. While the remainder exceeds max_cs, draws are clamped so
// at least min_cs is always left; the final turn takes the remainder.
inline std::vector<long> draw_turn_lengths(long total_cs, long min_cs, long max_cs,
                                           Rng& rng) {
  std::vector<long> lengths;
  long remaining = total_cs;
  while (remaining > max_cs) {
    const long hi = std::min(max_cs, remaining - min_cs);
    lengths.push_back(rng.uniform_int(min_cs, hi));
    remaining -= lengths.back();
  }
  lengths.push_back(remaining);
  return lengths;
}

}  // namespace detail

/// Generates a deterministic labelled corpus of alternating-speaker
/// conversations. Turns tile [0, duration] with no gaps or overlaps and the
/// annotation matches the rendered signal exactly; samples land on the
/// int16 grid so a WAV round trip is lossless.
inline SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusOptions& opt) {
  if (opt.num_speakers < 2)
    throw ValidationError("synthetic corpus: need at least 2 speakers");
  if (opt.num_recordings < 1)
    throw ValidationError("synthetic corpus: need at least 1 recording");
  if (opt.duration <= 0.0)
    throw ValidationError("synthetic corpus: duration must be positive");
  if (opt.turn_min <= 0.0 || opt.turn_max < opt.turn_min)
    throw ValidationError("synthetic corpus: invalid turn length range");
  if (opt.turn_min > opt.duration)
    throw ValidationError(
        "synthetic corpus: turn length range longer than recording duration");
  if (opt.sample_rate <= 0)
    throw ValidationError("synthetic corpus: invalid sample rate");

  const long min_cs = std::lround(opt.turn_min * 100.0);
  const long max_cs = std::lround(opt.turn_max * 100.0);
  const long total_cs = std::lround(opt.duration * 100.0);

  Rng voice_rng(mix_seed(opt.seed, 0xb0ceULL));
  std::vector<detail::Voice> voices;
  voices.reserve(opt.num_speakers);
  for (int s = 0; s < opt.num_speakers; ++s)
    voices.push_back(
        detail::make_voice(s, opt.num_speakers, opt.sample_rate, voice_rng));

  SyntheticCorpus corpus;
  for (int r = 0; r < opt.num_recordings; ++r) {
    Rng rng(mix_seed(opt.seed, 0x1000ULL + static_cast<std::uint64_t>(r)));
    const std::string rec_id = format("rec%03d", r);

    const auto lengths = detail::draw_turn_lengths(total_cs, min_cs, max_cs, rng);

    // round-robin over a seeded speaker permutation; adjacent turns always
    // differ because num_speakers >= 2
    std::vector<int> order(opt.num_speakers);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    DiarizationAnnotation ann;
    ann.recording_id = rec_id;
    long cursor_cs = 0;
    for (std::size_t t = 0; t < lengths.size(); ++t) {
      const int spk = order[t % order.size()];
      ann.turns.push_back(SpeakerTurn{format("spk%d", spk), cursor_cs / 100.0,
                                      lengths[t] / 100.0});
      cursor_cs += lengths[t];
    }

    AudioSignal sig;
    sig.recording_id = rec_id;
    sig.sample_rate = opt.sample_rate;
    const std::size_t total_samples = static_cast<std::size_t>(
        (total_cs * static_cast<long>(opt.sample_rate)) / 100);
    sig.samples.resize(total_samples, 0.0f);

    const double dt = 1.0 / opt.sample_rate;
    const double fade = 0.005;  // 5 ms raised-cosine edges
    std::size_t sample_cursor = 0;
    for (std::size_t t = 0; t < lengths.size(); ++t) {
      const int spk = order[t % order.size()];
      const detail::Voice& v = voices[spk];
      const std::size_t turn_samples = static_cast<std::size_t>(
          (lengths[t] * static_cast<long>(opt.sample_rate)) / 100);
      const double turn_dur = lengths[t] / 100.0;
      for (std::size_t i = 0; i < turn_samples && sample_cursor + i < total_samples;
           ++i) {
        const double tt = i * dt;
        double x = 0.0;
        for (std::size_t h = 0; h < v.harmonic_amp.size(); ++h)
          x += v.harmonic_amp[h] *
               std::sin(kTwoPi * v.f0 * (h + 1) * tt + v.harmonic_phase[h]);
        x += 0.002 * rng.gaussian();
        double gain = 1.0;
        if (tt < fade)
          gain = 0.5 - 0.5 * std::cos(kTwoPi * 0.5 * tt / fade);
        else if (turn_dur - tt < fade)
          gain = 0.5 - 0.5 * std::cos(kTwoPi * 0.5 * (turn_dur - tt) / fade);
        x *= gain;
        // quantize onto the int16 grid
        const long q =
            std::clamp(std::lround(x * 32768.0), -32768L, 32767L);
        sig.samples[sample_cursor + i] = static_cast<float>(q) / 32768.0f;
      }
      sample_cursor += turn_samples;
    }

    corpus.signals.push_back(std::move(sig));
    corpus.annotations.push_back(std::move(ann));
  }
  return corpus;
}

inline SyntheticCorpus generate_synthetic_corpus(int num_speakers, int num_recordings,
                                                 double duration, double turn_min,
                                                 double turn_max, std::uint64_t seed) {
  SyntheticCorpusOptions opt;
  opt.num_speakers = num_speakers;
  opt.num_recordings = num_recordings;
  opt.duration = duration;
  opt.turn_min = turn_min;
  opt.turn_max = turn_max;
  opt.seed = seed;
  return generate_synthetic_corpus(opt);
}

}  // namespace diarkit

#endif  // DIARKIT_SYNTHETIC_HPP
