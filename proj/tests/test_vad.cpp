// tests/test_vad.cpp
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

#include <catch2/catch_amalgamated.hpp>

#include "diarkit/vad.hpp"
#include "support.hpp"

using namespace diarkit;

namespace {

FeatureMatrix energies(const std::vector<double>& c0) {
  FeatureMatrix f;
  f.values = Matrix(c0.size(), 2);
  for (std::size_t t = 0; t < c0.size(); ++t) f.values(t, 0) = c0[t];
  return f;
}

}  // namespace

TEST_CASE("energy vad on constant silence is all false", "[vad]") {
  const double floor_log = std::log(1e-10);
  const FeatureMatrix f = energies(std::vector<double>(50, floor_log));
  VadOptions opt;  // threshold_offset 5.5 > 0
  const VadDecision d = energy_vad(f, opt);
  for (bool b : d) CHECK_FALSE(b);
}

TEST_CASE("energy vad marks a loud span with context smoothing", "[vad]") {
  // quiet floor at 0, loud tone at 10, frames 20..39 loud
  std::vector<double> c0(60, 0.0);
  for (int t = 20; t < 40; ++t) c0[static_cast<std::size_t>(t)] = 10.0;
  VadOptions opt;
  opt.threshold_offset = 1.0;
  opt.mean_scale = 0.5;
  opt.context = 2;
  opt.proportion = 0.6;
  const VadDecision d = energy_vad(energies(c0), opt);

  // direct evaluation of the contract on the constructed sequence
  const double mean = (20.0 * 10.0) / 60.0;
  const double threshold = 1.0 + 0.5 * mean;
  for (std::size_t t = 0; t < 60; ++t) {
    const long lo = std::max<long>(0, static_cast<long>(t) - 2);
    const long hi = std::min<long>(59, static_cast<long>(t) + 2);
    int count = 0;
    for (long k = lo; k <= hi; ++k)
      if (c0[static_cast<std::size_t>(k)] > threshold) ++count;
    const bool expected = count >= 0.6 * static_cast<double>(hi - lo + 1);
    CHECK(d[t] == expected);
  }
  // the core of the tone is detected, far-away silence is not
  CHECK(d[30]);
  CHECK_FALSE(d[5]);
}

TEST_CASE("energy vad with very negative offset accepts everything", "[vad]") {
  Rng rng(3);
  std::vector<double> c0(40);
  for (auto& v : c0) v = rng.uniform(-5.0, 5.0);
  VadOptions opt;
  opt.threshold_offset = -1e9;
  opt.mean_scale = 0.0;
  const VadDecision d = energy_vad(energies(c0), opt);
  for (bool b : d) CHECK(b);
}

TEST_CASE("energy vad empty input", "[vad]") {
  FeatureMatrix f;
  f.values = Matrix(0, 2);
  CHECK(energy_vad(f, VadOptions{}).empty());
}

TEST_CASE("speech regions from flag runs", "[vad]") {
  const VadDecision flags = {false, true, true, true, false};
  const auto regions = speech_regions(flags, 10.0, 0.0);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].first == Catch::Approx(0.01));
  CHECK(regions[0].second == Catch::Approx(0.04));

  CHECK(speech_regions(VadDecision(10, false), 10.0).empty());

  const auto full = speech_regions(VadDecision(25, true), 10.0);
  REQUIRE(full.size() == 1);
  CHECK(full[0].first == 0.0);
  CHECK(full[0].second == Catch::Approx(0.25));

  // short runs dropped by min_duration
  const VadDecision blip = {false, true, false, true, true, true, true, true};
  const auto kept = speech_regions(blip, 10.0, 0.03);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].first == Catch::Approx(0.03));
}

TEST_CASE("uniform segments enumeration", "[vad]") {
  const auto table = uniform_segments({{0.0, 10.0}}, "rec1", 3.0, 1.0, 0.5);
  REQUIRE(table.segments.size() == 8);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(table.segments[k].start == Catch::Approx(static_cast<double>(k)));
    CHECK(table.segments[k].end == Catch::Approx(static_cast<double>(k) + 3.0));
  }
  CHECK(table.segments[0].utterance_id == "rec1-0000-0300");
  CHECK(table.segments[7].utterance_id == "rec1-0700-1000");
}

TEST_CASE("uniform segments exact fit and tiny region", "[vad]") {
  const auto exact = uniform_segments({{0.0, 3.0}}, "r", 3.0, 1.0, 0.5);
  REQUIRE(exact.segments.size() == 1);
  CHECK(exact.segments[0].start == 0.0);
  CHECK(exact.segments[0].end == Catch::Approx(3.0));

  const auto tiny = uniform_segments({{0.0, 0.3}}, "r", 3.0, 1.0, 0.5);
  CHECK(tiny.segments.empty());
}

TEST_CASE("uniform segments tail rule", "[vad]") {
  // region (0, 4.6), window 3, period 1: full windows [0,3],[1,4]; tail 1.6s
  // gets a final window anchored at the region end
  const auto table = uniform_segments({{0.0, 4.6}}, "r", 3.0, 1.0, 0.5);
  REQUIRE(table.segments.size() == 3);
  CHECK(table.segments[2].start == Catch::Approx(1.6));
  CHECK(table.segments[2].end == Catch::Approx(4.6));

  // region shorter than the window but >= min_tail: single clamped segment
  const auto shorty = uniform_segments({{2.0, 3.5}}, "r", 3.0, 1.0, 0.5);
  REQUIRE(shorty.segments.size() == 1);
  CHECK(shorty.segments[0].start == Catch::Approx(2.0));
  CHECK(shorty.segments[0].end == Catch::Approx(3.5));
}

TEST_CASE("uniform segment count closed form over random regions", "[vad]") {
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const double len = rng.uniform(0.1, 30.0);
    const double window = 3.0, period = 1.0, min_tail = 0.5;
    const auto table = uniform_segments({{0.0, len}}, "r", window, period, min_tail);
    std::size_t expected = 0;
    if (len + 1e-9 >= window)
      expected = 1 + static_cast<std::size_t>(std::floor((len - window) / period + 1e-9));
    // tail segment: leftover not exactly covered and at least min_tail long
    const double covered =
        expected == 0 ? 0.0 : (static_cast<double>(expected - 1) * period + window);
    const bool exact_end = expected > 0 && std::fabs(covered - len) <= 1e-9;
    const double tail_start = expected == 0 ? 0.0 : static_cast<double>(expected) * period;
    if (!exact_end && len - tail_start >= min_tail - 1e-9) ++expected;

    CHECK(table.segments.size() == expected);
    for (const auto& s : table.segments) {
      CHECK(s.start >= -1e-9);
      CHECK(s.end <= len + 1e-9);  // no boundary leakage
      CHECK(s.end > s.start);
    }
  }
}

TEST_CASE("chunk speakers splits long turns", "[vad]") {
  DiarizationAnnotation ann;
  ann.recording_id = "r";
  ann.turns = {{"spkA", 0.0, 75.0}, {"spkB", 75.0, 10.0}};
  const DiarizationAnnotation out = chunk_speakers(ann, 30.0);
  REQUIRE(out.turns.size() == 4);
  CHECK(out.turns[0].speaker_id == "spkA#0");
  CHECK(out.turns[0].duration == Catch::Approx(30.0));
  CHECK(out.turns[1].speaker_id == "spkA#1");
  CHECK(out.turns[1].duration == Catch::Approx(30.0));
  CHECK(out.turns[2].speaker_id == "spkA#2");
  CHECK(out.turns[2].duration == Catch::Approx(15.0));
  // short turn passes through unchanged
  CHECK(out.turns[3].speaker_id == "spkB");
  CHECK(out.turns[3].duration == Catch::Approx(10.0));

  CHECK(base_speaker("spkA#2") == "spkA");
  CHECK(base_speaker("spkB") == "spkB");
}

TEST_CASE("chunk speakers preserves duration on random inputs", "[vad]") {
  Rng rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    DiarizationAnnotation ann;
    ann.recording_id = "r";
    double onset = 0.0;
    double total = 0.0;
    for (int t = 0; t < 6; ++t) {
      const double dur = rng.uniform(0.5, 90.0);
      ann.turns.push_back({format("s%d", t % 3), onset, dur});
      onset += dur;
      total += dur;
    }
    const auto out = chunk_speakers(ann, 30.0);
    double sum = 0.0;
    for (const auto& t : out.turns) {
      CHECK(t.duration <= 30.0 + 1e-9);
      sum += t.duration;
    }
    CHECK(sum == Catch::Approx(total).margin(1e-9));
  }
}

TEST_CASE("vad decisions away from the junction survive appended silence",
          "[vad]") {
  // with mean_scale = 0 the threshold is a constant, so appending silence
  // can only affect frames whose smoothing window reaches the appended
  // region (the last `context` frames)
  Rng rng(42);
  std::vector<double> c0(80);
  for (auto& v : c0) v = rng.uniform(-1.0, 3.0);
  VadOptions opt;
  opt.threshold_offset = 1.0;
  opt.mean_scale = 0.0;
  opt.context = 5;

  FeatureMatrix base;
  base.values = Matrix(80, 1);
  for (std::size_t t = 0; t < 80; ++t) base.values(t, 0) = c0[t];
  FeatureMatrix padded;
  padded.values = Matrix(110, 1, std::log(1e-10));
  for (std::size_t t = 0; t < 80; ++t) padded.values(t, 0) = c0[t];

  const VadDecision a = energy_vad(base, opt);
  const VadDecision b = energy_vad(padded, opt);
  for (std::size_t t = 0; t + 5 < 80; ++t) CHECK(a[t] == b[t]);
}
