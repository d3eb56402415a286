// tests/test_audio_io.cpp
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

#include <fstream>

#include "diarkit/audio_io.hpp"
#include "diarkit/synthetic.hpp"
#include "support.hpp"

using namespace diarkit;

namespace {

std::string write_text(const std::filesystem::path& dir, const std::string& name,
                       const std::string& content) {
  const std::string path = (dir / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("wav round trip and scaling", "[audio_io]") {
  const auto dir = test::temp_dir("wav");
  AudioSignal sig;
  sig.sample_rate = 16000;
  sig.recording_id = "r";
  sig.samples.resize(16000);
  Rng rng(5);
  for (auto& s : sig.samples)
    s = static_cast<float>(rng.uniform_int(-32768, 32767)) / 32768.0f;

  const std::string path = (dir / "a.wav").string();
  write_wav(path, sig);
  const AudioSignal back = read_wav(path, "r");

  CHECK(back.sample_rate == 16000);
  // sample count follows from the data chunk size alone
  CHECK(back.samples.size() == 16000);
  REQUIRE(back.samples == sig.samples);
}

TEST_CASE("wav sample scaling is v/32768", "[audio_io]") {
  const auto dir = test::temp_dir("wavscale");
  AudioSignal sig;
  sig.sample_rate = 8000;
  sig.samples = {32767.0f / 32768.0f, -1.0f, 0.0f};
  const std::string path = (dir / "b.wav").string();
  write_wav(path, sig);
  const AudioSignal back = read_wav(path);
  CHECK(back.samples[0] == Catch::Approx(32767.0 / 32768.0).epsilon(1e-9));
  CHECK(back.samples[1] == -1.0f);
  CHECK(back.samples[2] == 0.0f);
}

TEST_CASE("wav reader rejects malformed input", "[audio_io]") {
  const auto dir = test::temp_dir("wavbad");
  const std::string garbage = write_text(dir, "g.wav", "definitely not a wav");
  CHECK_THROWS_AS(read_wav(garbage), FormatError);

  // truncated data chunk
  AudioSignal sig;
  sig.sample_rate = 16000;
  sig.samples.assign(100, 0.25f);
  const std::string path = (dir / "t.wav").string();
  write_wav(path, sig);
  std::filesystem::resize_file(path, 44 + 50);
  CHECK_THROWS_AS(read_wav(path), FormatError);
}

TEST_CASE("wav reader rejects stereo and non-pcm", "[audio_io]") {
  const auto dir = test::temp_dir("wavch");
  // hand-build a stereo header
  std::string data;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) data.push_back(static_cast<char>(v >> (8 * i)));
  };
  auto u16 = [&](std::uint16_t v) {
    data.push_back(static_cast<char>(v));
    data.push_back(static_cast<char>(v >> 8));
  };
  data += "RIFF";
  u32(36);
  data += "WAVEfmt ";
  u32(16);
  u16(1);
  u16(2);  // stereo
  u32(16000);
  u32(64000);
  u16(4);
  u16(16);
  data += "data";
  u32(0);
  const std::string path = write_text(dir, "stereo.wav", data);
  CHECK_THROWS_AS(read_wav(path), FormatError);
}

TEST_CASE("rttm parsing maps fields and groups recordings", "[audio_io]") {
  const auto dir = test::temp_dir("rttm");
  const std::string path = write_text(
      dir, "x.rttm",
      "SPEAKER rec1 1 0.00 3.50 <NA> <NA> spkA <NA>\n"
      "SPEAKER rec1 1 3.50 1.25 <NA> <NA> spkB <NA>\n"
      "SPEAKER rec2 1 1.00 2.00 <NA> <NA> spkA <NA>\n");
  const auto anns = parse_rttm(path);
  REQUIRE(anns.size() == 2);
  CHECK(anns[0].recording_id == "rec1");
  REQUIRE(anns[0].turns.size() == 2);
  CHECK(anns[0].turns[0].speaker_id == "spkA");
  CHECK(anns[0].turns[0].onset == Catch::Approx(0.0));
  CHECK(anns[0].turns[0].duration == Catch::Approx(3.5));
  CHECK(anns[1].turns.size() == 1);
}

TEST_CASE("rttm edge cases", "[audio_io]") {
  const auto dir = test::temp_dir("rttm2");
  CHECK(parse_rttm(write_text(dir, "empty.rttm", "")).empty());
  CHECK_THROWS_AS(
      parse_rttm(write_text(dir, "bad.rttm",
                            "SPEAKER rec1 1 zero 3.50 <NA> <NA> spkA <NA>\n")),
      FormatError);
  CHECK_THROWS_AS(
      parse_rttm(write_text(dir, "short.rttm", "SPEAKER rec1 1 0.0\n")),
      FormatError);
}

TEST_CASE("rttm round trip with 2-decimal times", "[audio_io]") {
  const auto dir = test::temp_dir("rttm3");
  DiarizationAnnotation ann;
  ann.recording_id = "rec1";
  ann.turns = {{"A", 0.0, 2.5}, {"B", 2.5, 3.25}, {"A", 5.75, 1.0}};
  const std::string path = (dir / "rt.rttm").string();
  write_rttm(path, {ann});
  const auto back = parse_rttm(path);
  REQUIRE(back.size() == 1);
  REQUIRE(back[0].turns.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[0].turns[i].speaker_id == ann.turns[i].speaker_id);
    CHECK(back[0].turns[i].onset == Catch::Approx(ann.turns[i].onset).margin(1e-9));
    CHECK(back[0].turns[i].duration ==
          Catch::Approx(ann.turns[i].duration).margin(1e-9));
  }

  // formatting rule: onset serialized with 2 decimals
  DiarizationAnnotation frac;
  frac.recording_id = "r";
  frac.turns = {{"A", 1.234, 2.0}};
  const std::string path2 = (dir / "fr.rttm").string();
  write_rttm(path2, {frac});
  std::ifstream in(path2);
  std::string line;
  std::getline(in, line);
  CHECK(line.find(" 1.23 ") != std::string::npos);

  DiarizationAnnotation bad;
  bad.recording_id = "r";
  bad.turns = {{"A", -1.0, 2.0}};
  CHECK_THROWS_AS(write_rttm((dir / "bad.rttm").string(), {bad}), ValidationError);
}

TEST_CASE("segments and utt2spk round trips", "[audio_io]") {
  const auto dir = test::temp_dir("tables");
  std::vector<SegmentEntry> segs = {{"rec1-0000-0300", "rec1", 0.0, 3.0},
                                    {"rec1-0100-0400", "rec1", 1.0, 4.0}};
  const std::string spath = (dir / "segments").string();
  write_segments(spath, segs);
  const auto back = parse_segments(spath);
  REQUIRE(back.size() == 2);
  CHECK(back[1].utterance_id == "rec1-0100-0400");
  CHECK(back[1].start == Catch::Approx(1.0));
  CHECK(back[1].end == Catch::Approx(4.0));

  const std::string upath = (dir / "utt2spk").string();
  write_utt2spk(upath, {{"rec1-0000-0300", "spkA"}});
  const auto umap = parse_utt2spk(upath);
  REQUIRE(umap.size() == 1);
  CHECK(umap[0].first == "rec1-0000-0300");
  CHECK(umap[0].second == "spkA");
}

TEST_CASE("manifest round trip and validation", "[audio_io]") {
  const auto dir = test::temp_dir("manifest");
  const std::string wav = write_text(dir, "a.wav", "x");
  const std::string rttm = write_text(dir, "a.rttm", "x");
  CorpusManifest m;
  m.entries.push_back({"rec1", wav, rttm, "train"});
  m.entries.push_back({"rec2", wav, rttm, "eval"});
  const std::string path = (dir / "manifest.tsv").string();
  write_manifest(path, m);
  const auto back = parse_manifest(path);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].split == "train");

  // duplicate id rejected
  m.entries.push_back({"rec1", wav, rttm, "eval"});
  write_manifest(path, m);
  CHECK_THROWS_AS(parse_manifest(path), ValidationError);

  // unresolvable path rejected
  CorpusManifest missing;
  missing.entries.push_back({"rec9", (dir / "nope.wav").string(), rttm, "train"});
  write_manifest(path, missing);
  CHECK_THROWS_AS(parse_manifest(path), ValidationError);
}

TEST_CASE("synthetic corpus tiles the recording deterministically",
          "[audio_io][synthetic]") {
  const SyntheticCorpus a = generate_synthetic_corpus(2, 1, 60.0, 2.0, 6.0, 7);
  const SyntheticCorpus b = generate_synthetic_corpus(2, 1, 60.0, 2.0, 6.0, 7);

  REQUIRE(a.signals.size() == 1);
  REQUIRE(a.annotations.size() == 1);
  CHECK(a.signals[0].samples == b.signals[0].samples);  // bit-identical

  const auto& turns = a.annotations[0].turns;
  REQUIRE(!turns.empty());
  double cursor = 0.0;
  for (const auto& t : turns) {
    CHECK(t.onset == Catch::Approx(cursor).margin(1e-9));
    CHECK(t.duration >= 2.0 - 1e-9);
    CHECK(t.duration <= 6.0 + 1e-9);
    cursor += t.duration;
  }
  CHECK(cursor == Catch::Approx(60.0).margin(1e-9));
  CHECK(a.signals[0].samples.size() == 16000 * 60);

  // adjacent turns always change speaker
  for (std::size_t i = 0; i + 1 < turns.size(); ++i)
    CHECK(turns[i].speaker_id != turns[i + 1].speaker_id);
}

TEST_CASE("synthetic corpus parameter errors", "[audio_io][synthetic]") {
  CHECK_THROWS_AS(generate_synthetic_corpus(1, 1, 60.0, 2.0, 6.0, 7),
                  ValidationError);
  CHECK_THROWS_AS(generate_synthetic_corpus(2, 1, 5.0, 10.0, 20.0, 7),
                  ValidationError);
  CHECK_THROWS_AS(generate_synthetic_corpus(2, 1, 60.0, 6.0, 2.0, 7),
                  ValidationError);
}

TEST_CASE("synthetic audio survives a wav round trip exactly",
          "[audio_io][synthetic]") {
  const auto dir = test::temp_dir("synthwav");
  const SyntheticCorpus c = generate_synthetic_corpus(2, 1, 10.0, 2.0, 5.0, 11);
  const std::string path = (dir / "s.wav").string();
  write_wav(path, c.signals[0]);
  const AudioSignal back = read_wav(path, c.signals[0].recording_id);
  REQUIRE(back.samples == c.signals[0].samples);
}
