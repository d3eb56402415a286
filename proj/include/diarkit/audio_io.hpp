// diarkit/audio_io.hpp
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

#ifndef DIARKIT_AUDIO_IO_HPP
#define DIARKIT_AUDIO_IO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "diarkit/binio.hpp"
#include "diarkit/common.hpp"

namespace diarkit {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct AudioSignal {
  std::vector<float> samples;  // amplitudes in [-1, 1]
  int sample_rate = 0;         // Hz
  std::string recording_id;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct SpeakerTurn {
  std::string speaker_id;
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds

  double offset() const { return onset + duration; }
};

struct DiarizationAnnotation {
  std::string recording_id;
  std::vector<SpeakerTurn> turns;

  void normalize() {
    std::stable_sort(turns.begin(), turns.end(),
                     [](const SpeakerTurn& a, const SpeakerTurn& b) {
                       return a.onset < b.onset;
                     });
  }

  void validate() const {
    for (const auto& t : turns) {
      if (t.duration <= 0.0)
        throw ValidationError(format("%s: turn with non-positive duration %g",
                                     recording_id.c_str(), t.duration));
      if (t.onset < 0.0)
        throw ValidationError(format("%s: turn with negative onset %g",
                                     recording_id.c_str(), t.onset));
    }
  }
};

struct ManifestEntry {
  std::string recording_id;
  std::string audio_path;
  std::string annotation_path;
  std::string split;  // train | dev | eval
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
};

// ---------------------------------------------------------------------------
// WAV (RIFF PCM16 mono only)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32le(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError(std::string("wav: truncated ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16le(std::istream& in, const char* what) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (in.gcount() != 2) throw FormatError(std::string("wav: truncated ") + what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline void read_tag(std::istream& in, char out[4], const char* what) {
  in.read(out, 4);
  if (in.gcount() != 4) throw FormatError(std::string("wav: truncated ") + what);
}

}  // namespace detail

/// Reads a 16-bit mono PCM RIFF/WAVE file. Samples are scaled to [-1, 1]
/// by dividing by 32768.
inline AudioSignal read_wav(const std::string& path,
                            const std::string& recording_id = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("wav: cannot open " + path);

  char tag[4];
  detail::read_tag(in, tag, "RIFF header");
  if (std::memcmp(tag, "RIFF", 4) != 0) throw FormatError(path + ": not a RIFF file");
  detail::read_u32le(in, "RIFF size");
  detail::read_tag(in, tag, "WAVE header");
  if (std::memcmp(tag, "WAVE", 4) != 0) throw FormatError(path + ": not a WAVE file");

  bool have_fmt = false;
  std::uint16_t audio_format = 0, num_channels = 0, bits_per_sample = 0;
  std::uint32_t sample_rate = 0;

  // walk chunks until "data"
  for (;;) {
    detail::read_tag(in, tag, "chunk id");
    const std::uint32_t chunk_size = detail::read_u32le(in, "chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError(path + ": fmt chunk too small");
      audio_format = detail::read_u16le(in, "audio format");
      num_channels = detail::read_u16le(in, "channel count");
      sample_rate = detail::read_u32le(in, "sample rate");
      detail::read_u32le(in, "byte rate");
      detail::read_u16le(in, "block align");
      bits_per_sample = detail::read_u16le(in, "bits per sample");
      in.ignore(chunk_size - 16 + (chunk_size & 1));
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(path + ": data chunk before fmt chunk");
      if (audio_format != 1)
        throw FormatError(format("%s: unsupported format %u (PCM only)",
                                 path.c_str(), audio_format));
      if (num_channels != 1)
        throw FormatError(format("%s: unsupported channel count %u (mono only)",
                                 path.c_str(), num_channels));
      if (bits_per_sample != 16)
        throw FormatError(format("%s: unsupported bit depth %u (16-bit only)",
                                 path.c_str(), bits_per_sample));
      if (sample_rate == 0) throw FormatError(path + ": zero sample rate");
      if (chunk_size % 2 != 0) throw FormatError(path + ": odd data chunk size");

      AudioSignal sig;
      sig.sample_rate = static_cast<int>(sample_rate);
      sig.recording_id = recording_id;
      const std::size_t n = chunk_size / 2;
      sig.samples.resize(n);
      std::vector<char> raw(chunk_size);
      in.read(raw.data(), static_cast<std::streamsize>(chunk_size));
      if (in.gcount() != static_cast<std::streamsize>(chunk_size))
        throw FormatError(path + ": truncated data chunk");
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t v = static_cast<std::int16_t>(
            static_cast<unsigned char>(raw[2 * i]) |
            (static_cast<unsigned char>(raw[2 * i + 1]) << 8));
        sig.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return sig;
    } else {
      in.ignore(chunk_size + (chunk_size & 1));
      if (!in) throw FormatError(path + ": truncated chunk " + std::string(tag, 4));
    }
  }
}

/// Writes 16-bit mono PCM. Samples are clamped to [-1, 32767/32768].
inline void write_wav(const std::string& path, const AudioSignal& sig) {
  if (sig.sample_rate <= 0) throw ValidationError("write_wav: invalid sample rate");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("wav: cannot open for writing " + path);

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(sig.samples.size() * 2);
  auto u32 = [&](std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                 static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    out.write(b, 4);
  };
  auto u16 = [&](std::uint16_t v) {
    char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    out.write(b, 2);
  };

  out.write("RIFF", 4);
  u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(static_cast<std::uint32_t>(sig.sample_rate));
  u32(static_cast<std::uint32_t>(sig.sample_rate) * 2);
  u16(2);
  u16(16);
  out.write("data", 4);
  u32(data_bytes);
  for (float s : sig.samples) {
    long v = std::lround(static_cast<double>(s) * 32768.0);
    v = std::clamp(v, -32768L, 32767L);
    u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  out.close();
  if (!out) throw FormatError("wav: write failed " + path);
}

// ---------------------------------------------------------------------------
// RTTM
// ---------------------------------------------------------------------------

/// Parses SPEAKER lines. Returns one annotation per recording id, in first-
/// appearance order; turns are sorted by onset.
inline std::vector<DiarizationAnnotation> parse_rttm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("rttm: cannot open " + path);

  std::vector<DiarizationAnnotation> out;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == ';' || trimmed[0] == '#') continue;
    const auto fields = split_whitespace(trimmed);
    if (fields[0] != "SPEAKER") continue;
    if (fields.size() < 8)
      throw FormatError(format("%s:%zu: SPEAKER line with %zu fields (need >= 8)",
                               path.c_str(), line_no, fields.size()));
    double onset = 0.0, dur = 0.0;
    try {
      std::size_t pos = 0;
      onset = std::stod(fields[3], &pos);
      if (pos != fields[3].size()) throw std::invalid_argument("trailing");
      dur = std::stod(fields[4], &pos);
      if (pos != fields[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError(format("%s:%zu: non-numeric onset/duration", path.c_str(),
                               line_no));
    }
    const std::string& rec = fields[1];
    auto it = index.find(rec);
    if (it == index.end()) {
      index.emplace(rec, out.size());
      out.push_back(DiarizationAnnotation{rec, {}});
      it = index.find(rec);
    }
    out[it->second].turns.push_back(SpeakerTurn{fields[7], onset, dur});
  }
  for (auto& ann : out) ann.normalize();
  return out;
}

/// Serializes annotations as 9-column SPEAKER lines, times with 2 decimals.
inline void write_rttm(const std::string& path,
                       const std::vector<DiarizationAnnotation>& annotations) {
  std::ofstream out(path);
  if (!out) throw FormatError("rttm: cannot open for writing " + path);
  for (const auto& ann : annotations) {
    ann.validate();
    for (const auto& t : ann.turns) {
      out << "SPEAKER " << ann.recording_id << " 1 " << format("%.2f", t.onset)
          << ' ' << format("%.2f", t.duration) << " <NA> <NA> " << t.speaker_id
          << " <NA>\n";
    }
  }
  out.close();
  if (!out) throw FormatError("rttm: write failed " + path);
}

// ---------------------------------------------------------------------------
// Kaldi-style text tables
// ---------------------------------------------------------------------------

struct SegmentEntry {
  std::string utterance_id;
  std::string recording_id;
  double start = 0.0;
  double end = 0.0;
};

inline void write_segments(const std::string& path,
                           const std::vector<SegmentEntry>& segments) {
  std::ofstream out(path);
  if (!out) throw FormatError("segments: cannot open for writing " + path);
  for (const auto& s : segments) {
    if (s.start < 0.0 || s.end <= s.start)
      throw ValidationError(format("segments: invalid span [%g, %g] for %s", s.start,
                                   s.end, s.utterance_id.c_str()));
    out << s.utterance_id << ' ' << s.recording_id << ' ' << format("%.2f", s.start)
        << ' ' << format("%.2f", s.end) << '\n';
  }
  out.close();
  if (!out) throw FormatError("segments: write failed " + path);
}

inline std::vector<SegmentEntry> parse_segments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("segments: cannot open " + path);
  std::vector<SegmentEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto fields = split_whitespace(trimmed);
    if (fields.size() != 4)
      throw FormatError(format("%s:%zu: expected 4 fields", path.c_str(), line_no));
    try {
      out.push_back(SegmentEntry{fields[0], fields[1], std::stod(fields[2]),
                                 std::stod(fields[3])});
    } catch (const std::exception&) {
      throw FormatError(format("%s:%zu: non-numeric time", path.c_str(), line_no));
    }
  }
  return out;
}

inline void write_utt2spk(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& map) {
  std::ofstream out(path);
  if (!out) throw FormatError("utt2spk: cannot open for writing " + path);
  for (const auto& [utt, spk] : map) out << utt << ' ' << spk << '\n';
  out.close();
  if (!out) throw FormatError("utt2spk: write failed " + path);
}

inline std::vector<std::pair<std::string, std::string>> parse_utt2spk(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("utt2spk: cannot open " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto fields = split_whitespace(trimmed);
    if (fields.size() != 2)
      throw FormatError(format("%s:%zu: expected 2 fields", path.c_str(), line_no));
    out.emplace_back(fields[0], fields[1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus manifest: "recording_id<TAB>audio_path<TAB>annotation_path<TAB>split"
// ---------------------------------------------------------------------------

inline void write_manifest(const std::string& path, const CorpusManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw FormatError("manifest: cannot open for writing " + path);
  for (const auto& e : manifest.entries)
    out << e.recording_id << '\t' << e.audio_path << '\t' << e.annotation_path << '\t'
        << e.split << '\n';
  out.close();
  if (!out) throw FormatError("manifest: write failed " + path);
}

inline CorpusManifest parse_manifest(const std::string& path,
                                     bool check_paths = true) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("manifest: cannot open " + path);
  CorpusManifest manifest;
  std::map<std::string, int> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4)
      throw FormatError(format("%s:%zu: expected 4 tab-separated fields",
                               path.c_str(), line_no));
    if (fields[3] != "train" && fields[3] != "dev" && fields[3] != "eval")
      throw ValidationError(format("%s:%zu: unknown split '%s'", path.c_str(),
                                   line_no, fields[3].c_str()));
    if (++seen[fields[0]] > 1)
      throw ValidationError(format("%s:%zu: duplicate recording id '%s'",
                                   path.c_str(), line_no, fields[0].c_str()));
    if (check_paths) {
      if (!file_exists(fields[1]))
        throw ValidationError(format("%s:%zu: audio path not resolvable: %s",
                                     path.c_str(), line_no, fields[1].c_str()));
      if (!file_exists(fields[2]))
        throw ValidationError(format("%s:%zu: annotation path not resolvable: %s",
                                     path.c_str(), line_no, fields[2].c_str()));
    }
    manifest.entries.push_back(ManifestEntry{fields[0], fields[1], fields[2], fields[3]});
  }
  return manifest;
}

}  // namespace diarkit

#endif  // DIARKIT_AUDIO_IO_HPP
