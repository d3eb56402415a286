// diarkit/config.hpp
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

#ifndef DIARKIT_CONFIG_HPP
#define DIARKIT_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "diarkit/common.hpp"
#include "diarkit/features.hpp"
#include "diarkit/vad.hpp"

namespace diarkit {

/// Flat "key = value" file with [section] headers. Lookup keys are
/// "section.key"; command-line overrides win over file values.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("config: cannot open " + path);
    KeyValueConfig cfg;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[' && t.back() == ']') {
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ValidationError(format("%s:%zu: expected key = value", path.c_str(),
                                     line_no));
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ValidationError(format("%s:%zu: empty key", path.c_str(), line_no));
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw ValidationError("config: non-numeric value for " + key);
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoll(it->second);
    } catch (const std::exception&) {
      throw ValidationError("config: non-integer value for " + key);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ValidationError("config: non-boolean value for " + key);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct CorpusConfig {
  std::string manifest;  // empty -> generate synthetic corpus
  int synth_speakers = 4;
  int synth_recordings = 6;
  double synth_duration = 200.0;
  double synth_turn_min = 2.0;
  double synth_turn_max = 6.0;
  int train_recordings = 4;  // synthetic split: first K train, rest eval
};

struct SegmentationConfig {
  double window = 3.0;
  double period = 1.0;
  double min_tail = 0.5;
  double chunk_seconds = 30.0;
  double min_region = 0.5;
};

enum class CmvnMode { kRecording, kSliding, kNone };
enum class Scorer { kPlda, kBilstm };

struct PldaConfig {
  int lda_dim = 10;
  bool length_norm = true;
};

struct ClusteringConfig {
  std::string clusterer = "ahc";  // ahc | sc
  double ahc_threshold = 0.5;
  int sc_k = 0;
  int kmeans_restarts = 10;
  double sweep_lo = 0.0;
  double sweep_hi = 1.0;
  double sweep_step = 0.05;
  double plda_sweep_lo = -0.3;
  double plda_sweep_hi = 0.5;
  double plda_sweep_step = 0.05;
};

struct BilstmStageConfig {
  int hidden = 16;
  int dense_dim = 8;
  int epochs = 10;
  double learning_rate = 0.01;
  int max_seq_len = 200;
  int folds = 5;
};

struct ExtractorStageConfig {
  int embedding_dim = 128;
  double shrink = 1.0;
  int epochs = 10;
  double learning_rate = 0.01;
  int min_frames = 16;
  int max_frames = 50;
  int chunks_per_epoch = 0;
};

struct PipelineConfig {
  CorpusConfig corpus;
  FrameSpec features;
  CmvnMode cmvn_mode = CmvnMode::kRecording;
  int sliding_window_frames = 300;
  VadOptions vad;
  double vad_min_region = 0.5;
  SegmentationConfig segmentation;
  ExtractorStageConfig extractor;
  PldaConfig plda;
  BilstmStageConfig bilstm;
  ClusteringConfig clustering;
  std::string scorer = "bilstm";
  double collar = 0.25;
  std::uint64_t seed = 17;
  int jobs = 1;
  std::string out_dir = "out";

  static PipelineConfig from(const KeyValueConfig& kv) {
    PipelineConfig c;
    c.corpus.manifest = kv.get_string("corpus.manifest", "");
    c.corpus.synth_speakers = static_cast<int>(kv.get_int("corpus.synth_speakers", 4));
    c.corpus.synth_recordings =
        static_cast<int>(kv.get_int("corpus.synth_recordings", 6));
    c.corpus.synth_duration = kv.get_double("corpus.synth_duration", 200.0);
    c.corpus.synth_turn_min = kv.get_double("corpus.synth_turn_min", 2.0);
    c.corpus.synth_turn_max = kv.get_double("corpus.synth_turn_max", 6.0);
    c.corpus.train_recordings =
        static_cast<int>(kv.get_int("corpus.train_recordings", 4));

    c.features.frame_length_ms = kv.get_double("features.frame_length_ms", 25.0);
    c.features.frame_shift_ms = kv.get_double("features.frame_shift_ms", 10.0);
    c.features.num_mel_filters =
        static_cast<int>(kv.get_int("features.num_mel_filters", 23));
    c.features.num_ceps = static_cast<int>(kv.get_int("features.num_ceps", 13));
    c.features.fft_size = static_cast<int>(kv.get_int("features.fft_size", 512));
    c.features.pre_emphasis = kv.get_double("features.pre_emphasis", 0.97);
    const std::string cmvn = kv.get_string("features.cmvn", "recording");
    if (cmvn == "recording") c.cmvn_mode = CmvnMode::kRecording;
    else if (cmvn == "sliding") c.cmvn_mode = CmvnMode::kSliding;
    else if (cmvn == "none") c.cmvn_mode = CmvnMode::kNone;
    else throw ValidationError("config: features.cmvn must be recording|sliding|none");
    c.sliding_window_frames =
        static_cast<int>(kv.get_int("features.sliding_window_frames", 300));

    c.vad.threshold_offset = kv.get_double("vad.threshold_offset", 5.5);
    c.vad.mean_scale = kv.get_double("vad.mean_scale", 0.5);
    c.vad.context = static_cast<int>(kv.get_int("vad.context", 5));
    c.vad.proportion = kv.get_double("vad.proportion", 0.6);
    c.vad_min_region = kv.get_double("vad.min_region", 0.5);

    c.segmentation.window = kv.get_double("segmentation.window", 3.0);
    c.segmentation.period = kv.get_double("segmentation.period", 1.0);
    c.segmentation.min_tail = kv.get_double("segmentation.min_tail", 0.5);
    c.segmentation.chunk_seconds = kv.get_double("segmentation.chunk_seconds", 30.0);

    c.extractor.embedding_dim =
        static_cast<int>(kv.get_int("extractor.embedding_dim", 128));
    c.extractor.shrink = kv.get_double("extractor.shrink", 1.0);
    c.extractor.epochs = static_cast<int>(kv.get_int("extractor.epochs", 10));
    c.extractor.learning_rate = kv.get_double("extractor.lr", 0.01);
    c.extractor.min_frames = static_cast<int>(kv.get_int("extractor.min_frames", 16));
    c.extractor.max_frames = static_cast<int>(kv.get_int("extractor.max_frames", 50));
    c.extractor.chunks_per_epoch =
        static_cast<int>(kv.get_int("extractor.chunks_per_epoch", 0));

    c.plda.lda_dim = static_cast<int>(kv.get_int("plda.lda_dim", 10));
    c.plda.length_norm = kv.get_bool("plda.length_norm", true);

    c.bilstm.hidden = static_cast<int>(kv.get_int("bilstm.hidden", 16));
    c.bilstm.dense_dim = static_cast<int>(kv.get_int("bilstm.dense", 8));
    c.bilstm.epochs = static_cast<int>(kv.get_int("bilstm.epochs", 10));
    c.bilstm.learning_rate = kv.get_double("bilstm.lr", 0.01);
    c.bilstm.max_seq_len = static_cast<int>(kv.get_int("bilstm.max_seq_len", 200));
    c.bilstm.folds = static_cast<int>(kv.get_int("bilstm.folds", 5));

    c.clustering.clusterer = kv.get_string("clustering.clusterer", "ahc");
    c.clustering.ahc_threshold = kv.get_double("clustering.ahc_threshold", 0.5);
    c.clustering.sc_k = static_cast<int>(kv.get_int("clustering.sc_k", 0));
    c.clustering.kmeans_restarts =
        static_cast<int>(kv.get_int("clustering.kmeans_restarts", 10));
    c.clustering.sweep_lo = kv.get_double("clustering.sweep_lo", 0.0);
    c.clustering.sweep_hi = kv.get_double("clustering.sweep_hi", 1.0);
    c.clustering.sweep_step = kv.get_double("clustering.sweep_step", 0.05);
    c.clustering.plda_sweep_lo = kv.get_double("clustering.plda_sweep_lo", -0.3);
    c.clustering.plda_sweep_hi = kv.get_double("clustering.plda_sweep_hi", 0.5);
    c.clustering.plda_sweep_step = kv.get_double("clustering.plda_sweep_step", 0.05);

    c.scorer = kv.get_string("scoring.scorer", "bilstm");
    c.collar = kv.get_double("evaluation.collar", 0.25);
    c.seed = static_cast<std::uint64_t>(kv.get_int("pipeline.seed", 17));
    c.jobs = static_cast<int>(kv.get_int("pipeline.jobs", 1));
    c.out_dir = kv.get_string("pipeline.out", "out");
    c.validate();
    return c;
  }

  void validate() const {
    std::vector<std::string> problems;
    if (corpus.manifest.empty()) {
      if (corpus.synth_speakers < 2) problems.push_back("corpus.synth_speakers < 2");
      if (corpus.synth_duration <= 0) problems.push_back("corpus.synth_duration <= 0");
      if (corpus.train_recordings < 1 ||
          corpus.train_recordings >= corpus.synth_recordings)
        problems.push_back("corpus.train_recordings must leave at least one eval recording");
    } else if (!file_exists(corpus.manifest)) {
      problems.push_back("corpus.manifest path does not exist: " + corpus.manifest);
    }
    if (segmentation.window < segmentation.period || segmentation.period <= 0)
      problems.push_back("segmentation: need window >= period > 0");
    if (segmentation.chunk_seconds <= 0)
      problems.push_back("segmentation.chunk_seconds <= 0");
    if (scorer != "plda" && scorer != "bilstm")
      problems.push_back("scoring.scorer must be plda or bilstm");
    if (clustering.clusterer != "ahc" && clustering.clusterer != "sc")
      problems.push_back("clustering.clusterer must be ahc or sc");
    if (collar < 0) problems.push_back("evaluation.collar < 0");
    if (extractor.min_frames < 1 || extractor.max_frames < extractor.min_frames)
      problems.push_back("extractor chunk frame range invalid");
    if (bilstm.max_seq_len < 2) problems.push_back("bilstm.max_seq_len < 2");
    if (jobs < 1) problems.push_back("pipeline.jobs < 1");
    if (!problems.empty()) {
      std::string msg = "config validation failed:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ValidationError(msg);
    }
    features.validate();
  }

  // digest of the sections a stage depends on, for stale-artifact detection
  std::uint64_t section_digest(const std::vector<std::string>& sections,
                               const KeyValueConfig& kv) const {
    Fnv64 h;
    h.update_pod(seed);
    for (const auto& [key, value] : kv.values()) {
      for (const auto& s : sections) {
        if (key.rfind(s + ".", 0) == 0) {
          h.update(key);
          h.update(value);
          break;
        }
      }
    }
    return h.digest();
  }
};

}  // namespace diarkit

#endif  // DIARKIT_CONFIG_HPP
