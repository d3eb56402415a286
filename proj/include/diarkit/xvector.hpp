// diarkit/xvector.hpp
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

#ifndef DIARKIT_XVECTOR_HPP
#define DIARKIT_XVECTOR_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "diarkit/binio.hpp"
#include "diarkit/common.hpp"
#include "diarkit/features.hpp"
#include "diarkit/nnet.hpp"
#include "diarkit/vad.hpp"

namespace diarkit {

struct XvecConfig {
  int feature_dim = 13;
  int embedding_dim = 512;     // tdnn6 width: 512 or 128 at full scale
  int num_speakers = 2;
  int min_frames_per_chunk = 16;
  int max_frames_per_chunk = 50;
  int epochs = 10;
  double learning_rate = 0.01;
  double shrink = 1.0;         // width scale for desk-scale training
  int chunks_per_epoch = 0;    // 0 = derived from total usable frames
  std::uint64_t seed = 0;

  int width(int full) const {
    return std::max(2, static_cast<int>(std::lround(full * shrink)));
  }
};

struct EmbeddingEntry {
  std::string utterance_id;
  std::vector<double> vector;
};

struct EmbeddingSequence {
  std::string recording_id;
  double window = 0.0;
  double period = 0.0;
  std::vector<EmbeddingEntry> entries;
  std::vector<std::string> excluded;  // segments skipped for lack of frames

  std::size_t dim() const { return entries.empty() ? 0 : entries.front().vector.size(); }
};

// ---------------------------------------------------------------------------
// Architecture (the x-vector TDNN)
// ---------------------------------------------------------------------------

struct ArchitectureRow {
  std::string name;
  std::string layer_type;
  int input_size = 0;   // affine input width (spliced for tdnn layers)
  int output_size = 0;
};

/// tdnn1..tdnn5 with contexts {0}, {-2,0,2}, {-3,0,3}, {0}, {0}; statistics
/// pooling; tdnn6/tdnn7; softmax output over speakers. Each tdnn block is
/// affine -> ReLU -> batchnorm. The embedding is the tdnn6 affine output.
inline NetworkSpec build_extractor(const XvecConfig& config) {
  if (config.num_speakers < 2)
    throw ContractError("build_extractor: need at least 2 speakers");
  const int w512 = config.width(512);
  const int w1500 = config.width(1500);
  const int emb = config.width(config.embedding_dim);

  NetworkSpec spec;
  spec.input_dim = config.feature_dim;
  auto tdnn_block = [&spec](std::vector<int> ctx, int in, int out) {
    spec.layers.push_back(LayerSpec::tdnn(std::move(ctx), in, out));
    spec.layers.push_back(LayerSpec::relu(out));
    spec.layers.push_back(LayerSpec::batchnorm(out));
  };
  tdnn_block({0}, config.feature_dim, w512);
  tdnn_block({-2, 0, 2}, w512, w512);
  tdnn_block({-3, 0, 3}, w512, w512);
  tdnn_block({0}, w512, w512);
  tdnn_block({0}, w512, w1500);
  spec.layers.push_back(LayerSpec::stats_pool(w1500));
  spec.layers.push_back(LayerSpec::dense(2 * w1500, emb));
  spec.layers.push_back(LayerSpec::relu(emb));
  spec.layers.push_back(LayerSpec::batchnorm(emb));
  spec.layers.push_back(LayerSpec::dense(emb, w512));
  spec.layers.push_back(LayerSpec::relu(w512));
  spec.layers.push_back(LayerSpec::batchnorm(w512));
  spec.layers.push_back(LayerSpec::dense(w512, config.num_speakers));
  spec.layers.push_back(LayerSpec::softmax(config.num_speakers));
  spec.validate();
  return spec;
}

// index of the tdnn6 affine layer within build_extractor's layer list
inline constexpr std::size_t kEmbeddingLayerIndex = 16;

/// Table-style audit of the extractor: name, type, affine input width,
/// output width, one row per named block.
inline std::vector<ArchitectureRow> architecture_summary(const XvecConfig& config) {
  const NetworkSpec spec = build_extractor(config);
  std::vector<ArchitectureRow> rows;
  const char* names[5] = {"tdnn1", "tdnn2", "tdnn3", "tdnn4", "tdnn5"};
  for (int i = 0; i < 5; ++i) {
    const LayerSpec& l = spec.layers[static_cast<std::size_t>(3 * i)];
    rows.push_back({names[i], "relu-batchnorm-layer", l.spliced_dim(), l.out_dim});
  }
  const LayerSpec& stats = spec.layers[15];
  rows.push_back({"stats", "stats-layer (pooling)", stats.in_dim, stats.out_dim});
  const LayerSpec& tdnn6 = spec.layers[kEmbeddingLayerIndex];
  rows.push_back({"tdnn6", "relu-batchnorm-layer", tdnn6.in_dim, tdnn6.out_dim});
  const LayerSpec& tdnn7 = spec.layers[19];
  rows.push_back({"tdnn7", "relu-batchnorm-layer", tdnn7.in_dim, tdnn7.out_dim});
  const LayerSpec& output = spec.layers[22];
  rows.push_back({"output", "output-layer", output.in_dim, output.out_dim});
  return rows;
}

// ---------------------------------------------------------------------------
// Training examples
// ---------------------------------------------------------------------------

struct ChunkRef {
  std::size_t utterance = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
  int speaker = 0;
};

/// One epoch of chunk references: lengths uniform in [min,max] frames,
/// random offsets, speaker-balanced within +/-1 chunk.
inline std::vector<ChunkRef> make_training_examples(
    const std::vector<Matrix>& utterance_features, const std::vector<int>& labels,
    const XvecConfig& config, std::uint64_t seed) {
  if (utterance_features.size() != labels.size())
    throw ContractError("make_training_examples: features/labels size mismatch");

  const std::size_t min_len = static_cast<std::size_t>(config.min_frames_per_chunk);
  std::map<int, std::vector<std::size_t>> usable;  // speaker -> utterance indices
  std::size_t total_frames = 0;
  for (std::size_t u = 0; u < utterance_features.size(); ++u) {
    if (utterance_features[u].rows() >= min_len) {
      usable[labels[u]].push_back(u);
      total_frames += utterance_features[u].rows();
    }
  }
  for (int s = 0; s < config.num_speakers; ++s)
    if (usable.find(s) == usable.end() || usable[s].empty())
      throw DataError(format(
          "make_training_examples: speaker %d has no utterance with >= %d frames", s,
          config.min_frames_per_chunk));

  std::size_t total_chunks = static_cast<std::size_t>(config.chunks_per_epoch);
  if (total_chunks == 0) {
    const double mean_len =
        0.5 * (config.min_frames_per_chunk + config.max_frames_per_chunk);
    total_chunks = std::max<std::size_t>(
        config.num_speakers,
        static_cast<std::size_t>(std::ceil(total_frames / mean_len)));
  }

  Rng rng(mix_seed(seed, 0xc4a7ULL));

  // deal the +/-1 extras to a seeded shuffle of the speakers
  std::vector<int> speakers(static_cast<std::size_t>(config.num_speakers));
  std::iota(speakers.begin(), speakers.end(), 0);
  rng.shuffle(speakers);
  const std::size_t base = total_chunks / speakers.size();
  const std::size_t extra = total_chunks % speakers.size();

  std::vector<ChunkRef> plan;
  plan.reserve(total_chunks);
  for (std::size_t si = 0; si < speakers.size(); ++si) {
    const int spk = speakers[si];
    const std::size_t count = base + (si < extra ? 1 : 0);
    const auto& utts = usable[spk];
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t u = utts[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(utts.size()) - 1))];
      const std::size_t frames = utterance_features[u].rows();
      const std::size_t max_len =
          std::min<std::size_t>(static_cast<std::size_t>(config.max_frames_per_chunk),
                                frames);
      const std::size_t len = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(min_len),
                          static_cast<std::int64_t>(max_len)));
      const std::size_t off = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(frames - len)));
      plan.push_back(ChunkRef{u, off, len, spk});
    }
  }
  rng.shuffle(plan);
  return plan;
}

inline Matrix slice_rows(const Matrix& m, std::size_t offset, std::size_t length) {
  Matrix out(length, m.cols());
  for (std::size_t r = 0; r < length; ++r)
    std::copy(m.row(offset + r), m.row(offset + r) + m.cols(), out.row(r));
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline std::pair<double, Matrix> softmax_cross_entropy(const Matrix& probs,
                                                       int label) {
  if (probs.rows() != 1 || label < 0 ||
      static_cast<std::size_t>(label) >= probs.cols())
    throw ContractError("softmax_cross_entropy: bad shapes");
  const double p = std::max(probs(0, static_cast<std::size_t>(label)), 1e-12);
  Matrix grad(1, probs.cols());
  grad(0, static_cast<std::size_t>(label)) = -1.0 / p;
  return {-std::log(p), grad};
}

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
};

struct ExtractorModel {
  NetworkSpec spec;
  NetworkParams params;
  TrainReport report;
};

/// Softmax cross-entropy training with per-example SGD, fixed learning rate.
inline ExtractorModel train_extractor(const std::vector<Matrix>& utterance_features,
                                      const std::vector<int>& labels,
                                      const XvecConfig& config) {
  if (config.num_speakers < 2)
    throw DataError("train_extractor: need at least 2 speakers");

  ExtractorModel model;
  model.spec = build_extractor(config);
  model.params = init_params(model.spec, config.seed);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto plan = make_training_examples(
        utterance_features, labels, config,
        mix_seed(config.seed, 0xe90cULL + static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const ChunkRef& chunk : plan) {
      const Matrix x =
          slice_rows(utterance_features[chunk.utterance], chunk.offset, chunk.length);
      ForwardCache cache;
      const Matrix probs = forward(model.spec, model.params, x, Mode::kTrain, &cache);
      auto [loss, dprobs] = softmax_cross_entropy(probs, chunk.speaker);
      if (!std::isfinite(loss))
        throw NumericalError(format("train_extractor: divergence at epoch %d", epoch + 1));
      loss_sum += loss;
      std::size_t argmax = 0;
      for (std::size_t c = 1; c < probs.cols(); ++c)
        if (probs(0, c) > probs(0, argmax)) argmax = c;
      if (static_cast<int>(argmax) == chunk.speaker) ++correct;
      const BackwardResult back = backward(model.spec, model.params, cache, dprobs);
      sgd_step(model.params, back.grads, config.learning_rate);
    }
    const double mean_loss = plan.empty() ? 0.0 : loss_sum / plan.size();
    const double acc = plan.empty() ? 0.0 : static_cast<double>(correct) / plan.size();
    model.report.epoch_loss.push_back(mean_loss);
    model.report.epoch_accuracy.push_back(acc);
    log_info("extractor epoch %d/%d: loss %.4f, accuracy %.3f", epoch + 1,
             config.epochs, mean_loss, acc);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Embedding extraction
// ---------------------------------------------------------------------------

/// Evaluates the network prefix up to the tdnn6 affine output in inference
/// mode; one embedding per segment. Segments that map to no feature frames
/// are skipped and listed in `excluded`.
inline EmbeddingSequence extract_embeddings(const NetworkSpec& spec,
                                            NetworkParams& params,
                                            const SegmentTable& segments,
                                            const FeatureMatrix& features,
                                            const std::string& recording_id) {
  NetworkSpec prefix;
  prefix.input_dim = spec.input_dim;
  if (spec.layers.size() <= kEmbeddingLayerIndex)
    throw ContractError("extract_embeddings: spec is not an extractor");
  prefix.layers.assign(spec.layers.begin(),
                       spec.layers.begin() + kEmbeddingLayerIndex + 1);
  NetworkParams prefix_params;
  prefix_params.init_seed = params.init_seed;
  prefix_params.layers.assign(params.layers.begin(),
                              params.layers.begin() + kEmbeddingLayerIndex + 1);
  prefix_params.spec_digest = prefix.digest();

  const double shift_s = features.frame_shift_ms / 1000.0;
  const std::size_t total = features.num_frames();

  EmbeddingSequence out;
  out.recording_id = recording_id;
  out.window = segments.window;
  out.period = segments.period;
  for (const Segment& seg : segments.segments) {
    long first = std::lround(seg.start / shift_s);
    long last = std::lround(seg.end / shift_s);
    first = std::clamp(first, 0L, static_cast<long>(total));
    last = std::clamp(last, 0L, static_cast<long>(total));
    if (last <= first) {
      log_warn("segment %s has no feature frames; skipped", seg.utterance_id.c_str());
      out.excluded.push_back(seg.utterance_id);
      continue;
    }
    const Matrix x = slice_rows(features.values, static_cast<std::size_t>(first),
                                static_cast<std::size_t>(last - first));
    const Matrix emb = forward(prefix, prefix_params, x, Mode::kInfer);
    EmbeddingEntry entry;
    entry.utterance_id = seg.utterance_id;
    entry.vector.assign(emb.row(0), emb.row(0) + emb.cols());
    out.entries.push_back(std::move(entry));
  }
  return out;
}

/// x * sqrt(d) / ||x||, the usual embedding length normalization.
inline void length_normalize(EmbeddingSequence& seq) {
  for (auto& e : seq.entries) {
    double norm = 0.0;
    for (double v : e.vector) norm += v * v;
    norm = std::sqrt(norm);
    if (norm <= 0.0) continue;
    const double scale = std::sqrt(static_cast<double>(e.vector.size())) / norm;
    for (double& v : e.vector) v *= scale;
  }
}

// ---------------------------------------------------------------------------
// Embedding archive: magic "DKXV", u32 count, u32 dim, id table, f32 payload.
// ---------------------------------------------------------------------------

inline void write_embeddings(const std::string& path, const EmbeddingSequence& seq) {
  BinaryWriter w(path);
  w.magic("DKXV");
  w.u32(static_cast<std::uint32_t>(seq.entries.size()));
  w.u32(static_cast<std::uint32_t>(seq.dim()));
  for (const auto& e : seq.entries) w.str(e.utterance_id);
  for (const auto& e : seq.entries)
    for (double v : e.vector) w.f32(static_cast<float>(v));
  w.close();
}

// The archive holds only ids and vectors; recording id and window/period
// metadata are supplied by the caller (they live in the pipeline config).
inline EmbeddingSequence read_embeddings(const std::string& path,
                                         const std::string& recording_id = "",
                                         double window = 0.0, double period = 0.0) {
  BinaryReader r(path);
  r.expect_magic("DKXV");
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  EmbeddingSequence seq;
  seq.recording_id = recording_id;
  seq.window = window;
  seq.period = period;
  seq.entries.resize(count);
  for (auto& e : seq.entries) e.utterance_id = r.str();
  for (auto& e : seq.entries) {
    e.vector.resize(dim);
    for (auto& v : e.vector) v = r.f32();
  }
  return seq;
}

}  // namespace diarkit

#endif  // DIARKIT_XVECTOR_HPP
