// diarkit/bilstm.hpp
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
// Bi-LSTM similarity scoring: each row of the similarity matrix is
// predicted from the sequence of concatenated x-vector pairs
// [x_a;x_1] ... [x_a;x_n], trained with element-wise BCE. Oversized rows
// are processed in column spans with the recurrent state reset per span.

#ifndef DIARKIT_BILSTM_HPP
#define DIARKIT_BILSTM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "diarkit/common.hpp"
#include "diarkit/matrix.hpp"
#include "diarkit/nnet.hpp"
#include "diarkit/similarity.hpp"

namespace diarkit {

struct BilstmConfig {
  int hidden = 256;        // per direction; paper: 2x256 = 512 outputs per layer
  int dense_dim = 64;
  int epochs = 10;
  double learning_rate = 0.01;
  int max_seq_len = 200;   // column-span threshold for batch processing
  int folds = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden < 1 || dense_dim < 1) throw ContractError("BilstmConfig: bad widths");
    if (max_seq_len < 2) throw ContractError("BilstmConfig: max_seq_len must be >= 2");
  }
};

/// Two stacked bidirectional LSTM layers, a 64-unit ReLU dense layer and a
/// sigmoid output unit, over 2d-dimensional pair inputs.
inline NetworkSpec build_scorer(const BilstmConfig& config, int embedding_dim) {
  config.validate();
  const int pair_dim = 2 * embedding_dim;
  NetworkSpec spec;
  spec.input_dim = pair_dim;
  spec.layers.push_back(LayerSpec::lstm(pair_dim, config.hidden, true));
  spec.layers.push_back(LayerSpec::lstm(2 * config.hidden, config.hidden, true));
  spec.layers.push_back(LayerSpec::dense(2 * config.hidden, config.dense_dim));
  spec.layers.push_back(LayerSpec::relu(config.dense_dim));
  spec.layers.push_back(LayerSpec::dense(config.dense_dim, 1));
  spec.layers.push_back(LayerSpec::sigmoid(1));
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Targets and loss
// ---------------------------------------------------------------------------

/// S_ab = 1 iff segments a and b share a speaker label.
inline Matrix build_targets(const std::vector<std::string>& labels) {
  const std::size_t n = labels.size();
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = labels[i] == labels[j] ? 1.0 : 0.0;
  return s;
}

inline constexpr double kBceClip = 1e-7;

/// Element-wise binary cross entropy, averaged over `normalizer` elements
/// (defaults to the element count). Predictions are clipped to
/// [1e-7, 1-1e-7]. Returns the loss and its gradient w.r.t. predictions.
inline std::pair<double, Matrix> bce_loss(const Matrix& predicted,
                                          const Matrix& target,
                                          double normalizer = 0.0) {
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
    throw ContractError("bce_loss: shape mismatch");
  const double norm =
      normalizer > 0.0 ? normalizer : static_cast<double>(predicted.size());
  double loss = 0.0;
  Matrix grad(predicted.rows(), predicted.cols());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double y = target.data()[i];
    const double p = std::clamp(predicted.data()[i], kBceClip, 1.0 - kBceClip);
    loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    grad.data()[i] = (-y / p + (1.0 - y) / (1.0 - p)) / norm;
  }
  return {loss / norm, grad};
}

// ---------------------------------------------------------------------------
// Batch processing of oversized similarity matrices
// ---------------------------------------------------------------------------

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct MatrixBlock {
  IndexRange rows;
  IndexRange cols;
};

/// Near-equal contiguous spans of [0, n): ceil(n / max_len) pieces whose
/// lengths differ by at most one.
inline std::vector<IndexRange> column_spans(std::size_t n, std::size_t max_len) {
  if (n == 0) return {};
  const std::size_t pieces = (n + max_len - 1) / max_len;
  const std::size_t base = n / pieces;
  const std::size_t extra = n % pieces;
  std::vector<IndexRange> spans;
  spans.reserve(pieces);
  std::size_t cursor = 0;
  for (std::size_t p = 0; p < pieces; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    spans.push_back({cursor, cursor + len});
    cursor += len;
  }
  return spans;
}

/// The Fig.-2 style decomposition of an n x n matrix into row-span x
/// column-span blocks; each row is processed once per column span.
inline std::vector<MatrixBlock> partition_batches(std::size_t n, int max_seq_len) {
  if (max_seq_len < 1) throw ContractError("partition_batches: max_seq_len >= 1");
  const auto spans = column_spans(n, static_cast<std::size_t>(max_seq_len));
  std::vector<MatrixBlock> blocks;
  blocks.reserve(spans.size() * spans.size());
  for (const auto& rows : spans)
    for (const auto& cols : spans) blocks.push_back({rows, cols});
  return blocks;
}

/// Bytes needed to hold the full n x n x 2d pair-input tensor.
inline double estimate_memory(std::size_t n, std::size_t d,
                              std::size_t bytes_per_value = 4) {
  return static_cast<double>(n) * static_cast<double>(n) *
         (2.0 * static_cast<double>(d)) * static_cast<double>(bytes_per_value);
}

// ---------------------------------------------------------------------------
// Training and prediction
// ---------------------------------------------------------------------------

struct RecordingEmbeddingSet {
  std::string recording_id;
  std::vector<std::string> utterance_ids;
  Matrix embeddings;  // n x d
  Matrix targets;     // n x n in {0,1}; empty when only predicting
};

namespace bilstm_detail {

inline Matrix pair_sequence(const Matrix& embeddings, std::size_t anchor,
                            IndexRange cols) {
  const std::size_t d = embeddings.cols();
  Matrix x(cols.size(), 2 * d);
  const double* xa = embeddings.row(anchor);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    double* row = x.row(j);
    std::copy(xa, xa + d, row);
    const double* xb = embeddings.row(cols.begin + j);
    std::copy(xb, xb + d, row + d);
  }
  return x;
}

}  // namespace bilstm_detail

struct BilstmModel {
  NetworkSpec spec;
  NetworkParams params;
  std::vector<double> epoch_loss;
};

/// SGD over anchor rows in seeded random order. For each row, the pair
/// sequence is run span by span (state reset at every span start), the BCE
/// over the whole row is accumulated, and one parameter update is applied.
inline BilstmModel train_bilstm(const std::vector<RecordingEmbeddingSet>& recordings,
                                const BilstmConfig& config) {
  config.validate();
  if (recordings.empty()) throw DataError("train_bilstm: no recordings");
  const std::size_t d = recordings.front().embeddings.cols();
  for (const auto& rec : recordings) {
    if (rec.embeddings.cols() != d)
      throw ContractError("train_bilstm: inconsistent embedding dimension");
    if (rec.targets.rows() != rec.embeddings.rows() ||
        rec.targets.cols() != rec.embeddings.rows())
      throw ContractError("train_bilstm: targets must be n x n");
  }

  BilstmModel model;
  model.spec = build_scorer(config, static_cast<int>(d));
  model.params = init_params(model.spec, config.seed);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t rows_seen = 0;
    for (std::size_t ri = 0; ri < recordings.size(); ++ri) {
      const auto& rec = recordings[ri];
      const std::size_t n = rec.embeddings.rows();
      if (n == 0) continue;
      const auto spans =
          column_spans(n, static_cast<std::size_t>(config.max_seq_len));

      std::vector<std::size_t> row_order(n);
      std::iota(row_order.begin(), row_order.end(), std::size_t{0});
      Rng rng(mix_seed(config.seed,
                       0xab1e0ULL + 977u * static_cast<std::uint64_t>(epoch) + ri));
      rng.shuffle(row_order);

      for (std::size_t anchor : row_order) {
        NetworkGrads row_grads = zero_grads(model.params);
        double row_loss = 0.0;
        for (const IndexRange& span : spans) {
          const Matrix x = bilstm_detail::pair_sequence(rec.embeddings, anchor, span);
          ForwardCache cache;
          const Matrix out = forward(model.spec, model.params, x, Mode::kTrain, &cache);
          Matrix target(span.size(), 1);
          for (std::size_t j = 0; j < span.size(); ++j)
            target(j, 0) = rec.targets(anchor, span.begin + j);
          auto [loss, dout] = bce_loss(out, target, static_cast<double>(n));
          row_loss += loss;
          const BackwardResult back = backward(model.spec, model.params, cache, dout);
          row_grads.accumulate(back.grads);
        }
        sgd_step(model.params, row_grads, config.learning_rate);
        loss_sum += row_loss;
        ++rows_seen;
      }
    }
    const double mean_loss = rows_seen > 0 ? loss_sum / rows_seen : 0.0;
    if (!std::isfinite(mean_loss))
      throw NumericalError(format("train_bilstm: divergence at epoch %d", epoch + 1));
    model.epoch_loss.push_back(mean_loss);
    log_info("bilstm epoch %d/%d: loss %.5f", epoch + 1, config.epochs, mean_loss);
  }
  return model;
}

/// Row-by-row prediction with the same span decomposition used in training,
/// then symmetrization S <- (S + S^T)/2. With max_seq_len >= n the single
/// span is the unbatched path, bit for bit.
inline SimilarityMatrix predict_similarity(const NetworkSpec& spec,
                                           NetworkParams& params,
                                           const Matrix& embeddings,
                                           const std::vector<std::string>& ids,
                                           const BilstmConfig& config) {
  config.validate();
  const std::size_t n = embeddings.rows();
  if (ids.size() != n) throw ContractError("predict_similarity: ids size mismatch");
  if (static_cast<int>(2 * embeddings.cols()) != spec.input_dim)
    throw ContractError("predict_similarity: embedding dim does not match scorer");

  Matrix raw(n, n);
  const auto spans = column_spans(n, static_cast<std::size_t>(config.max_seq_len));
  for (std::size_t anchor = 0; anchor < n; ++anchor) {
    for (const IndexRange& span : spans) {
      const Matrix x = bilstm_detail::pair_sequence(embeddings, anchor, span);
      const Matrix out = forward(spec, params, x, Mode::kInfer);
      for (std::size_t j = 0; j < span.size(); ++j)
        raw(anchor, span.begin + j) = out(j, 0);
    }
  }

  SimilarityMatrix sim;
  sim.ids = ids;
  sim.values = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      sim.values(i, j) = 0.5 * (raw(i, j) + raw(j, i));
  return sim;
}

// ---------------------------------------------------------------------------
// k-fold cross-validation split
// ---------------------------------------------------------------------------

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Recordings shuffled with the seed and dealt round-robin: every recording
/// lands in exactly one test fold and fold sizes differ by at most one.
inline std::vector<Fold> kfold_split(const std::vector<std::string>& recording_ids,
                                     int k, std::uint64_t seed) {
  if (k < 1) throw ContractError("kfold_split: k must be >= 1");
  if (recording_ids.size() < static_cast<std::size_t>(k))
    throw ValidationError(format("kfold_split: %zu recordings < k = %d",
                                 recording_ids.size(), k));
  std::vector<std::string> shuffled = recording_ids;
  Rng rng(mix_seed(seed, 0xf01d5ULL));
  rng.shuffle(shuffled);

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < shuffled.size(); ++i)
    folds[i % static_cast<std::size_t>(k)].test.push_back(shuffled[i]);
  for (auto& fold : folds)
    for (const auto& id : shuffled)
      if (std::find(fold.test.begin(), fold.test.end(), id) == fold.test.end())
        fold.train.push_back(id);
  return folds;
}

}  // namespace diarkit

#endif  // DIARKIT_BILSTM_HPP
