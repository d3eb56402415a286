// tests/test_xvector.cpp
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

#include <map>
#include <set>

#include "diarkit/features.hpp"
#include "diarkit/synthetic.hpp"
#include "diarkit/xvector.hpp"
#include "support.hpp"

using namespace diarkit;

TEST_CASE("full-scale architecture matches the published sizes", "[xvector]") {
  for (int emb : {512, 128}) {
    XvecConfig cfg;
    cfg.embedding_dim = emb;
    cfg.num_speakers = 53;
    const auto rows = architecture_summary(cfg);
    REQUIRE(rows.size() == 9);

    const std::map<std::string, std::pair<int, int>> expected = {
        {"tdnn1", {13, 512}},  {"tdnn2", {1536, 512}}, {"tdnn3", {1536, 512}},
        {"tdnn4", {512, 512}}, {"tdnn5", {512, 1500}}, {"stats", {1500, 3000}},
        {"tdnn6", {3000, emb}}, {"tdnn7", {emb, 512}},  {"output", {512, 53}}};
    for (const auto& row : rows) {
      INFO(row.name);
      const auto& [in, out] = expected.at(row.name);
      CHECK(row.input_size == in);
      CHECK(row.output_size == out);
    }
  }
}

TEST_CASE("shrunk widths stay shape-consistent", "[xvector]") {
  XvecConfig cfg;
  cfg.embedding_dim = 512;
  cfg.num_speakers = 4;
  cfg.shrink = 1.0 / 64.0;
  const NetworkSpec spec = build_extractor(cfg);  // validates internally
  const auto rows = architecture_summary(cfg);
  CHECK(rows[0].output_size == 8);   // 512/64
  CHECK(rows[1].input_size == 24);   // 3 x 8 spliced
  // whatever the rounded widths, the chain must compose
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("shrunk extractor gradient check", "[xvector]") {
  XvecConfig cfg;
  cfg.embedding_dim = 512;
  cfg.num_speakers = 3;
  cfg.shrink = 1.0 / 64.0;
  const NetworkSpec spec = build_extractor(cfg);
  NetworkParams params = init_params(spec, 21);
  Rng rng(22);
  const Matrix x = test::random_matrix(20, 13, rng);
  CHECK(gradient_check(spec, params, x, test::probe_loss(23), 500, 1e-5, 7) < 1e-6);
}

TEST_CASE("training example plans are balanced and deterministic", "[xvector]") {
  Rng rng(31);
  std::vector<Matrix> utts;
  std::vector<int> labels;
  for (int u = 0; u < 8; ++u) {
    utts.push_back(test::random_matrix(
        static_cast<std::size_t>(rng.uniform_int(20, 120)), 13, rng));
    labels.push_back(u % 2);
  }
  XvecConfig cfg;
  cfg.num_speakers = 2;
  cfg.chunks_per_epoch = 100;

  const auto plan_a = make_training_examples(utts, labels, cfg, 99);
  const auto plan_b = make_training_examples(utts, labels, cfg, 99);
  REQUIRE(plan_a.size() == 100);
  std::map<int, int> counts;
  for (const auto& c : plan_a) {
    ++counts[c.speaker];
    CHECK(c.length >= 16);
    CHECK(c.length <= 50);
    CHECK(c.offset + c.length <= utts[c.utterance].rows());
  }
  CHECK(counts[0] == 50);
  CHECK(counts[1] == 50);

  // fixed seed reproduces the identical chunk sequence
  for (std::size_t i = 0; i < plan_a.size(); ++i) {
    CHECK(plan_a[i].utterance == plan_b[i].utterance);
    CHECK(plan_a[i].offset == plan_b[i].offset);
    CHECK(plan_a[i].length == plan_b[i].length);
    CHECK(plan_a[i].speaker == plan_b[i].speaker);
  }
}

TEST_CASE("an utterance of exactly min frames yields whole-utterance chunks",
          "[xvector]") {
  std::vector<Matrix> utts = {Matrix(16, 13, 0.5), Matrix(40, 13, 0.5)};
  std::vector<int> labels = {0, 1};
  XvecConfig cfg;
  cfg.num_speakers = 2;
  cfg.chunks_per_epoch = 40;
  const auto plan = make_training_examples(utts, labels, cfg, 5);
  for (const auto& c : plan)
    if (c.utterance == 0) {
      CHECK(c.offset == 0);
      CHECK(c.length == 16);
    }
}

TEST_CASE("a speaker without usable utterances is a data error", "[xvector]") {
  std::vector<Matrix> utts = {Matrix(40, 13, 0.5), Matrix(10, 13, 0.5)};
  std::vector<int> labels = {0, 1};  // speaker 1 only has a 10-frame utterance
  XvecConfig cfg;
  cfg.num_speakers = 2;
  CHECK_THROWS_AS(make_training_examples(utts, labels, cfg, 5), DataError);
}

namespace {

// two-speaker training set from the synthetic corpus front end
struct TinyCorpus {
  std::vector<Matrix> utterances;
  std::vector<int> labels;
};

TinyCorpus tiny_corpus(std::uint64_t seed) {
  const SyntheticCorpus c = generate_synthetic_corpus(2, 1, 90.0, 2.0, 5.0, seed);
  FrameSpec fs;
  const FeatureMatrix feats = cmvn(compute_mfcc(c.signals[0], fs));
  TinyCorpus out;
  const double shift = fs.frame_shift_ms / 1000.0;
  for (const auto& turn : c.annotations[0].turns) {
    const long first = std::lround(turn.onset / shift);
    const long last = std::min<long>(std::lround(turn.offset() / shift),
                                     static_cast<long>(feats.num_frames()));
    if (last - first < 16) continue;
    out.utterances.push_back(slice_rows(feats.values, static_cast<std::size_t>(first),
                                        static_cast<std::size_t>(last - first)));
    out.labels.push_back(turn.speaker_id == "spk0" ? 0 : 1);
  }
  return out;
}

}  // namespace

TEST_CASE("extractor separates two synthetic speakers", "[xvector][training]") {
  const TinyCorpus corpus = tiny_corpus(404);
  XvecConfig cfg;
  cfg.num_speakers = 2;
  cfg.embedding_dim = 128;
  cfg.shrink = 1.0 / 32.0;
  cfg.epochs = 10;
  cfg.seed = 7;
  const ExtractorModel model = train_extractor(corpus.utterances, corpus.labels, cfg);
  REQUIRE(model.report.epoch_accuracy.size() == 10);
  CHECK(model.report.epoch_accuracy.back() >= 0.95);
  CHECK(model.report.epoch_loss.back() <= model.report.epoch_loss.front());
}

TEST_CASE("learning rate zero leaves parameters unchanged", "[xvector]") {
  const TinyCorpus corpus = tiny_corpus(405);
  XvecConfig cfg;
  cfg.num_speakers = 2;
  cfg.shrink = 1.0 / 64.0;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.chunks_per_epoch = 20;
  cfg.seed = 9;
  const ExtractorModel model = train_extractor(corpus.utterances, corpus.labels, cfg);
  const NetworkParams fresh = init_params(model.spec, cfg.seed);
  for (std::size_t l = 0; l < fresh.layers.size(); ++l)
    for (std::size_t w = 0; w < fresh.layers[l].weights.size(); ++w)
      REQUIRE(model.params.layers[l].weights[w] == fresh.layers[l].weights[w]);
}

TEST_CASE("single-speaker training is a data error", "[xvector]") {
  std::vector<Matrix> utts = {Matrix(40, 13, 0.5)};
  std::vector<int> labels = {0};
  XvecConfig cfg;
  cfg.num_speakers = 1;
  CHECK_THROWS_AS(train_extractor(utts, labels, cfg), DataError);
}

TEST_CASE("embedding extraction preserves order and determinism", "[xvector]") {
  XvecConfig cfg;
  cfg.num_speakers = 2;
  cfg.shrink = 1.0 / 64.0;
  const NetworkSpec spec = build_extractor(cfg);
  NetworkParams params = init_params(spec, 33);

  Rng rng(34);
  FeatureMatrix feats;
  feats.values = test::random_matrix(200, 13, rng);
  feats.frame_shift_ms = 10.0;

  SegmentTable table;
  table.window = 0.5;
  table.period = 0.25;
  table.segments = {{"u0", "rec", 0.0, 0.5},
                    {"u1", "rec", 0.25, 0.75},
                    {"u1-copy", "rec", 0.25, 0.75},
                    {"u2", "rec", 1.9, 2.0}};
  const EmbeddingSequence seq = extract_embeddings(spec, params, table, feats, "rec");
  REQUIRE(seq.entries.size() == 4);
  CHECK(seq.entries[0].utterance_id == "u0");
  CHECK(seq.entries[1].utterance_id == "u1");
  // identical segments produce identical embeddings
  CHECK(seq.entries[1].vector == seq.entries[2].vector);
  const std::size_t emb_dim = static_cast<std::size_t>(cfg.width(cfg.embedding_dim));
  for (const auto& e : seq.entries) CHECK(e.vector.size() == emb_dim);

  // an empty segment lands in the exclusion list, not the output
  SegmentTable with_empty = table;
  with_empty.segments.push_back({"empty", "rec", 5.0, 5.001});
  const EmbeddingSequence seq2 =
      extract_embeddings(spec, params, with_empty, feats, "rec");
  CHECK(seq2.entries.size() == 4);
  REQUIRE(seq2.excluded.size() == 1);
  CHECK(seq2.excluded[0] == "empty");
}

TEST_CASE("embedding archive round trip", "[xvector]") {
  const auto dir = test::temp_dir("xvec");
  EmbeddingSequence seq;
  seq.recording_id = "rec7";
  seq.window = 3.0;
  seq.period = 1.0;
  seq.entries = {{"a", {1.0, 2.0, 3.0}}, {"b", {-0.5, 0.25, 0.125}}};
  const std::string path = (dir / "e.dkxv").string();
  write_embeddings(path, seq);
  const EmbeddingSequence back = read_embeddings(path, "rec7", 3.0, 1.0);
  CHECK(back.recording_id == "rec7");
  CHECK(back.window == 3.0);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].utterance_id == "a");
  CHECK(back.entries[1].vector[0] == Catch::Approx(-0.5));
}

TEST_CASE("length normalization scales to sqrt(d)", "[xvector]") {
  EmbeddingSequence seq;
  seq.entries = {{"a", {3.0, 4.0}}};
  length_normalize(seq);
  double norm = 0.0;
  for (double v : seq.entries[0].vector) norm += v * v;
  CHECK(std::sqrt(norm) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("embedding extraction is invariant to segment order", "[xvector]") {
  XvecConfig cfg;
  cfg.num_speakers = 2;
  cfg.shrink = 1.0 / 64.0;
  const NetworkSpec spec = build_extractor(cfg);
  NetworkParams params = init_params(spec, 55);
  Rng rng(56);
  FeatureMatrix feats;
  feats.values = test::random_matrix(300, 13, rng);
  feats.frame_shift_ms = 10.0;

  SegmentTable table;
  table.window = 0.5;
  table.period = 0.25;
  for (int k = 0; k < 8; ++k)
    table.segments.push_back(
        {format("u%d", k), "rec", 0.25 * k, 0.25 * k + 0.5});
  SegmentTable reversed = table;
  std::reverse(reversed.segments.begin(), reversed.segments.end());

  const EmbeddingSequence fwd = extract_embeddings(spec, params, table, feats, "rec");
  const EmbeddingSequence rev =
      extract_embeddings(spec, params, reversed, feats, "rec");
  REQUIRE(fwd.entries.size() == rev.entries.size());
  for (const auto& e : fwd.entries) {
    const auto it = std::find_if(
        rev.entries.begin(), rev.entries.end(),
        [&](const EmbeddingEntry& r) { return r.utterance_id == e.utterance_id; });
    REQUIRE(it != rev.entries.end());
    REQUIRE(it->vector == e.vector);
  }
}

TEST_CASE("trained embeddings separate speakers by cosine", "[xvector][training]") {
  // same-speaker segment pairs should be more cosine-similar than
  // cross-speaker pairs on average, measured over a synthetic recording
  const SyntheticCorpus c = generate_synthetic_corpus(2, 1, 90.0, 2.0, 5.0, 606);
  FrameSpec fs;
  const FeatureMatrix feats = cmvn(compute_mfcc(c.signals[0], fs));

  const TinyCorpus corpus = tiny_corpus(606);
  XvecConfig cfg;
  cfg.num_speakers = 2;
  cfg.shrink = 1.0 / 32.0;
  cfg.epochs = 5;
  cfg.seed = 7;
  ExtractorModel model = train_extractor(corpus.utterances, corpus.labels, cfg);

  SegmentTable table;
  table.window = 3.0;
  table.period = 3.0;
  std::vector<std::string> labels;
  for (double start = 0.0; start + 3.0 <= 90.0; start += 3.0) {
    // label a segment by the speaker owning its midpoint
    const double mid = start + 1.5;
    std::string spk;
    for (const auto& t : c.annotations[0].turns)
      if (t.onset <= mid && mid < t.offset()) spk = t.speaker_id;
    if (spk.empty()) continue;
    table.segments.push_back({format("s%04d", static_cast<int>(start)), "rec",
                              start, start + 3.0});
    labels.push_back(spk);
  }
  const EmbeddingSequence seq =
      extract_embeddings(model.spec, model.params, table, feats, "rec");
  REQUIRE(seq.entries.size() == labels.size());

  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb) + 1e-12);
  };
  double same = 0.0, cross = 0.0;
  int same_n = 0, cross_n = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const double cs = cosine(seq.entries[i].vector, seq.entries[j].vector);
      if (labels[i] == labels[j]) {
        same += cs;
        ++same_n;
      } else {
        cross += cs;
        ++cross_n;
      }
    }
  REQUIRE(same_n > 0);
  REQUIRE(cross_n > 0);
  CHECK(same / same_n > cross / cross_n);
}
