// diarkit/pipeline.hpp
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
// Stage orchestration over the on-disk artifact layout. Every stage is
// idempotent for a fixed config and seed, writes a manifest of its output
// digests, and refuses inputs whose digests do not match what the producing
// stage recorded (no silent mixing of artifacts across seeds).

#ifndef DIARKIT_PIPELINE_HPP
#define DIARKIT_PIPELINE_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "diarkit/audio_io.hpp"
#include "diarkit/bilstm.hpp"
#include "diarkit/clustering.hpp"
#include "diarkit/config.hpp"
#include "diarkit/der.hpp"
#include "diarkit/features.hpp"
#include "diarkit/plda.hpp"
#include "diarkit/similarity.hpp"
#include "diarkit/sweep.hpp"
#include "diarkit/synthetic.hpp"
#include "diarkit/vad.hpp"
#include "diarkit/xvector.hpp"

namespace diarkit {

namespace fs = std::filesystem;

struct SystemResult {
  std::string scorer;
  std::string clusterer;
  double best_threshold = 0.0;
  double der_percent = 0.0;
};

class Pipeline {
 public:
  Pipeline(KeyValueConfig kv, PipelineConfig cfg)
      : kv_(std::move(kv)), cfg_(std::move(cfg)) {}

  explicit Pipeline(const KeyValueConfig& kv)
      : Pipeline(kv, PipelineConfig::from(kv)) {}

  const PipelineConfig& config() const { return cfg_; }

  // -------------------------------------------------------------------
  // prepare: corpus, features, VAD, segments, training utterances
  // -------------------------------------------------------------------
  void prepare() {
    log_info("stage prepare");
    fs::create_directories(out("prepared"));
    fs::create_directories(out("prepared/train_utts"));

    const CorpusManifest manifest = load_or_generate_corpus();
    std::map<std::string, std::string> outputs;
    outputs["corpus/manifest.tsv"] = "";

    std::vector<SegmentEntry> all_segments;
    std::vector<DiarizationAnnotation> references;
    std::vector<std::pair<std::string, std::string>> utt2spk;

    for (const auto& entry : manifest.entries) {
      const AudioSignal signal = read_wav(entry.audio_path, entry.recording_id);
      if (signal.samples.empty())
        throw DataError("prepare: empty recording " + entry.recording_id);
      const auto anns = parse_rttm(entry.annotation_path);
      const DiarizationAnnotation* ref = nullptr;
      for (const auto& a : anns)
        if (a.recording_id == entry.recording_id) ref = &a;
      if (ref == nullptr)
        throw DataError("prepare: no annotation for " + entry.recording_id);
      references.push_back(*ref);

      const FeatureMatrix raw = compute_mfcc(signal, cfg_.features);
      const VadDecision vad = energy_vad(raw, cfg_.vad);
      FeatureMatrix norm;
      switch (cfg_.cmvn_mode) {
        case CmvnMode::kRecording: norm = cmvn(raw); break;
        case CmvnMode::kSliding:
          norm = sliding_cmn(raw, cfg_.sliding_window_frames, true);
          break;
        case CmvnMode::kNone: norm = raw; break;
      }
      const std::string feat_rel = "prepared/" + entry.recording_id + ".feats";
      write_feature_archive(out(feat_rel), norm);
      outputs[feat_rel] = "";

      const std::string vad_rel = "prepared/" + entry.recording_id + ".vad";
      write_vad(out(vad_rel), vad);
      outputs[vad_rel] = "";

      const auto regions =
          speech_regions(vad, cfg_.features.frame_shift_ms, cfg_.vad_min_region);
      const SegmentTable segs =
          uniform_segments(regions, entry.recording_id, cfg_.segmentation.window,
                           cfg_.segmentation.period, cfg_.segmentation.min_tail);
      for (const auto& s : segs.segments)
        all_segments.push_back(SegmentEntry{s.utterance_id, s.recording_id, s.start, s.end});

      // training utterances from 30s-chunked reference turns, train split only
      if (entry.split == "train") {
        const DiarizationAnnotation chunked =
            chunk_speakers(*ref, cfg_.segmentation.chunk_seconds);
        int utt_index = 0;
        for (const auto& turn : chunked.turns) {
          const Matrix utt = vad_filtered_frames(norm, vad, turn.onset, turn.offset());
          if (utt.rows() == 0) continue;
          const std::string utt_id =
              format("%s-utt%04d", entry.recording_id.c_str(), utt_index++);
          FeatureMatrix fm;
          fm.values = utt;
          fm.frame_shift_ms = cfg_.features.frame_shift_ms;
          const std::string rel = "prepared/train_utts/" + utt_id + ".feats";
          write_feature_archive(out(rel), fm);
          outputs[rel] = "";
          utt2spk.emplace_back(utt_id, base_speaker(turn.speaker_id));
        }
      }
    }

    write_segments(out("prepared/segments"), all_segments);
    outputs["prepared/segments"] = "";
    write_utt2spk(out("prepared/utt2spk"), utt2spk);
    outputs["prepared/utt2spk"] = "";
    write_rttm(out("prepared/ref.rttm"), references);
    outputs["prepared/ref.rttm"] = "";

    write_stage_manifest("prepare", {"corpus", "features", "vad", "segmentation"},
                         outputs);
  }

  // -------------------------------------------------------------------
  // train-extractor
  // -------------------------------------------------------------------
  void train_extractor_stage() {
    log_info("stage train-extractor");
    check_upstream("prepare", {"prepared/utt2spk"});
    fs::create_directories(out("models"));

    const auto utt2spk = parse_utt2spk(out("prepared/utt2spk"));
    if (utt2spk.empty()) throw DataError("train-extractor: no training utterances");

    std::vector<std::string> speakers;
    for (const auto& [utt, spk] : utt2spk)
      if (std::find(speakers.begin(), speakers.end(), spk) == speakers.end())
        speakers.push_back(spk);
    std::sort(speakers.begin(), speakers.end());

    std::vector<Matrix> features;
    std::vector<int> labels;
    for (const auto& [utt, spk] : utt2spk) {
      const std::string rel = "prepared/train_utts/" + utt + ".feats";
      check_upstream("prepare", {rel});
      features.push_back(
          read_feature_archive(out(rel), cfg_.features.frame_shift_ms).values);
      labels.push_back(static_cast<int>(
          std::find(speakers.begin(), speakers.end(), spk) - speakers.begin()));
    }

    const XvecConfig xc = xvec_config(static_cast<int>(speakers.size()));
    const ExtractorModel model = train_extractor(features, labels, xc);

    write_params(out("models/extractor.dknn"), model.params);
    {
      std::ofstream sp(out("models/extractor_speakers.txt"));
      for (const auto& s : speakers) sp << s << '\n';
    }
    {
      std::ofstream lg(out("models/extractor_log.txt"));
      for (std::size_t e = 0; e < model.report.epoch_loss.size(); ++e)
        lg << e + 1 << '\t' << format("%.6f", model.report.epoch_loss[e]) << '\t'
           << format("%.4f", model.report.epoch_accuracy[e]) << '\n';
    }
    write_stage_manifest("train-extractor", {"extractor"},
                         {{"models/extractor.dknn", ""},
                          {"models/extractor_speakers.txt", ""},
                          {"models/extractor_log.txt", ""}});
  }

  // -------------------------------------------------------------------
  // extract embeddings
  // -------------------------------------------------------------------
  void extract_stage() {
    log_info("stage extract");
    check_upstream("prepare", {"prepared/segments"});
    check_upstream("train-extractor",
                   {"models/extractor.dknn", "models/extractor_speakers.txt"});
    fs::create_directories(out("embeddings"));

    const auto speakers = read_lines(out("models/extractor_speakers.txt"));
    const XvecConfig xc = xvec_config(static_cast<int>(speakers.size()));
    const NetworkSpec spec = build_extractor(xc);
    NetworkParams params = read_params(out("models/extractor.dknn"));
    if (params.spec_digest != spec.digest())
      throw ValidationError("extract: extractor params do not match current config");

    const auto segments = parse_segments(out("prepared/segments"));
    std::map<std::string, std::string> outputs;
    const auto recs = recording_ids();
    for (const auto& rec : recs) {
      check_upstream("prepare", {"prepared/" + rec + ".feats"});
      const FeatureMatrix feats = read_feature_archive(
          out("prepared/" + rec + ".feats"), cfg_.features.frame_shift_ms);
      SegmentTable table;
      table.window = cfg_.segmentation.window;
      table.period = cfg_.segmentation.period;
      for (const auto& s : segments)
        if (s.recording_id == rec)
          table.segments.push_back(Segment{s.utterance_id, s.recording_id, s.start, s.end});
      EmbeddingSequence seq = extract_embeddings(spec, params, table, feats, rec);
      const std::string rel = "embeddings/" + rec + ".dkxv";
      write_embeddings(out(rel), seq);
      outputs[rel] = "";
    }
    write_stage_manifest("extract", {"extractor", "segmentation"}, outputs);
  }

  // -------------------------------------------------------------------
  // train-plda
  // -------------------------------------------------------------------
  void train_plda_stage() {
    log_info("stage train-plda");
    fs::create_directories(out("models"));
    const auto refs = load_references();

    std::vector<std::vector<double>> embeddings;
    std::vector<std::string> labels;
    for (const auto& entry : corpus_entries()) {
      if (entry.split != "train") continue;
      const std::string rel = "embeddings/" + entry.recording_id + ".dkxv";
      check_upstream("extract", {rel});
      EmbeddingSequence seq =
          read_embeddings(out(rel), entry.recording_id, cfg_.segmentation.window,
                          cfg_.segmentation.period);
      if (cfg_.plda.length_norm) length_normalize(seq);
      const auto& ref = refs.at(entry.recording_id);
      const auto seg_spans = segment_spans(seq);
      for (std::size_t i = 0; i < seq.entries.size(); ++i) {
        const std::string spk =
            dominant_speaker(ref, seg_spans[i].first, seg_spans[i].second);
        const long chunk_idx = std::lround(std::floor(
            0.5 * (seg_spans[i].first + seg_spans[i].second) /
            cfg_.segmentation.chunk_seconds));
        labels.push_back(
            format("%s|%s#%ld", entry.recording_id.c_str(), spk.c_str(), chunk_idx));
        embeddings.push_back(seq.entries[i].vector);
      }
    }
    if (embeddings.empty()) throw DataError("train-plda: no training embeddings");

    PldaPipelineModel model;
    model.lda = fit_lda(embeddings, labels, cfg_.plda.lda_dim);
    std::vector<std::vector<double>> projected;
    projected.reserve(embeddings.size());
    for (const auto& e : embeddings) projected.push_back(model.lda.apply(e));
    model.plda = fit_plda(projected, labels);
    write_plda_model(out("models/plda.dkpl"), model);
    write_stage_manifest("train-plda", {"plda", "segmentation"},
                         {{"models/plda.dkpl", ""}});
  }

  // -------------------------------------------------------------------
  // train-bilstm (k-fold cross-validation over recordings)
  // -------------------------------------------------------------------
  void train_bilstm_stage() {
    log_info("stage train-bilstm");
    fs::create_directories(out("models"));
    const auto refs = load_references();
    const auto recs = recording_ids();

    const auto folds = kfold_split(recs, cfg_.bilstm.folds, cfg_.seed);
    std::map<std::string, std::string> outputs;
    std::ofstream fold_file(out("models/folds.txt"));
    for (std::size_t f = 0; f < folds.size(); ++f)
      for (const auto& rec : folds[f].test) fold_file << rec << '\t' << f << '\n';
    fold_file.close();
    outputs["models/folds.txt"] = "";

    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<RecordingEmbeddingSet> train_set;
      for (const auto& rec : folds[f].train)
        train_set.push_back(load_embedding_set(rec, refs, /*with_targets=*/true));
      BilstmConfig bc = bilstm_config();
      bc.seed = mix_seed(cfg_.seed, 0xf01d0ULL + f);
      const BilstmModel model = train_bilstm(train_set, bc);
      const std::string rel = format("models/bilstm_fold%zu.dknn", f);
      write_params(out(rel), model.params);
      outputs[rel] = "";
      const std::string log_rel = format("models/bilstm_log_fold%zu.txt", f);
      std::ofstream lg(out(log_rel));
      for (std::size_t e = 0; e < model.epoch_loss.size(); ++e)
        lg << e + 1 << '\t' << format("%.6f", model.epoch_loss[e]) << '\n';
      lg.close();
      outputs[log_rel] = "";
    }
    write_stage_manifest("train-bilstm", {"bilstm"}, outputs);
  }

  // -------------------------------------------------------------------
  // score
  // -------------------------------------------------------------------
  void score_stage(Scorer scorer) {
    fs::create_directories(out("scores"));
    std::map<std::string, std::string> outputs;

    if (scorer == Scorer::kPlda) {
      log_info("stage score (plda)");
      check_upstream("train-plda", {"models/plda.dkpl"});
      const PldaPipelineModel model = read_plda_model(out("models/plda.dkpl"));
      for (const auto& rec : recording_ids()) {
        const std::string rel = "embeddings/" + rec + ".dkxv";
        check_upstream("extract", {rel});
        EmbeddingSequence seq = read_embeddings(out(rel), rec,
                                                cfg_.segmentation.window,
                                                cfg_.segmentation.period);
        if (seq.entries.size() < 2) {
          log_warn("score: %s has fewer than 2 segments; skipped", rec.c_str());
          continue;
        }
        if (cfg_.plda.length_norm) length_normalize(seq);
        std::vector<std::vector<double>> projected;
        std::vector<std::string> ids;
        for (const auto& e : seq.entries) {
          projected.push_back(model.lda.apply(e.vector));
          ids.push_back(e.utterance_id);
        }
        const PldaScoreMatrices scores =
            score_matrix(model.plda, projected, ids, cfg_.jobs);
        const std::string norm_rel = "scores/" + rec + ".plda.dksm";
        const std::string scaled_rel = "scores/" + rec + ".plda_scaled.dksm";
        write_similarity(out(norm_rel), scores.normalized);
        write_similarity(out(scaled_rel), scores.scaled);
        outputs[norm_rel] = "";
        outputs[scaled_rel] = "";
      }
      write_stage_manifest("score-plda", {"plda"}, outputs);
      return;
    }

    log_info("stage score (bilstm)");
    check_upstream("train-bilstm", {"models/folds.txt"});
    const auto fold_of = read_fold_map();
    std::map<std::size_t, NetworkParams> fold_params;
    const BilstmConfig bc = bilstm_config();
    for (const auto& rec : recording_ids()) {
      const std::string rel = "embeddings/" + rec + ".dkxv";
      check_upstream("extract", {rel});
      const EmbeddingSequence seq = read_embeddings(out(rel), rec,
                                                    cfg_.segmentation.window,
                                                    cfg_.segmentation.period);
      if (seq.entries.size() < 2) {
        log_warn("score: %s has fewer than 2 segments; skipped", rec.c_str());
        continue;
      }
      auto it = fold_of.find(rec);
      if (it == fold_of.end())
        throw MissingArtifactError("score: no fold assignment for " + rec +
                                   " (re-run train-bilstm)");
      const std::size_t fold = it->second;
      if (fold_params.find(fold) == fold_params.end()) {
        const std::string mrel = format("models/bilstm_fold%zu.dknn", fold);
        check_upstream("train-bilstm", {mrel});
        fold_params[fold] = read_params(out(mrel));
      }
      const NetworkSpec spec = build_scorer(bc, static_cast<int>(seq.dim()));
      Matrix emb(seq.entries.size(), seq.dim());
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < seq.entries.size(); ++i) {
        std::copy(seq.entries[i].vector.begin(), seq.entries[i].vector.end(),
                  emb.row(i));
        ids.push_back(seq.entries[i].utterance_id);
      }
      const SimilarityMatrix sim =
          predict_similarity(spec, fold_params[fold], emb, ids, bc);
      const std::string srel = "scores/" + rec + ".bilstm.dksm";
      write_similarity(out(srel), sim);
      outputs[srel] = "";
    }
    write_stage_manifest("score-bilstm", {"bilstm"}, outputs);
  }

  // -------------------------------------------------------------------
  // cluster + evaluate + sweep
  // -------------------------------------------------------------------

  // Similarity matrix consumed by clustering for a scorer/clusterer pair:
  // the PLDA+AHC path clusters the pre-logistic scaled scores (the paper's
  // -0.3..0.5 threshold convention); everything else uses the normalized
  // (0,1) matrix.
  std::string score_artifact(const std::string& rec, Scorer scorer,
                             Clusterer clusterer) const {
    if (scorer == Scorer::kPlda)
      return clusterer == Clusterer::kAhc ? "scores/" + rec + ".plda_scaled.dksm"
                                          : "scores/" + rec + ".plda.dksm";
    return "scores/" + rec + ".bilstm.dksm";
  }

  void cluster_stage(Scorer scorer, Clusterer clusterer, double threshold) {
    log_info("stage cluster (%s, %s, threshold %.4f)", scorer_name(scorer),
             clusterer_name(clusterer), threshold);
    fs::create_directories(out("clusters"));
    fs::create_directories(out("hyp"));

    const auto segments = parse_segments(out("prepared/segments"));
    std::vector<DiarizationAnnotation> hyps;
    std::map<std::string, std::string> outputs;
    for (const auto& rec : recording_ids()) {
      const std::string srel = score_artifact(rec, scorer, clusterer);
      check_upstream(scorer == Scorer::kPlda ? "score-plda" : "score-bilstm", {srel});
      const SimilarityMatrix sim = read_similarity(out(srel));
      const ClusterAssignment labels =
          cluster_at(sim, clusterer, threshold, spectral_options());
      const SegmentTable table = table_for(sim.ids, segments);
      hyps.push_back(labels_to_annotation(table, labels, rec));

      const std::string lrel = format("clusters/%s.%s.%s.labels", rec.c_str(),
                                      scorer_name(scorer), clusterer_name(clusterer));
      std::ofstream lf(out(lrel));
      for (std::size_t i = 0; i < sim.ids.size(); ++i)
        lf << sim.ids[i] << '\t' << labels.labels[i] << '\n';
      lf.close();
      outputs[lrel] = "";
    }
    const std::string hrel =
        format("hyp/%s_%s.rttm", scorer_name(scorer), clusterer_name(clusterer));
    write_rttm(out(hrel), hyps);
    outputs[hrel] = "";
    write_stage_manifest(format("cluster-%s-%s", scorer_name(scorer),
                                clusterer_name(clusterer)),
                         {"clustering"}, outputs);
  }

  std::vector<std::pair<std::string, DERReport>> evaluate_stage(Scorer scorer,
                                                                Clusterer clusterer) {
    log_info("stage evaluate (%s, %s)", scorer_name(scorer), clusterer_name(clusterer));
    fs::create_directories(out("der"));
    const std::string hrel =
        format("hyp/%s_%s.rttm", scorer_name(scorer), clusterer_name(clusterer));
    if (!file_exists(out(hrel)))
      throw MissingArtifactError("evaluate: missing " + hrel + " (run cluster)");
    const auto hyps = parse_rttm(out(hrel));
    const auto refs = load_references();

    std::vector<std::pair<std::string, DERReport>> rows;
    std::vector<DERReport> pool;
    for (const auto& entry : corpus_entries()) {
      if (entry.split != "eval") continue;
      const DiarizationAnnotation* hyp = nullptr;
      for (const auto& h : hyps)
        if (h.recording_id == entry.recording_id) hyp = &h;
      DiarizationAnnotation empty_hyp;
      empty_hyp.recording_id = entry.recording_id;
      const DERReport report = compute_der(refs.at(entry.recording_id),
                                           hyp ? *hyp : empty_hyp, cfg_.collar);
      rows.emplace_back(entry.recording_id, report);
      pool.push_back(report);
    }
    if (pool.empty()) throw DataError("evaluate: no eval-split recordings");
    rows.emplace_back("ALL", pool_reports(pool));

    const std::string crel =
        format("der/%s_%s.csv", scorer_name(scorer), clusterer_name(clusterer));
    std::ofstream csv(out(crel));
    csv << "recording,err_spk,err_fas,err_miss,T,der_percent\n";
    for (const auto& [rec, r] : rows)
      csv << rec << ',' << format("%.3f", r.err_spk) << ','
          << format("%.3f", r.err_fas) << ',' << format("%.3f", r.err_miss) << ','
          << format("%.3f", r.scored_time) << ',' << format("%.2f", r.der_percent)
          << '\n';
    csv.close();
    return rows;
  }

  SweepResult sweep_stage(Scorer scorer, Clusterer clusterer) {
    log_info("stage sweep (%s, %s)", scorer_name(scorer), clusterer_name(clusterer));
    fs::create_directories(out("der"));
    const auto refs = load_references();
    const auto segments = parse_segments(out("prepared/segments"));

    std::vector<SimilarityMatrix> sims;
    std::vector<SegmentTable> tables;
    std::vector<std::string> ids;
    for (const auto& entry : corpus_entries()) {
      if (entry.split != "eval") continue;
      const std::string srel = score_artifact(entry.recording_id, scorer, clusterer);
      check_upstream(scorer == Scorer::kPlda ? "score-plda" : "score-bilstm", {srel});
      sims.push_back(read_similarity(out(srel)));
      tables.push_back(table_for(sims.back().ids, segments));
      ids.push_back(entry.recording_id);
    }
    if (sims.empty()) throw DataError("sweep: no eval-split score matrices");

    std::vector<SweepCase> cases(sims.size());
    for (std::size_t i = 0; i < sims.size(); ++i) {
      cases[i].similarity = &sims[i];
      cases[i].segments = &tables[i];
      cases[i].reference = &refs.at(ids[i]);
      cases[i].recording_id = ids[i];
    }

    double lo = cfg_.clustering.sweep_lo, hi = cfg_.clustering.sweep_hi,
           step = cfg_.clustering.sweep_step;
    if (scorer == Scorer::kPlda && clusterer == Clusterer::kAhc) {
      lo = cfg_.clustering.plda_sweep_lo;
      hi = cfg_.clustering.plda_sweep_hi;
      step = cfg_.clustering.plda_sweep_step;
    }
    const SweepResult result = sweep_thresholds(cases, clusterer, lo, hi, step,
                                                cfg_.collar, spectral_options(),
                                                cfg_.jobs);
    const std::string rel = format("der/sweep_%s_%s.csv", scorer_name(scorer),
                                   clusterer_name(clusterer));
    std::ofstream csv(out(rel));
    csv << "threshold,DER\n";
    for (const auto& row : result.table)
      csv << format("%.4f", row.threshold) << ',' << format("%.4f", row.der_percent)
          << '\n';
    csv.close();
    return result;
  }

  // -------------------------------------------------------------------
  // run-all
  // -------------------------------------------------------------------
  std::vector<SystemResult> run_all() {
    prepare();
    train_extractor_stage();
    extract_stage();
    train_plda_stage();
    score_stage(Scorer::kPlda);
    train_bilstm_stage();
    score_stage(Scorer::kBilstm);

    const std::vector<std::pair<Scorer, Clusterer>> systems = {
        {Scorer::kPlda, Clusterer::kAhc},
        {Scorer::kBilstm, Clusterer::kSpectral},
        {Scorer::kBilstm, Clusterer::kAhc},
    };
    std::vector<SystemResult> results;
    for (const auto& [scorer, clusterer] : systems) {
      const SweepResult sweep = sweep_stage(scorer, clusterer);
      cluster_stage(scorer, clusterer, sweep.best_threshold);
      const auto rows = evaluate_stage(scorer, clusterer);
      SystemResult r;
      r.scorer = scorer_name(scorer);
      r.clusterer = clusterer_name(clusterer);
      r.best_threshold = sweep.best_threshold;
      r.der_percent = rows.back().second.der_percent;
      results.push_back(r);
    }
    write_report(results);
    return results;
  }

  // -------------------------------------------------------------------
  // shared helpers (public: the CLI and tests reuse them)
  // -------------------------------------------------------------------

  std::string out(const std::string& rel) const {
    return (fs::path(cfg_.out_dir) / rel).string();
  }

  std::vector<ManifestEntry> corpus_entries() {
    if (entries_.empty()) {
      const std::string path = cfg_.corpus.manifest.empty()
                                   ? out("corpus/manifest.tsv")
                                   : cfg_.corpus.manifest;
      if (!file_exists(path))
        throw MissingArtifactError("corpus manifest missing: " + path +
                                   " (run prepare)");
      entries_ = parse_manifest(path).entries;
    }
    return entries_;
  }

  std::vector<std::string> recording_ids() {
    std::vector<std::string> ids;
    for (const auto& e : corpus_entries()) ids.push_back(e.recording_id);
    return ids;
  }

  std::map<std::string, DiarizationAnnotation> load_references() {
    std::map<std::string, DiarizationAnnotation> refs;
    for (const auto& ann : parse_rttm(out("prepared/ref.rttm")))
      refs[ann.recording_id] = ann;
    return refs;
  }

  BilstmConfig bilstm_config() const {
    BilstmConfig bc;
    bc.hidden = cfg_.bilstm.hidden;
    bc.dense_dim = cfg_.bilstm.dense_dim;
    bc.epochs = cfg_.bilstm.epochs;
    bc.learning_rate = cfg_.bilstm.learning_rate;
    bc.max_seq_len = cfg_.bilstm.max_seq_len;
    bc.folds = cfg_.bilstm.folds;
    bc.seed = cfg_.seed;
    return bc;
  }

  XvecConfig xvec_config(int num_speakers) const {
    XvecConfig xc;
    xc.feature_dim = cfg_.features.num_ceps;
    xc.embedding_dim = cfg_.extractor.embedding_dim;
    xc.num_speakers = num_speakers;
    xc.min_frames_per_chunk = cfg_.extractor.min_frames;
    xc.max_frames_per_chunk = cfg_.extractor.max_frames;
    xc.epochs = cfg_.extractor.epochs;
    xc.learning_rate = cfg_.extractor.learning_rate;
    xc.shrink = cfg_.extractor.shrink;
    xc.chunks_per_epoch = cfg_.extractor.chunks_per_epoch;
    xc.seed = cfg_.seed;
    return xc;
  }

  SpectralOptions spectral_options() const {
    SpectralOptions opts;
    opts.k = cfg_.clustering.sc_k;
    opts.kmeans_restarts = cfg_.clustering.kmeans_restarts;
    opts.seed = cfg_.seed;
    return opts;
  }

  static const char* scorer_name(Scorer s) {
    return s == Scorer::kPlda ? "plda" : "bilstm";
  }
  static const char* clusterer_name(Clusterer c) {
    return c == Clusterer::kAhc ? "ahc" : "sc";
  }

 private:
  CorpusManifest load_or_generate_corpus() {
    if (!cfg_.corpus.manifest.empty()) return parse_manifest(cfg_.corpus.manifest);

    fs::create_directories(out("corpus"));
    SyntheticCorpusOptions opt;
    opt.num_speakers = cfg_.corpus.synth_speakers;
    opt.num_recordings = cfg_.corpus.synth_recordings;
    opt.duration = cfg_.corpus.synth_duration;
    opt.turn_min = cfg_.corpus.synth_turn_min;
    opt.turn_max = cfg_.corpus.synth_turn_max;
    opt.seed = cfg_.seed;
    const SyntheticCorpus corpus = generate_synthetic_corpus(opt);

    CorpusManifest manifest;
    for (std::size_t r = 0; r < corpus.signals.size(); ++r) {
      const std::string rec = corpus.signals[r].recording_id;
      const std::string wav = out("corpus/" + rec + ".wav");
      const std::string rttm = out("corpus/" + rec + ".rttm");
      write_wav(wav, corpus.signals[r]);
      write_rttm(rttm, {corpus.annotations[r]});
      manifest.entries.push_back(ManifestEntry{
          rec, wav, rttm,
          static_cast<int>(r) < cfg_.corpus.train_recordings ? "train" : "eval"});
    }
    write_manifest(out("corpus/manifest.tsv"), manifest);
    entries_ = manifest.entries;
    return manifest;
  }

  Matrix vad_filtered_frames(const FeatureMatrix& feats, const VadDecision& vad,
                             double start_s, double end_s) const {
    const double shift_s = cfg_.features.frame_shift_ms / 1000.0;
    long first = std::lround(start_s / shift_s);
    long last = std::lround(end_s / shift_s);
    first = std::clamp(first, 0L, static_cast<long>(feats.num_frames()));
    last = std::clamp(last, 0L, static_cast<long>(feats.num_frames()));
    std::vector<std::size_t> keep;
    for (long f = first; f < last; ++f)
      if (vad[static_cast<std::size_t>(f)]) keep.push_back(static_cast<std::size_t>(f));
    Matrix frames(keep.size(), feats.dim());
    for (std::size_t i = 0; i < keep.size(); ++i)
      std::copy(feats.values.row(keep[i]), feats.values.row(keep[i]) + feats.dim(),
                frames.row(i));
    return frames;
  }

  static void write_vad(const std::string& path, const VadDecision& vad) {
    std::ofstream out(path);
    for (bool b : vad) out << (b ? '1' : '0');
    out << '\n';
  }

  static std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
      if (!trim(line).empty()) lines.push_back(trim(line));
    return lines;
  }

  std::map<std::string, std::size_t> read_fold_map() {
    std::map<std::string, std::size_t> fold_of;
    for (const auto& line : read_lines(out("models/folds.txt"))) {
      const auto fields = split_whitespace(line);
      if (fields.size() != 2) throw FormatError("folds.txt: bad line " + line);
      fold_of[fields[0]] = static_cast<std::size_t>(std::stoul(fields[1]));
    }
    return fold_of;
  }

  // segment spans (start, end seconds) for each embedding entry, by id lookup
  std::vector<std::pair<double, double>> segment_spans(const EmbeddingSequence& seq) {
    const auto segments = parse_segments(out("prepared/segments"));
    std::map<std::string, std::pair<double, double>> by_id;
    for (const auto& s : segments) by_id[s.utterance_id] = {s.start, s.end};
    std::vector<std::pair<double, double>> spans;
    for (const auto& e : seq.entries) {
      auto it = by_id.find(e.utterance_id);
      if (it == by_id.end())
        throw MissingArtifactError("segment table has no entry for " + e.utterance_id);
      spans.push_back(it->second);
    }
    return spans;
  }

  SegmentTable table_for(const std::vector<std::string>& ids,
                         const std::vector<SegmentEntry>& segments) const {
    std::map<std::string, const SegmentEntry*> by_id;
    for (const auto& s : segments) by_id[s.utterance_id] = &s;
    SegmentTable table;
    table.window = cfg_.segmentation.window;
    table.period = cfg_.segmentation.period;
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw MissingArtifactError("segment table has no entry for " + id);
      table.segments.push_back(Segment{id, it->second->recording_id,
                                       it->second->start, it->second->end});
    }
    return table;
  }

  static std::string dominant_speaker(const DiarizationAnnotation& ref, double start,
                                      double end) {
    std::string best = "none";
    double best_overlap = 0.0;
    for (const auto& t : ref.turns) {
      const double ov = std::min(end, t.offset()) - std::max(start, t.onset);
      if (ov > best_overlap) {
        best_overlap = ov;
        best = t.speaker_id;
      }
    }
    return best;
  }

  RecordingEmbeddingSet load_embedding_set(
      const std::string& rec, const std::map<std::string, DiarizationAnnotation>& refs,
      bool with_targets) {
    const std::string rel = "embeddings/" + rec + ".dkxv";
    check_upstream("extract", {rel});
    const EmbeddingSequence seq = read_embeddings(out(rel), rec,
                                                  cfg_.segmentation.window,
                                                  cfg_.segmentation.period);
    RecordingEmbeddingSet set;
    set.recording_id = rec;
    set.embeddings = Matrix(seq.entries.size(), seq.dim());
    for (std::size_t i = 0; i < seq.entries.size(); ++i) {
      set.utterance_ids.push_back(seq.entries[i].utterance_id);
      std::copy(seq.entries[i].vector.begin(), seq.entries[i].vector.end(),
                set.embeddings.row(i));
    }
    if (with_targets) {
      const auto spans = segment_spans(seq);
      std::vector<std::string> labels;
      for (const auto& [s, e] : spans)
        labels.push_back(dominant_speaker(refs.at(rec), s, e));
      set.targets = build_targets(labels);
    }
    return set;
  }

  // ---------------------------------------------------------------
  // stage manifests: seed + config digest + output digests
  // ---------------------------------------------------------------

  void write_stage_manifest(const std::string& stage,
                            const std::vector<std::string>& sections,
                            std::map<std::string, std::string> outputs) {
    fs::create_directories(out("stage_state"));
    std::ofstream mf(out("stage_state/" + stage + ".manifest"));
    mf << "stage " << stage << '\n';
    mf << "seed " << cfg_.seed << '\n';
    mf << format("config %016llx",
                 static_cast<unsigned long long>(cfg_.section_digest(sections, kv_)))
       << '\n';
    for (auto& [rel, digest] : outputs) {
      digest = format("%016llx",
                      static_cast<unsigned long long>(file_digest(out(rel))));
      mf << "output " << rel << ' ' << digest << '\n';
    }
    mf.close();
  }

  void check_upstream(const std::string& stage, const std::vector<std::string>& rels) {
    const std::string mpath = out("stage_state/" + stage + ".manifest");
    if (!file_exists(mpath))
      throw MissingArtifactError("missing artifacts from stage '" + stage +
                                 "': run it first");
    std::uint64_t seed = 0;
    std::map<std::string, std::string> recorded;
    for (const auto& line : read_lines(mpath)) {
      const auto fields = split_whitespace(line);
      if (fields.size() >= 2 && fields[0] == "seed")
        seed = std::stoull(fields[1]);
      else if (fields.size() >= 3 && fields[0] == "output")
        recorded[fields[1]] = fields[2];
    }
    if (seed != cfg_.seed)
      throw ValidationError(format(
          "stage '%s' artifacts were produced with seed %llu, current seed is %llu; "
          "re-run the stage", stage.c_str(),
          static_cast<unsigned long long>(seed),
          static_cast<unsigned long long>(cfg_.seed)));
    for (const auto& rel : rels) {
      auto it = recorded.find(rel);
      if (it == recorded.end())
        throw MissingArtifactError("stage '" + stage + "' did not produce " + rel +
                                   "; re-run it");
      if (!file_exists(out(rel)))
        throw MissingArtifactError("missing artifact " + rel + "; re-run stage '" +
                                   stage + "'");
      const std::string current =
          format("%016llx", static_cast<unsigned long long>(file_digest(out(rel))));
      if (current != it->second)
        throw ValidationError("stale artifact " + rel +
                              " (digest mismatch); re-run stage '" + stage + "'");
    }
  }

  void write_report(const std::vector<SystemResult>& results) {
    std::ofstream md(out("report.md"));
    md << "# Diarization comparison\n\n";
    md << "Corpus: " << (cfg_.corpus.manifest.empty() ? "synthetic" : cfg_.corpus.manifest)
       << ", seed " << cfg_.seed << ", collar " << format("%.2f", cfg_.collar)
       << " s.\n\n";
    md << "| Model design | x-vector extraction | x-vector dim | best threshold | DER% |\n";
    md << "|---|---|---|---|---|\n";
    for (const auto& r : results) {
      const std::string design =
          (r.scorer == std::string("plda") ? "PLDA scoring + " : "Bi-LSTM scoring + ") +
          std::string(r.clusterer == std::string("ahc") ? "AHC" : "SC");
      md << "| " << design << " | "
         << format("window %.1fs period %.2fs", cfg_.segmentation.window,
                   cfg_.segmentation.period)
         << " | " << effective_embedding_dim() << " | "
         << format("%.2f", r.best_threshold) << " | "
         << format("%.2f", r.der_percent) << " |\n";
    }
    md << '\n';
    const double bilstm_ahc = find_der(results, "bilstm", "ahc");
    const double bilstm_sc = find_der(results, "bilstm", "sc");
    const double plda_ahc = find_der(results, "plda", "ahc");
    md << format(
        "Ordering: Bi-LSTM+AHC %.2f%% vs Bi-LSTM+SC %.2f%% vs PLDA+AHC %.2f%% -- "
        "Bi-LSTM+AHC ranks %s.\n",
        bilstm_ahc, bilstm_sc, plda_ahc,
        (bilstm_ahc <= bilstm_sc && bilstm_ahc <= plda_ahc) ? "first" : "not first");
    md.close();
  }

  int effective_embedding_dim() const {
    XvecConfig xc;
    xc.shrink = cfg_.extractor.shrink;
    return xc.width(cfg_.extractor.embedding_dim);
  }

  static double find_der(const std::vector<SystemResult>& results,
                         const std::string& scorer, const std::string& clusterer) {
    for (const auto& r : results)
      if (r.scorer == scorer && r.clusterer == clusterer) return r.der_percent;
    return -1.0;
  }

  KeyValueConfig kv_;
  PipelineConfig cfg_;
  std::vector<ManifestEntry> entries_;
};

}  // namespace diarkit

#endif  // DIARKIT_PIPELINE_HPP
