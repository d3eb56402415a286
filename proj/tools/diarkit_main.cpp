// tools/diarkit_main.cpp
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
// Command-line front end. Exit codes: 0 success, 2 validation error,
// 3 missing upstream artifact, 4 numerical failure.

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diarkit/diarkit.hpp"

namespace {

using namespace diarkit;

struct CliOverrides {
  std::string config_path;
  std::string stage;
  long seed = -1;
  int jobs = -1;
  std::string scorer;
  std::string clusterer;
  int embedding_dim = -1;
  double window = -1.0;
  double period = -1.0;
  double collar = -1.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::string out_dir;
};

KeyValueConfig build_config(const CliOverrides& o) {
  KeyValueConfig kv;
  if (!o.config_path.empty()) kv = KeyValueConfig::load(o.config_path);
  if (o.seed >= 0) kv.set("pipeline.seed", std::to_string(o.seed));
  if (o.jobs >= 1) kv.set("pipeline.jobs", std::to_string(o.jobs));
  if (!o.scorer.empty()) kv.set("scoring.scorer", o.scorer);
  if (!o.clusterer.empty()) kv.set("clustering.clusterer", o.clusterer);
  if (o.embedding_dim > 0)
    kv.set("extractor.embedding_dim", std::to_string(o.embedding_dim));
  if (o.window > 0) kv.set("segmentation.window", format("%.6f", o.window));
  if (o.period > 0) kv.set("segmentation.period", format("%.6f", o.period));
  if (o.collar >= 0) kv.set("evaluation.collar", format("%.6f", o.collar));
  if (!o.out_dir.empty()) kv.set("pipeline.out", o.out_dir);
  return kv;
}

Scorer parse_scorer(const PipelineConfig& cfg) {
  return cfg.scorer == "plda" ? Scorer::kPlda : Scorer::kBilstm;
}

Clusterer parse_clusterer(const PipelineConfig& cfg) {
  return cfg.clustering.clusterer == "sc" ? Clusterer::kSpectral : Clusterer::kAhc;
}

double cluster_threshold(const CliOverrides& o, const PipelineConfig& cfg) {
  if (!std::isnan(o.threshold)) return o.threshold;
  return cfg.clustering.ahc_threshold;
}

int run_stage(const std::string& stage, const CliOverrides& overrides) {
  const KeyValueConfig kv = build_config(overrides);
  Pipeline pipeline(kv);
  const PipelineConfig& cfg = pipeline.config();

  if (stage == "prepare") {
    pipeline.prepare();
  } else if (stage == "train-extractor") {
    pipeline.train_extractor_stage();
  } else if (stage == "extract") {
    pipeline.extract_stage();
  } else if (stage == "train-plda") {
    pipeline.train_plda_stage();
  } else if (stage == "train-bilstm") {
    pipeline.train_bilstm_stage();
  } else if (stage == "score") {
    pipeline.score_stage(parse_scorer(cfg));
  } else if (stage == "cluster") {
    pipeline.cluster_stage(parse_scorer(cfg), parse_clusterer(cfg),
                           cluster_threshold(overrides, cfg));
  } else if (stage == "evaluate") {
    const auto rows = pipeline.evaluate_stage(parse_scorer(cfg), parse_clusterer(cfg));
    std::printf("recording        err_spk   err_fas  err_miss         T    DER%%\n");
    for (const auto& [rec, r] : rows)
      std::printf("%-14s %9.3f %9.3f %9.3f %9.3f  %6.2f\n", rec.c_str(), r.err_spk,
                  r.err_fas, r.err_miss, r.scored_time, r.der_percent);
  } else if (stage == "sweep") {
    const SweepResult result =
        pipeline.sweep_stage(parse_scorer(cfg), parse_clusterer(cfg));
    std::printf("best threshold %.4f -> DER %.2f%% (%zu thresholds evaluated)\n",
                result.best_threshold, result.best_der, result.table.size());
  } else if (stage == "run-all") {
    const auto results = pipeline.run_all();
    std::printf("system                best-threshold    DER%%\n");
    for (const auto& r : results)
      std::printf("%-8s + %-4s %16.2f %9.2f\n", r.scorer.c_str(), r.clusterer.c_str(),
                  r.best_threshold, r.der_percent);
    std::printf("report: %s\n", pipeline.out("report.md").c_str());
  } else {
    throw ValidationError("unknown stage: " + stage);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diarkit - speaker diarization pipeline"};
  app.require_subcommand(0, 1);

  CliOverrides overrides;
  app.add_option("--config", overrides.config_path, "pipeline config file");
  app.add_option("--stage", overrides.stage, "stage to run (alternative to subcommand)");
  app.add_option("--seed", overrides.seed, "override pipeline.seed");
  app.add_option("--jobs", overrides.jobs, "worker threads for parallel sections");
  app.add_option("--scorer", overrides.scorer, "plda or bilstm")
      ->check(CLI::IsMember({"plda", "bilstm"}));
  app.add_option("--clusterer", overrides.clusterer, "ahc or sc")
      ->check(CLI::IsMember({"ahc", "sc"}));
  app.add_option("--embedding-dim", overrides.embedding_dim, "x-vector dimension");
  app.add_option("--window", overrides.window, "segmentation window, seconds");
  app.add_option("--period", overrides.period, "segmentation period, seconds");
  app.add_option("--collar", overrides.collar, "DER collar, seconds");
  app.add_option("--threshold", overrides.threshold, "clustering threshold");
  app.add_option("--out", overrides.out_dir, "output directory");

  const std::vector<std::string> stages = {
      "prepare", "train-extractor", "extract",  "train-plda", "train-bilstm",
      "score",   "cluster",         "evaluate", "sweep",      "run-all"};
  for (const auto& name : stages)
    app.add_subcommand(name, "run the " + name + " stage")->fallthrough();

  CLI11_PARSE(app, argc, argv);

  std::string stage = overrides.stage;
  for (const auto* sub : app.get_subcommands()) stage = sub->get_name();
  if (stage.empty()) {
    std::fprintf(stderr, "%s\n", app.help().c_str());
    return 2;
  }

  try {
    return run_stage(stage, overrides);
  } catch (const diarkit::MissingArtifactError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const diarkit::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const diarkit::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
