// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgsorec/config.hpp"
#include "cgsorec/corpus.hpp"
#include "cgsorec/eval.hpp"
#include "cgsorec/trainer.hpp"

namespace cgsorec {

namespace fs = std::filesystem;

/// Split manifest: seed, ratios, dimensions and every split's (user, item)
/// pairs, enough to rebuild the bundle exactly.
nlohmann::json split_manifest(const SplitBundle& bundle);
SplitBundle split_from_manifest(const nlohmann::json& manifest);

/// Corpus state shared by every command after `prepare`.
struct PreparedData {
  SplitBundle split;
  SocialMatrix social;
  ItemGroups groups;

  const InteractionMatrix& eval_test(const ExperimentConfig& cfg) const {
    return cfg.eval_split == "test" ? split.test : split.debiased_test;
  }
};

/// Splits a corpus and builds the debiased test and item groups.
PreparedData prepare_corpus(const InteractionMatrix& r, const SocialMatrix& s,
                            const ExperimentConfig& cfg);

/// Dataset statistics in the layout of a corpus summary table.
nlohmann::json corpus_stats(const InteractionMatrix& r, const SocialMatrix& s);

fs::path split_manifest_path(const ExperimentConfig& cfg);
fs::path default_ckpt_dir(const ExperimentConfig& cfg, ModelTag tag);

/// prepare: loads data, writes <output_dir>/split.json and stats.json.
PreparedData cmd_prepare(const ExperimentConfig& cfg, std::ostream& log);
/// Rebuilds PreparedData from the manifest written by cmd_prepare.
PreparedData load_prepared(const ExperimentConfig& cfg);

/// Trains one model on prepared data and saves its best checkpoint.
Checkpoint train_on(const PreparedData& data, const ExperimentConfig& cfg, ModelTag tag,
                    const Checkpoint* resume, std::ostream& log);
Checkpoint cmd_train(const ExperimentConfig& cfg, ModelTag tag, const fs::path& ckpt_dir,
                     bool resume, std::ostream& log);

/// Top-max(K) lists for every user with at least one rankable slot.
std::vector<RankedList> infer_lists(const PreparedData& data, const ExperimentConfig& cfg,
                                    const DiffusionModel<double>& cgd,
                                    const DiffusionModel<double>* csd, bool unconditional);

void write_lists(const std::vector<RankedList>& lists, const fs::path& path);
std::vector<RankedList> read_lists(const fs::path& path);

void cmd_infer(const ExperimentConfig& cfg, const fs::path& cgd_dir, const fs::path& csd_dir,
               const fs::path& out_path, bool unconditional, std::ostream& log);

nlohmann::json report_json(const EvalReport& report, const ExperimentConfig& cfg);
void write_report(const EvalReport& report, const ExperimentConfig& cfg,
                  const fs::path& json_path, const fs::path& freq_tsv_path);

EvalReport evaluate_lists(const std::vector<RankedList>& lists, const PreparedData& data,
                          const ExperimentConfig& cfg);
EvalReport cmd_eval(const ExperimentConfig& cfg, const fs::path& lists_path,
                    const fs::path& report_prefix, std::ostream& log);

/// Runs inference + evaluation for each value of a guidance parameter and
/// writes <out_dir>/<param>=<value>.json plus summary.tsv.
void cmd_sweep(const ExperimentConfig& cfg, const std::string& param,
               const std::vector<std::string>& values, const fs::path& cgd_dir,
               const fs::path& csd_dir, const fs::path& out_dir, std::ostream& log);

/// Side-by-side bucket frequencies of several list files.
void cmd_bias_report(const ExperimentConfig& cfg, const std::vector<fs::path>& lists_paths,
                     const fs::path& out_tsv, std::ostream& log);

}  // namespace cgsorec
