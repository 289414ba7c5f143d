// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgsorec/corpus.hpp"
#include "cgsorec/guidance.hpp"
#include "cgsorec/trainer.hpp"

namespace cgsorec {

struct ScheduleSpec {
  int steps = 20;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  NoiseSchedule build() const { return NoiseSchedule(steps, beta_start, beta_end); }
};

struct ModelConfig {
  ScheduleSpec schedule;
  std::vector<int> hidden = {200, 600};
  int time_embed_dim = 10;
  TrainConfig train;
};

/// Everything one experiment needs. Seeds for every subsystem derive from
/// `seed` via derive_seed(seed, "<subsystem>").
struct ExperimentConfig {
  std::string interactions;
  std::string social;
  std::optional<int> n_users;
  std::optional<int> n_items;
  bool symmetrize = true;

  SplitRatios ratios;
  std::optional<int> debias_cap;  // nullopt = auto
  double hot_fraction = 0.05;
  std::uint64_t seed = 0;

  ModelConfig cgd;
  ModelConfig csd;
  GuidanceConfig guidance;

  std::vector<int> ks = {5, 10};
  std::string eval_split = "debiased";  // "debiased" or "test"
  bool per_user_recall = false;
  std::string output_dir = "out";

  /// Range checks; with check_files also requires the dataset files exist.
  void validate(bool check_files) const;
  std::uint64_t subsystem_seed(const char* name) const { return derive_seed(seed, name); }
  int max_k() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Unknown keys and out-of-range values are config errors naming the field.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Applies `dotted.key=value` to a config document. The value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace cgsorec
