// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "cgsorec/corpus.hpp"
#include "cgsorec/denoiser.hpp"
#include "cgsorec/guidance.hpp"
#include "cgsorec/schedule.hpp"

namespace cgsorec {

struct TrainConfig {
  int batch_size = 400;
  double learning_rate = 1e-3;
  int epochs = 500;  // upper bound; early stopping usually ends sooner
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int patience = 20;
  int valid_k = 10;

  void validate() const;
};

/// Adaptive-moment optimizer state, shaped like the parameters.
struct AdamState {
  DenoiserParams<double> m;
  DenoiserParams<double> v;
  long step = 0;

  static AdamState zeros_like(const DenoiserParams<double>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }
};

/// One bias-corrected Adam update of `params` in place.
void optimizer_step(DenoiserParams<double>& params, const DenoiserParams<double>& grads,
                    AdamState& state, const TrainConfig& cfg);

struct Checkpoint {
  DiffusionModel<double> model;
  TrainConfig config;
  AdamState optimizer;
  std::uint64_t init_seed = 0;
  int epoch = 0;  // epochs completed
  double valid_metric = 0.0;
};

/// Held-out targets for early stopping: Recall@valid_k of unconditional
/// inference on `train` rows (train items masked) against `valid`.
struct Validation {
  const InteractionMatrix* train = nullptr;
  const InteractionMatrix* valid = nullptr;
};

struct ModelSpec {
  ModelTag tag = ModelTag::kCgd;
  std::vector<int> hidden = {200, 600};
  int time_embed_dim = 10;
  std::uint64_t init_seed = 0;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;  // state after the final epoch run
  std::vector<double> epoch_losses;
  std::vector<double> valid_metrics;
  int epochs_run = 0;
};

/// Unconditional denoiser training on the rows of `data` (rows of R for
/// the item model, rows of S for the social model). Without validation the
/// tracked metric is the negated epoch loss. `resume` continues from a
/// checkpoint, including its optimizer state and epoch counter.
TrainResult train_model(const ModelSpec& spec, const SparseRows& data, const TrainConfig& cfg,
                        const NoiseSchedule& sched, const std::optional<Validation>& validation = {},
                        const Checkpoint* resume = nullptr,
                        const std::function<void(int, double, double)>& on_epoch = {});

/// Writes `manifest.json`, `params.bin`, `optimizer_m.bin` and `optimizer_v.bin`
/// into dir.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
/// Throws ErrorKind::kIntegrity on any mismatch; never returns partial state.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace cgsorec
