// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "cgsorec/corpus.hpp"
#include "cgsorec/denoiser.hpp"
#include "cgsorec/random.hpp"
#include "cgsorec/schedule.hpp"

namespace cgsorec {

/// A trained denoiser together with the schedule it was trained under.
template <typename Scalar = double>
struct DiffusionModel {
  DenoiserParams<Scalar> params;
  NoiseSchedule sched;
};

struct GuidanceConfig {
  double eta = 0.0;     // social chain: weight of the condition branch per step
  double gamma = 0.0;   // item chain: weight of the condition branch per step
  double w_s = 0.0;     // final blend of the two social chains
  double w_r = 0.0;     // final blend of the two item chains
  double delta = 0.0;   // co-purchase weight inside the social condition
  double lambda = 0.0;  // inverted social preference weight inside the item condition
  int t_inf = 0;        // reverse steps; 0 means the model's T
  bool stochastic = false;
  int neighbor_keep = -1;  // -1 keeps each user's original degree

  /// Throws a config error naming the first out-of-range field.
  void validate(int steps) const;
  int inference_steps(int steps) const { return t_inf > 0 ? t_inf : steps; }
};

/// (1 - mix) * mu(x_t, t) + mix * mu(cond, t); the condition branch is
/// evaluated at the clean condition vector. mix == 0 ignores cond.
template <typename Scalar, typename DerivedX>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> guided_mean(
    const DiffusionModel<Scalar>& model, const Eigen::MatrixBase<DerivedX>& x_t,
    const std::type_identity_t<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>* cond, int t,
    double mix) {
  auto uncond = model_mean(x_t, predict_x0(model.params, x_t, t), t, model.sched);
  if (cond == nullptr || mix == 0.0) return uncond;
  require(cond->rows() == x_t.rows() && cond->cols() == x_t.cols(), ErrorKind::kShape,
          "condition shape differs from the chain state");
  auto conditioned = model_mean(*cond, predict_x0(model.params, *cond, t), t, model.sched);
  return Scalar(1.0 - mix) * uncond + Scalar(mix) * conditioned;
}

/// Runs t = t_start..1 of guided means starting from x_start (already
/// corrupted to t_start). With `noise` non-empty, sqrt(sigma^2(t)) times a
/// fresh standard normal from noise[column] is added for t > 1.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> reverse_chain(
    const DiffusionModel<Scalar>& model,
    std::type_identity_t<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> x,
    const std::type_identity_t<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>* cond,
    double mix, int t_start,
    std::span<Rng> noise = {}) {
  require(t_start >= 1 && t_start <= model.sched.steps(), ErrorKind::kStep,
          "inference steps must lie in [1, T]");
  require(noise.empty() || static_cast<Eigen::Index>(noise.size()) == x.cols(), ErrorKind::kShape,
          "one noise stream per chain column required");
  for (int t = t_start; t >= 1; --t) {
    x = guided_mean(model, x, cond, t, mix);
    if (!noise.empty() && t > 1) {
      const Scalar sd = static_cast<Scalar>(std::sqrt(model.sched.posterior_variance(t)));
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        auto col = x.col(c);
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z(x.rows());
        fill_normal(z, noise[static_cast<std::size_t>(c)]);
        col += sd * z;
      }
    }
  }
  return x;
}

/// Outputs of the two reverse chains per user (one column per user):
/// `guided` starts from the corrupted raw vector and is steered by the
/// condition; `condition` starts from the corrupted condition vector.
struct ChainOutputs {
  MatrixXd guided;
  MatrixXd condition;  // empty when not requested
};

/// (1 - w) * guided + w * condition. w == 0 returns `guided` untouched.
MatrixXd blend_chains(const ChainOutputs& chains, double w);

/// Both chains for a block of users. Columns of `raw` and `cond` are users;
/// streams[c] seeds user c (chain A and chain B use derived sub-streams).
/// want_condition_chain = false skips chain B.
ChainOutputs run_chains(const DiffusionModel<double>& model, const MatrixXd& raw,
                        const MatrixXd& cond, double mix, int t_inf, bool stochastic,
                        std::span<const std::uint64_t> streams, bool want_condition_chain);

/// Social denoising for a block of users (columns).
MatrixXd denoise_social(const DiffusionModel<double>& csd, const MatrixXd& s,
                        const MatrixXd& s_prime, const GuidanceConfig& cfg,
                        std::span<const std::uint64_t> streams);

/// Recommendation scores for a block of users (columns).
MatrixXd recommend(const DiffusionModel<double>& cgd, const MatrixXd& x, const MatrixXd& x_prime,
                   const GuidanceConfig& cfg, std::span<const std::uint64_t> streams);

/// Top-`keep` users by score excluding `self`, ties to the lower id.
/// Returned ids are ascending.
std::vector<int> binarize_social(const VectorXd& s_bar, int self, int keep);

struct JointInputs {
  const DiffusionModel<double>* csd = nullptr;
  const DiffusionModel<double>* cgd = nullptr;
  const SocialMatrix* social = nullptr;        // raw S
  const InteractionMatrix* train = nullptr;    // R
  const ItemGroups* groups = nullptr;
};

/// Per-user stream seeds for the social and item stages.
std::uint64_t social_stream(std::uint64_t seed, int user);
std::uint64_t item_stream(std::uint64_t seed, int user);

/// Users per inference block. Fixed so results do not depend on threads.
inline constexpr int kInferenceBlock = 64;

/// Full pipeline for the given users (all users when empty): social
/// condition, social denoising, binarization, item condition from the
/// denoised neighbours, guided recommendation. Returns both item chains,
/// rows = users in request order, columns = items.
struct JointChains {
  MatrixXd guided;     // users x items
  MatrixXd condition;  // users x items, empty when w_r == 0 and not forced
};
JointChains joint_inference_chains(const JointInputs& in, const GuidanceConfig& cfg,
                                   std::uint64_t seed, std::span<const int> users = {},
                                   bool force_condition_chain = false);

/// Final blended scores x_bar, users x items.
MatrixXd joint_inference(const JointInputs& in, const GuidanceConfig& cfg, std::uint64_t seed,
                         std::span<const int> users = {});

/// Plain diffusion recommendation without any social signal.
MatrixXd unconditional_inference(const DiffusionModel<double>& cgd, const InteractionMatrix& train,
                                 int t_inf, bool stochastic, std::uint64_t seed,
                                 std::span<const int> users = {});

/// Same as unconditional_inference for rows of an arbitrary matrix (used
/// for social-model validation).
MatrixXd unconditional_rows(const DiffusionModel<double>& model, const SparseRows& rows,
                            int t_inf, bool stochastic, std::uint64_t seed,
                            std::span<const int> users = {});

}  // namespace cgsorec
