// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cgsorec/error.hpp"

namespace cgsorec {

/// Gaussian noise schedule over steps t = 1..T. Index 0 of every array is
/// the t = 0 convention (beta = 0, alpha = alpha_bar = 1) so formulas at
/// t = 1 need no special case. All arithmetic is double precision.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  /// Linear betas from beta_start to beta_end over T steps.
  NoiseSchedule(int steps, double beta_start, double beta_end)
      : steps_(steps), beta_start_(beta_start), beta_end_(beta_end) {
    require(steps >= 1, ErrorKind::kConfig, "schedule needs T >= 1");
    require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, ErrorKind::kConfig,
            "schedule needs 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t)
      betas[t] = steps == 1 ? beta_start
                            : beta_start + (beta_end - beta_start) * t / (steps - 1);
    build(betas);
  }

  /// Explicit betas, beta[0] being the beta of step 1.
  static NoiseSchedule from_betas(const std::vector<double>& betas) {
    require(!betas.empty(), ErrorKind::kConfig, "schedule needs T >= 1");
    NoiseSchedule s;
    s.steps_ = static_cast<int>(betas.size());
    s.beta_start_ = betas.front();
    s.beta_end_ = betas.back();
    s.build(betas);
    return s;
  }

  int steps() const { return steps_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  double beta(int t) const { return beta_[checked(t, 1)]; }
  double alpha(int t) const { return alpha_[checked(t, 1)]; }
  /// Valid for t in [0, T]; alpha_bar(0) == 1.
  double alpha_bar(int t) const { return alpha_bar_[checked(t, 0)]; }

  /// Posterior variance (1 - alpha_t)(1 - alpha_bar_{t-1}) / (1 - alpha_bar_t).
  double posterior_variance(int t) const {
    checked(t, 1);
    return (1.0 - alpha_[t]) * (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]);
  }

  /// Coefficients (on x_t, on x_0) of the posterior mean at step t.
  std::pair<double, double> posterior_coefficients(int t) const {
    checked(t, 1);
    const double denom = 1.0 - alpha_bar_[t];
    return {std::sqrt(alpha_[t]) * (1.0 - alpha_bar_[t - 1]) / denom,
            std::sqrt(alpha_bar_[t - 1]) * (1.0 - alpha_[t]) / denom};
  }

  /// Loss weight of step t: 1 at t = 1, half the drop in signal-to-noise
  /// ratio alpha_bar / (1 - alpha_bar) between t - 1 and t otherwise.
  double loss_weight(int t) const {
    checked(t, 1);
    if (t == 1) return 1.0;
    const auto snr = [](double ab) { return ab / (1.0 - ab); };
    return 0.5 * (snr(alpha_bar_[t - 1]) - snr(alpha_bar_[t]));
  }

 private:
  int checked(int t, int lo) const {
    if (t < lo || t > steps_)
      fail(ErrorKind::kStep, "step " + std::to_string(t) + " outside [" + std::to_string(lo) +
                                 ", " + std::to_string(steps_) + "]");
    return t;
  }

  void build(const std::vector<double>& betas) {
    beta_.assign(1, 0.0);
    alpha_.assign(1, 1.0);
    alpha_bar_.assign(1, 1.0);
    for (double b : betas) {
      require(b > 0.0 && b < 1.0, ErrorKind::kConfig, "every beta must lie in (0, 1)");
      beta_.push_back(b);
      alpha_.push_back(1.0 - b);
      alpha_bar_.push_back(alpha_bar_.back() * alpha_.back());
    }
    for (int t = 1; t <= steps_; ++t)
      require(alpha_bar_[t] < alpha_bar_[t - 1] && loss_weight(t) > 0.0, ErrorKind::kConfig,
              "alpha_bar must strictly decrease");
  }

  int steps_ = 0;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

/// Forward marginal draw sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
/// t = 0 returns x0 unchanged.
template <typename DerivedX, typename DerivedE>
auto q_sample(const Eigen::MatrixBase<DerivedX>& x0, int t,
              const Eigen::MatrixBase<DerivedE>& eps, const NoiseSchedule& sched) {
  using Scalar = typename DerivedX::Scalar;
  require(x0.rows() == eps.rows() && x0.cols() == eps.cols(), ErrorKind::kShape,
          "q_sample: noise shape differs from x0");
  const double ab = sched.alpha_bar(t);
  Eigen::Matrix<Scalar, DerivedX::RowsAtCompileTime, DerivedX::ColsAtCompileTime> out =
      Scalar(std::sqrt(ab)) * x0 + Scalar(std::sqrt(1.0 - ab)) * eps;
  return out;
}

template <typename Scalar>
struct Posterior {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mean;
  double variance = 0.0;
};

/// Mean and variance of q(x_{t-1} | x_t, x_0).
template <typename DerivedT, typename Derived0>
Posterior<typename DerivedT::Scalar> posterior_params(const Eigen::MatrixBase<DerivedT>& x_t,
                                                      const Eigen::MatrixBase<Derived0>& x0,
                                                      int t, const NoiseSchedule& sched) {
  using Scalar = typename DerivedT::Scalar;
  require(x_t.rows() == x0.rows() && x_t.cols() == x0.cols(), ErrorKind::kShape,
          "posterior_params: x_t and x0 differ in shape");
  const auto [c_t, c_0] = sched.posterior_coefficients(t);
  return {Scalar(c_t) * x_t + Scalar(c_0) * x0, sched.posterior_variance(t)};
}

/// Model mean: the posterior mean with x0 replaced by the denoiser's estimate.
template <typename DerivedT, typename Derived0>
Eigen::Matrix<typename DerivedT::Scalar, Eigen::Dynamic, Eigen::Dynamic> model_mean(
    const Eigen::MatrixBase<DerivedT>& x_t, const Eigen::MatrixBase<Derived0>& x0_hat, int t,
    const NoiseSchedule& sched) {
  return posterior_params(x_t, x0_hat, t, sched).mean;
}

}  // namespace cgsorec
