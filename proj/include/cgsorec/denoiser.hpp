// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cgsorec/error.hpp"
#include "cgsorec/random.hpp"
#include "cgsorec/schedule.hpp"

namespace cgsorec {

enum class ModelTag { kCgd, kCsd };

inline const char* to_string(ModelTag tag) { return tag == ModelTag::kCgd ? "CGD" : "CSD"; }

inline ModelTag model_tag_from_string(const std::string& s) {
  if (s == "CGD" || s == "cgd") return ModelTag::kCgd;
  if (s == "CSD" || s == "csd") return ModelTag::kCsd;
  fail(ErrorKind::kConfig, "unknown model tag '" + s + "'");
}

/// Sinusoidal timestep embedding: cos(t w_k) followed by sin(t w_k) with
/// w_k = 10000^(-k / (dim/2)).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> timestep_embedding(int t, int dim) {
  require(dim >= 2 && dim % 2 == 0, ErrorKind::kConfig, "time_embed_dim must be even and >= 2");
  const int half = dim / 2;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e(dim);
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    e[k] = static_cast<Scalar>(std::cos(t * freq));
    e[half + k] = static_cast<Scalar>(std::sin(t * freq));
  }
  return e;
}

/// Weights of an MLP x0-predictor. layer_dims = [n, hidden..., n]; the first
/// layer additionally reads the time embedding, so weights[0] is
/// hidden_0 x (n + time_embed_dim).
template <typename Scalar = double>
struct DenoiserParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<int> layer_dims;
  int time_embed_dim = 0;
  ModelTag tag = ModelTag::kCgd;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  int width() const { return layer_dims.front(); }
  std::size_t n_layers() const { return weights.size(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  /// Same shapes, all zero.
  DenoiserParams zeros_like() const {
    DenoiserParams z = *this;
    for (auto& w : z.weights) w.setZero();
    for (auto& b : z.biases) b.setZero();
    return z;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
  }

  /// Calls fn(tensor_view) for each tensor in declaration order
  /// (W0, b0, W1, b1, ...), where the view is an Eigen::Map of the data.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      fn(Eigen::Map<Vector>(weights[l].data(), weights[l].size()));
      fn(Eigen::Map<Vector>(biases[l].data(), biases[l].size()));
    }
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      fn(Eigen::Map<const Vector>(weights[l].data(), weights[l].size()));
      fn(Eigen::Map<const Vector>(biases[l].data(), biases[l].size()));
    }
  }
};

/// Allocates zero tensors for the given architecture.
template <typename Scalar = double>
DenoiserParams<Scalar> make_params(const std::vector<int>& layer_dims, int time_embed_dim,
                                   ModelTag tag) {
  require(layer_dims.size() >= 3, ErrorKind::kConfig, "denoiser needs at least one hidden layer");
  for (int d : layer_dims) require(d >= 1, ErrorKind::kConfig, "layer widths must be >= 1");
  require(layer_dims.front() == layer_dims.back(), ErrorKind::kConfig,
          "denoiser input and output widths must match");
  require(time_embed_dim >= 2 && time_embed_dim % 2 == 0, ErrorKind::kConfig,
          "time_embed_dim must be even and >= 2");
  DenoiserParams<Scalar> p;
  p.layer_dims = layer_dims;
  p.time_embed_dim = time_embed_dim;
  p.tag = tag;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l] + (l == 0 ? time_embed_dim : 0);
    p.weights.emplace_back(DenoiserParams<Scalar>::Matrix::Zero(layer_dims[l + 1], fan_in));
    p.biases.emplace_back(DenoiserParams<Scalar>::Vector::Zero(layer_dims[l + 1]));
  }
  return p;
}

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
template <typename Scalar = double>
DenoiserParams<Scalar> init_params(const std::vector<int>& layer_dims, int time_embed_dim,
                                   std::uint64_t seed, ModelTag tag = ModelTag::kCgd) {
  auto p = make_params<Scalar>(layer_dims, time_embed_dim, tag);
  Rng rng(seed);
  for (auto& w : p.weights) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(uni(rng));
  }
  return p;
}

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> embedding_block(
    const std::vector<int>& steps, int dim) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> e(dim, static_cast<Eigen::Index>(steps.size()));
  for (std::size_t b = 0; b < steps.size(); ++b)
    e.col(static_cast<Eigen::Index>(b)) = timestep_embedding<Scalar>(steps[b], dim);
  return e;
}

/// Forward pass keeping every hidden activation (needed for backprop).
template <typename Scalar, typename Derived>
std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> forward_all(
    const DenoiserParams<Scalar>& p, const Eigen::MatrixBase<Derived>& x,
    const std::vector<int>& steps) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require(x.rows() == p.width(), ErrorKind::kShape,
          "denoiser input has length " + std::to_string(x.rows()) + ", expected " +
              std::to_string(p.width()));
  require(static_cast<Eigen::Index>(steps.size()) == x.cols(), ErrorKind::kShape,
          "one timestep per input column required");
  const Eigen::Index n = p.width();
  const Matrix emb = embedding_block<Scalar>(steps, p.time_embed_dim);

  std::vector<Matrix> acts;
  acts.reserve(p.n_layers());
  Matrix z = p.weights[0].leftCols(n) * x + p.weights[0].rightCols(p.time_embed_dim) * emb;
  z.colwise() += p.biases[0];
  for (std::size_t l = 1;; ++l) {
    if (l == p.n_layers()) {
      acts.push_back(std::move(z));  // linear output head
      break;
    }
    acts.push_back(z.array().tanh().matrix());
    z = p.weights[l] * acts.back();
    z.colwise() += p.biases[l];
  }
  return acts;
}

}  // namespace detail

/// Denoiser estimate of x0 for each column of x_t, column b at step steps[b].
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> predict_x0(
    const DenoiserParams<Scalar>& p, const Eigen::MatrixBase<Derived>& x_t,
    const std::vector<int>& steps) {
  return std::move(detail::forward_all(p, x_t, steps).back());
}

/// All columns at the same step.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> predict_x0(
    const DenoiserParams<Scalar>& p, const Eigen::MatrixBase<Derived>& x_t, int t) {
  return predict_x0(p, x_t, std::vector<int>(static_cast<std::size_t>(x_t.cols()), t));
}

/// One training example per column: clean x0, its step and its noise draw.
template <typename Scalar = double>
struct TrainingBatch {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> eps;
  std::vector<int> steps;

  Eigen::Index size() const { return x0.cols(); }
};

template <typename Scalar = double>
struct LossAndGrad {
  double loss = 0.0;
  DenoiserParams<Scalar> grads;
};

/// Mean over the batch of w_t * ||x0_hat(x_t, t) - x0||^2 with x_t drawn by
/// q_sample, together with its exact gradient.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const DenoiserParams<Scalar>& p, const TrainingBatch<Scalar>& batch,
                                  const NoiseSchedule& sched) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index batch_size = batch.size();
  require(batch_size > 0, ErrorKind::kShape, "empty training batch");
  require(batch.eps.rows() == batch.x0.rows() && batch.eps.cols() == batch_size &&
              static_cast<Eigen::Index>(batch.steps.size()) == batch_size,
          ErrorKind::kShape, "training batch fields disagree in size");

  Matrix x_t(batch.x0.rows(), batch_size);
  Vector weight(batch_size);
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    const int t = batch.steps[static_cast<std::size_t>(b)];
    x_t.col(b) = q_sample(batch.x0.col(b), t, batch.eps.col(b), sched);
    weight[b] = static_cast<Scalar>(sched.loss_weight(t));
  }

  auto acts = detail::forward_all(p, x_t, batch.steps);
  const Matrix residual = acts.back() - batch.x0;
  const Vector sq_norm = residual.colwise().squaredNorm().transpose();
  const double loss = static_cast<double>(weight.dot(sq_norm)) / static_cast<double>(batch_size);
  require(std::isfinite(loss), ErrorKind::kNumeric, "non-finite training loss");

  LossAndGrad<Scalar> out{loss, p.zeros_like()};
  // d loss / d output = (2 / B) * w_b * residual_b
  Matrix delta = residual * (weight * Scalar(2.0 / static_cast<double>(batch_size))).asDiagonal();
  for (std::size_t l = p.n_layers(); l-- > 0;) {
    out.grads.biases[l] = delta.rowwise().sum();
    if (l == 0) {
      const Eigen::Index n = p.width();
      out.grads.weights[0].leftCols(n).noalias() = delta * x_t.transpose();
      out.grads.weights[0].rightCols(p.time_embed_dim).noalias() =
          delta * detail::embedding_block<Scalar>(batch.steps, p.time_embed_dim).transpose();
      break;
    }
    const Matrix& input = acts[l - 1];
    out.grads.weights[l].noalias() = delta * input.transpose();
    Matrix back = p.weights[l].transpose() * delta;
    delta = (back.array() * (Scalar(1) - input.array().square())).matrix();
  }
  return out;
}

}  // namespace cgsorec
