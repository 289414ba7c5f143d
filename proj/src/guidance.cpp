// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsorec/guidance.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "cgsorec/parallel.hpp"

namespace cgsorec {
namespace {

void require_unit(double v, const char* name) {
  require(v >= 0.0 && v <= 1.0, ErrorKind::kConfig, std::string(name) + " must lie in [0, 1]");
}

std::vector<int> all_users(int n) {
  std::vector<int> users(static_cast<std::size_t>(n));
  std::iota(users.begin(), users.end(), 0);
  return users;
}

template <typename Rows>
MatrixXd dense_columns(const Rows& rows, std::span<const int> users) {
  const SparseRows& m = rows;
  MatrixXd out = MatrixXd::Zero(m.cols(), static_cast<Eigen::Index>(users.size()));
  for (std::size_t c = 0; c < users.size(); ++c)
    for (SparseRows::InnerIterator it(m, users[c]); it; ++it)
      out(it.col(), static_cast<Eigen::Index>(c)) = it.value();
  return out;
}

/// Splits `users` into fixed-size blocks and runs fn(block_users, offset).
template <typename Fn>
void for_each_block(std::span<const int> users, Fn&& fn) {
  const std::size_t n_blocks = (users.size() + kInferenceBlock - 1) / kInferenceBlock;
  parallel_for(n_blocks, [&](std::size_t b) {
    const std::size_t begin = b * kInferenceBlock;
    const std::size_t len = std::min<std::size_t>(kInferenceBlock, users.size() - begin);
    fn(users.subspan(begin, len), begin);
  });
}

}  // namespace

void GuidanceConfig::validate(int steps) const {
  require_unit(eta, "eta");
  require_unit(gamma, "gamma");
  require_unit(w_s, "w_s");
  require_unit(w_r, "w_r");
  require(delta >= 0.0, ErrorKind::kConfig, "delta must be >= 0");
  require(lambda >= 0.0, ErrorKind::kConfig, "lambda must be >= 0");
  require(t_inf >= 0 && t_inf <= steps, ErrorKind::kConfig,
          "t_inf must lie in [1, T] (0 selects T)");
  require(neighbor_keep >= -1, ErrorKind::kConfig, "neighbor_keep must be >= -1");
}

MatrixXd blend_chains(const ChainOutputs& chains, double w) {
  if (w == 0.0) return chains.guided;
  require(chains.condition.rows() == chains.guided.rows() &&
              chains.condition.cols() == chains.guided.cols(),
          ErrorKind::kShape, "condition chain missing for a non-zero blend weight");
  return (1.0 - w) * chains.guided + w * chains.condition;
}

ChainOutputs run_chains(const DiffusionModel<double>& model, const MatrixXd& raw,
                        const MatrixXd& cond, double mix, int t_inf, bool stochastic,
                        std::span<const std::uint64_t> streams, bool want_condition_chain) {
  const Eigen::Index cols = raw.cols();
  require(static_cast<Eigen::Index>(streams.size()) == cols, ErrorKind::kShape,
          "one stream per user column required");
  const bool need_cond = want_condition_chain || mix != 0.0;
  if (need_cond)
    require(cond.rows() == raw.rows() && cond.cols() == cols, ErrorKind::kShape,
            "condition block differs in shape from the raw block");

  std::vector<Rng> rng_a, rng_b;
  rng_a.reserve(streams.size());
  rng_b.reserve(streams.size());
  MatrixXd start_a(raw.rows(), cols);
  MatrixXd start_b;
  if (want_condition_chain) start_b.resize(raw.rows(), cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const auto s = streams[static_cast<std::size_t>(c)];
    rng_a.emplace_back(derive_seed(s, "chain-a"));
    rng_b.emplace_back(derive_seed(s, "chain-b"));
    start_a.col(c) = q_sample(raw.col(c), t_inf, normal_vector(raw.rows(), rng_a.back()),
                              model.sched);
    if (want_condition_chain)
      start_b.col(c) = q_sample(cond.col(c), t_inf, normal_vector(raw.rows(), rng_b.back()),
                                model.sched);
  }

  ChainOutputs out;
  const MatrixXd* cond_ptr = mix != 0.0 ? &cond : nullptr;
  out.guided = reverse_chain(model, std::move(start_a), cond_ptr, mix, t_inf,
                             stochastic ? std::span<Rng>(rng_a) : std::span<Rng>());
  if (want_condition_chain)
    out.condition = reverse_chain(model, std::move(start_b), nullptr, 0.0, t_inf,
                                  stochastic ? std::span<Rng>(rng_b) : std::span<Rng>());
  return out;
}

MatrixXd denoise_social(const DiffusionModel<double>& csd, const MatrixXd& s,
                        const MatrixXd& s_prime, const GuidanceConfig& cfg,
                        std::span<const std::uint64_t> streams) {
  const int t_inf = cfg.inference_steps(csd.sched.steps());
  return blend_chains(
      run_chains(csd, s, s_prime, cfg.eta, t_inf, cfg.stochastic, streams, cfg.w_s != 0.0),
      cfg.w_s);
}

MatrixXd recommend(const DiffusionModel<double>& cgd, const MatrixXd& x, const MatrixXd& x_prime,
                   const GuidanceConfig& cfg, std::span<const std::uint64_t> streams) {
  const int t_inf = cfg.inference_steps(cgd.sched.steps());
  return blend_chains(
      run_chains(cgd, x, x_prime, cfg.gamma, t_inf, cfg.stochastic, streams, cfg.w_r != 0.0),
      cfg.w_r);
}

std::vector<int> binarize_social(const VectorXd& s_bar, int self, int keep) {
  require(keep >= 0, ErrorKind::kConfig, "keep must be >= 0");
  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(s_bar.size()));
  for (int u = 0; u < s_bar.size(); ++u)
    if (u != self) candidates.push_back(u);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(keep), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(), [&](int a, int b) {
                      if (s_bar[a] != s_bar[b]) return s_bar[a] > s_bar[b];
                      return a < b;
                    });
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

std::uint64_t social_stream(std::uint64_t seed, int user) {
  return user_seed(seed, static_cast<std::uint64_t>(user), "social");
}

std::uint64_t item_stream(std::uint64_t seed, int user) {
  return user_seed(seed, static_cast<std::uint64_t>(user), "item");
}

JointChains joint_inference_chains(const JointInputs& in, const GuidanceConfig& cfg,
                                   std::uint64_t seed, std::span<const int> users,
                                   bool force_condition_chain) {
  require(in.csd && in.cgd && in.social && in.train && in.groups, ErrorKind::kConfig,
          "joint inference inputs incomplete");
  const auto& r = *in.train;
  const auto& s = *in.social;
  require(s.n_users() == r.n_users(), ErrorKind::kShape, "S and R disagree on user count");
  require(in.cgd->params.width() == r.n_items(), ErrorKind::kShape,
          "item model width differs from the item count");
  require(in.csd->params.width() == s.n_users(), ErrorKind::kShape,
          "social model width differs from the user count");
  cfg.validate(std::min(in.cgd->sched.steps(), in.csd->sched.steps()));

  std::vector<int> owned;
  if (users.empty()) {
    owned = all_users(r.n_users());
    users = owned;
  }
  const bool want_b = cfg.w_r != 0.0 || force_condition_chain;
  const bool needs_item_condition = cfg.gamma != 0.0 || want_b;

  SocialMatrix s_prime;
  std::vector<int> degrees;
  if (needs_item_condition) {
    const SocialMatrix s_cpl =
        cfg.delta != 0.0 ? copurchase(longtail_submatrix(r, *in.groups)) : SocialMatrix(s.n_users());
    s_prime = social_condition(s, s_cpl, cfg.delta);
    degrees = s.degrees();
  }

  const Eigen::Index n_out = static_cast<Eigen::Index>(users.size());
  JointChains out;
  out.guided.resize(n_out, r.n_items());
  if (want_b) out.condition.resize(n_out, r.n_items());

  for_each_block(users, [&](std::span<const int> block, std::size_t offset) {
    const auto cols = static_cast<Eigen::Index>(block.size());
    std::vector<std::uint64_t> item_streams(block.size());
    for (std::size_t c = 0; c < block.size(); ++c) item_streams[c] = item_stream(seed, block[c]);
    const MatrixXd x = dense_columns(r.sparse(), block);

    MatrixXd x_prime;
    if (needs_item_condition) {
      std::vector<std::uint64_t> social_streams(block.size());
      for (std::size_t c = 0; c < block.size(); ++c)
        social_streams[c] = social_stream(seed, block[c]);
      const MatrixXd s_bar = denoise_social(*in.csd, dense_columns(s.sparse(), block),
                                            dense_columns(s_prime.sparse(), block), cfg,
                                            social_streams);
      x_prime = x;
      VectorXd neighbour_counts(r.n_items());
      for (Eigen::Index c = 0; c < cols; ++c) {
        const int u = block[static_cast<std::size_t>(c)];
        const int keep = cfg.neighbor_keep >= 0 ? cfg.neighbor_keep : degrees[u];
        neighbour_counts.setZero();
        for (int v : binarize_social(s_bar.col(c), u, keep))
          for (SparseRows::InnerIterator it(r.sparse(), v); it; ++it)
            neighbour_counts[it.col()] += it.value();
        for (Eigen::Index j = 0; j < neighbour_counts.size(); ++j)
          x_prime(j, c) += cfg.lambda * invert_preference(neighbour_counts[j]);
      }
    }

    const int t_inf = cfg.inference_steps(in.cgd->sched.steps());
    auto chains =
        run_chains(*in.cgd, x, x_prime, cfg.gamma, t_inf, cfg.stochastic, item_streams, want_b);
    const auto row0 = static_cast<Eigen::Index>(offset);
    out.guided.middleRows(row0, cols) = chains.guided.transpose();
    if (want_b) out.condition.middleRows(row0, cols) = chains.condition.transpose();
  });
  return out;
}

MatrixXd joint_inference(const JointInputs& in, const GuidanceConfig& cfg, std::uint64_t seed,
                         std::span<const int> users) {
  auto chains = joint_inference_chains(in, cfg, seed, users);
  return blend_chains({std::move(chains.guided), std::move(chains.condition)}, cfg.w_r);
}

MatrixXd unconditional_rows(const DiffusionModel<double>& model, const SparseRows& rows,
                            int t_inf, bool stochastic, std::uint64_t seed,
                            std::span<const int> users) {
  require(model.params.width() == rows.cols(), ErrorKind::kShape,
          "model width differs from the row length");
  std::vector<int> owned;
  if (users.empty()) {
    owned = all_users(static_cast<int>(rows.rows()));
    users = owned;
  }
  const int steps = t_inf > 0 ? t_inf : model.sched.steps();
  MatrixXd out(static_cast<Eigen::Index>(users.size()), rows.cols());
  for_each_block(users, [&](std::span<const int> block, std::size_t offset) {
    std::vector<std::uint64_t> streams(block.size());
    for (std::size_t c = 0; c < block.size(); ++c) streams[c] = item_stream(seed, block[c]);
    const MatrixXd x = dense_columns(rows, block);
    auto chains = run_chains(model, x, MatrixXd(), 0.0, steps, stochastic, streams, false);
    out.middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(block.size())) =
        chains.guided.transpose();
  });
  return out;
}

MatrixXd unconditional_inference(const DiffusionModel<double>& cgd, const InteractionMatrix& train,
                                 int t_inf, bool stochastic, std::uint64_t seed,
                                 std::span<const int> users) {
  return unconditional_rows(cgd, train.sparse(), t_inf, stochastic, seed, users);
}

}  // namespace cgsorec
