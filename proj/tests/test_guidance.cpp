// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>

#include "cgsorec/error.hpp"
#include "cgsorec/guidance.hpp"
#include "reference.hpp"

using namespace cgsorec;

namespace {

DiffusionModel<double> random_model(int width, std::uint64_t seed, int steps = 4) {
  return {init_params({width, 6, width}, 4, seed), NoiseSchedule(steps, 1e-2, 0.2)};
}

// A small social corpus: 5 users, 8 items, items 0 and 1 hot.
struct Fixture {
  InteractionMatrix r = InteractionMatrix::from_pairs(
      5, 8, {{0, 0}, {0, 2}, {0, 5}, {1, 1}, {1, 2}, {1, 6}, {2, 0}, {2, 3}, {2, 5}, {2, 7},
             {3, 4}, {3, 6}, {4, 1}});
  SocialMatrix s = SocialMatrix::from_edges(5, {{0, 1}, {1, 2}, {2, 3}}, true);
  ItemGroups groups = partition_items(r, 0.25);
  DiffusionModel<double> csd = random_model(5, 11);
  DiffusionModel<double> cgd = random_model(8, 12);

  JointInputs inputs() const { return {&csd, &cgd, &s, &r, &groups}; }
};

Eigen::MatrixXd to_dense(const SparseRows& m) { return Eigen::MatrixXd(m); }

}  // namespace

TEST_CASE("guided mean mixes the two branch means") {
  // Zero network: x0_hat = 0 and the branch mean is c_t * x.
  const DiffusionModel<double> m{make_params<double>({1, 2, 1}, 2, ModelTag::kCgd),
                                 NoiseSchedule(3, 0.1, 0.2)};
  const double c_t = m.sched.posterior_coefficients(2).first;
  Eigen::MatrixXd x(1, 1), cond(1, 1);
  x << 0.2 / c_t;
  cond << 0.6 / c_t;
  CHECK(guided_mean(m, x, &cond, 2, 0.0)(0, 0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(guided_mean(m, x, &cond, 2, 1.0)(0, 0) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(guided_mean(m, x, &cond, 2, 0.5)(0, 0) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(guided_mean(m, x, nullptr, 2, 0.0) == guided_mean(m, x, &cond, 2, 0.0));
}

TEST_CASE("reverse chain from t = 1 returns the mixed x0 estimate") {
  const auto m = random_model(5, 3);
  Rng rng(2);
  const Eigen::MatrixXd x = normal_vector(5, rng), cond = normal_vector(5, rng);
  const auto out = reverse_chain(m, x, &cond, 0.3, 1);
  const Eigen::MatrixXd expect =
      0.7 * predict_x0(m.params, x, 1) + 0.3 * predict_x0(m.params, cond, 1);
  CHECK(out.isApprox(expect, 1e-14));
}

TEST_CASE("two-step chain matches a hand trace") {
  const auto m = random_model(3, 4, 2);
  const ref::Sched s = ref::schedule(m.sched);
  const ref::Vec x2{0.3, -0.1, 0.8}, cond{1.0, 0.0, 0.5};
  // Step t = 2 then t = 1, each mixing 0.25 of the condition branch.
  auto step = [&](const ref::Vec& x, int t) {
    const auto a = ref::mean(s, x, ref::mlp(m.params, x, t), t);
    const auto b = ref::mean(s, cond, ref::mlp(m.params, cond, t), t);
    ref::Vec out(3);
    for (int i = 0; i < 3; ++i) out[i] = 0.75 * a[i] + 0.25 * b[i];
    return out;
  };
  const auto expect = step(step(x2, 2), 1);
  const Eigen::MatrixXd ex = Eigen::Map<const Eigen::VectorXd>(x2.data(), 3);
  const Eigen::MatrixXd ec = Eigen::Map<const Eigen::VectorXd>(cond.data(), 3);
  const auto got = reverse_chain(m, ex, &ec, 0.25, 2);
  for (int i = 0; i < 3; ++i) CHECK(got(i, 0) == doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-13));
}

TEST_CASE("blend_chains") {
  ChainOutputs c;
  c.guided = Eigen::MatrixXd::Constant(1, 1, 1.0);
  c.condition = Eigen::MatrixXd::Constant(1, 1, 0.5);
  CHECK(blend_chains(c, 0.4)(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(blend_chains(c, 1.0)(0, 0) == 0.5);
  ChainOutputs only_a{c.guided, {}};
  CHECK(blend_chains(only_a, 0.0) == c.guided);
  CHECK_THROWS_AS(blend_chains(only_a, 0.5), Error);
}

TEST_CASE("denoise_social endpoints") {
  const auto m = random_model(5, 7);
  Rng rng(1);
  Eigen::MatrixXd s(5, 2), sp(5, 2);
  fill_normal(s, rng);
  fill_normal(sp, rng);
  const std::vector<std::uint64_t> streams{10, 20};
  GuidanceConfig none;
  const auto plain = run_chains(m, s, Eigen::MatrixXd(), 0.0, 4, false, streams, false).guided;
  CHECK(denoise_social(m, s, sp, none, streams) == plain);

  GuidanceConfig all_b;
  all_b.w_s = 1.0;
  const auto both = run_chains(m, s, sp, 0.0, 4, false, streams, true);
  CHECK(denoise_social(m, s, sp, all_b, streams) == both.condition);
}

TEST_CASE("recommend endpoints and mixing") {
  const auto m = random_model(8, 8);
  Rng rng(3);
  Eigen::MatrixXd x(8, 3), xp(8, 3);
  fill_normal(x, rng);
  fill_normal(xp, rng);
  const std::vector<std::uint64_t> streams{1, 2, 3};
  GuidanceConfig cfg;
  const auto uncond = run_chains(m, x, Eigen::MatrixXd(), 0.0, 4, false, streams, false).guided;
  CHECK(recommend(m, x, xp, cfg, streams) == uncond);
  cfg.w_r = 1.0;
  const auto chains = run_chains(m, x, xp, 0.0, 4, false, streams, true);
  CHECK(recommend(m, x, xp, cfg, streams) == chains.condition);
}

TEST_CASE("binarize_social") {
  Eigen::VectorXd s(3);
  s << 0.9, 0.1, 0.9;
  CHECK(binarize_social(s, 1, 1) == std::vector<int>{0});
  CHECK(binarize_social(s, 1, 0).empty());
  CHECK(binarize_social(s, 1, 2) == std::vector<int>{0, 2});
  CHECK(binarize_social(s, 0, 5) == std::vector<int>{1, 2});
  CHECK_THROWS_AS(binarize_social(s, 0, -1), Error);
}

TEST_CASE("binarization preserves degree") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd s = normal_vector(20, rng);
    const int self = trial % 20;
    const int degree = trial % 19;
    const auto kept = binarize_social(s, self, degree);
    CHECK(static_cast<int>(kept.size()) == degree);
    CHECK(std::find(kept.begin(), kept.end(), self) == kept.end());
    // Every kept score is at least every dropped score.
    double min_kept = 1e300, max_dropped = -1e300;
    for (int v = 0; v < 20; ++v) {
      if (v == self) continue;
      if (std::binary_search(kept.begin(), kept.end(), v))
        min_kept = std::min(min_kept, s[v]);
      else
        max_dropped = std::max(max_dropped, s[v]);
    }
    if (degree > 0) CHECK(min_kept >= max_dropped);
  }
}

TEST_CASE("guidance config validation") {
  GuidanceConfig cfg;
  cfg.eta = 1.5;
  CHECK_THROWS_AS(cfg.validate(20), Error);
  cfg = {};
  cfg.t_inf = 21;
  CHECK_THROWS_AS(cfg.validate(20), Error);
  cfg = {};
  cfg.delta = -0.1;
  CHECK_THROWS_AS(cfg.validate(20), Error);
  cfg = {};
  CHECK_NOTHROW(cfg.validate(20));
}

TEST_CASE("joint pipeline matches the scalar reference trace") {
  const Fixture f;
  const auto S = to_dense(f.s.sparse());
  const auto R = to_dense(f.r.sparse());
  std::vector<GuidanceConfig> configs(4);
  configs[0] = {0.2, 0.3, 0.4, 0.5, 1.0, 1.0};
  configs[1] = {0.5, 0.1, 0.0, 0.0, 0.5, 2.0};
  configs[2] = {0.0, 0.6, 1.0, 1.0, 0.0, 0.5};
  configs[3] = {0.3, 0.3, 0.3, 0.3, 2.0, 1.0, 3, true};
  for (const auto& cfg : configs) {
    const auto got = joint_inference(f.inputs(), cfg, 77);
    for (int u = 0; u < 5; ++u) {
      const auto tr = ref::joint_user(f.csd, f.cgd, S, R, f.groups.is_hot, cfg, 77, u);
      for (int i = 0; i < 8; ++i)
        CHECK(got(u, i) == doctest::Approx(tr.final_scores[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("reference trace shapes on the fixture") {
  const Fixture f;
  GuidanceConfig cfg{0.2, 0.3, 0.4, 0.5, 1.0, 1.0};
  const auto S = to_dense(f.s.sparse());
  const auto R = to_dense(f.r.sparse());
  // User 4 has no friends: its neighbour set is empty and x' = x.
  const auto lonely = ref::joint_user(f.csd, f.cgd, S, R, f.groups.is_hot, cfg, 1, 4);
  CHECK(lonely.neighbours.empty());
  for (int i = 0; i < 8; ++i) CHECK(lonely.x_prime[static_cast<std::size_t>(i)] == R(4, i));
  // User 2 has two friends and keeps two neighbours.
  const auto busy = ref::joint_user(f.csd, f.cgd, S, R, f.groups.is_hot, cfg, 1, 2);
  CHECK(busy.neighbours.size() == 2);
}

TEST_CASE("zero guidance reduces bitwise to unconditional inference") {
  const int users = 50, items = 30;
  std::vector<std::pair<int, int>> pairs, edges;
  Rng rng(4);
  std::uniform_int_distribution<int> pick_item(0, items - 1), pick_user(0, users - 1);
  for (int u = 0; u < users; ++u)
    for (int k = 0; k < 4; ++k) pairs.emplace_back(u, pick_item(rng));
  for (int k = 0; k < 100; ++k) edges.emplace_back(pick_user(rng), pick_user(rng));
  const auto r = InteractionMatrix::from_pairs(users, items, pairs);
  const auto s = SocialMatrix::from_edges(users, edges, true);
  const auto groups = partition_items(r, 0.1);
  const auto csd = random_model(users, 5, 6);
  const auto cgd = random_model(items, 6, 6);
  const JointInputs in{&csd, &cgd, &s, &r, &groups};
  for (bool stochastic : {false, true}) {
    GuidanceConfig cfg;
    cfg.stochastic = stochastic;
    cfg.eta = 0.7;  // social settings cannot matter when the item stage ignores them
    cfg.w_s = 0.4;
    cfg.delta = 1.0;
    const auto joint = joint_inference(in, cfg, 123);
    const auto plain = unconditional_inference(cgd, r, 0, stochastic, 123);
    CHECK(joint == plain);
  }
}

TEST_CASE("final scores are linear in w_r") {
  const Fixture f;
  GuidanceConfig cfg{0.2, 0.3, 0.4, 0.0, 1.0, 1.0};
  const auto chains = joint_inference_chains(f.inputs(), cfg, 5, {}, true);
  for (double w : {0.0, 0.25, 0.5, 1.0}) {
    cfg.w_r = w;
    const auto got = joint_inference(f.inputs(), cfg, 5);
    CHECK(got.isApprox((1 - w) * chains.guided + w * chains.condition, 1e-14));
  }
}

TEST_CASE("inference is independent of the worker count") {
  const int users = 150, items = 12;
  std::vector<std::pair<int, int>> pairs, edges;
  for (int u = 0; u < users; ++u) {
    pairs.emplace_back(u, u % items);
    pairs.emplace_back(u, (u * 7) % items);
    edges.emplace_back(u, (u + 1) % users);
  }
  const auto r = InteractionMatrix::from_pairs(users, items, pairs);
  const auto s = SocialMatrix::from_edges(users, edges, true);
  const auto groups = partition_items(r, 0.2);
  const auto csd = random_model(users, 1);
  const auto cgd = random_model(items, 2);
  const JointInputs in{&csd, &cgd, &s, &r, &groups};
  GuidanceConfig cfg{0.2, 0.3, 0.2, 0.4, 1.0, 1.0};
  cfg.stochastic = true;
  setenv("CGSOREC_THREADS", "1", 1);
  const auto one = joint_inference(in, cfg, 9);
  setenv("CGSOREC_THREADS", "3", 1);
  const auto three = joint_inference(in, cfg, 9);
  unsetenv("CGSOREC_THREADS");
  CHECK(one == three);
}

TEST_CASE("subset requests reproduce the full-run rows") {
  const Fixture f;
  GuidanceConfig cfg{0.2, 0.3, 0.4, 0.5, 1.0, 1.0};
  const auto all = joint_inference(f.inputs(), cfg, 3);
  const std::vector<int> some{3, 1};
  const auto part = joint_inference(f.inputs(), cfg, 3, some);
  CHECK(part.row(0) == all.row(3));
  CHECK(part.row(1) == all.row(1));
}

TEST_CASE("joint inference rejects mismatched models") {
  const Fixture f;
  const auto wrong = random_model(7, 1);
  const JointInputs in{&f.csd, &wrong, &f.s, &f.r, &f.groups};
  CHECK_THROWS_AS(joint_inference(in, {}, 0), Error);
}
