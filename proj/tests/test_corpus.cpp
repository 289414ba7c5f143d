// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "cgsorec/commands.hpp"
#include "cgsorec/corpus.hpp"
#include "cgsorec/error.hpp"

using namespace cgsorec;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const auto dir = fs::temp_directory_path() / "cgsorec_corpus_test";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

MatrixXd dense(const SparseRows& m) { return MatrixXd(m); }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}

InteractionMatrix random_binary(int users, int items, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(density);
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < users; ++u)
    for (int i = 0; i < items; ++i)
      if (coin(rng)) pairs.emplace_back(u, i);
  return InteractionMatrix::from_pairs(users, items, pairs);
}

// Item test matrix where item i has counts[i] interactions from distinct users.
InteractionMatrix with_item_counts(const std::vector<int>& counts) {
  const int users = *std::max_element(counts.begin(), counts.end());
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < static_cast<int>(counts.size()); ++i)
    for (int u = 0; u < counts[i]; ++u) pairs.emplace_back(u, i);
  return InteractionMatrix::from_pairs(users, static_cast<int>(counts.size()), pairs);
}

}  // namespace

TEST_CASE("load_interactions deduplicates repeated pairs") {
  const auto path = write_temp("dups.tsv", "0\t1\n0\t1\n1\t0\n");
  const auto r = load_interactions(path);
  // Set-union oracle over the parsed pairs.
  const std::set<std::pair<int, int>> unique{{0, 1}, {0, 1}, {1, 0}};
  CHECK(r.nnz() == static_cast<Eigen::Index>(unique.size()));
  CHECK(r.nnz() == 2);
  CHECK(r.n_users() == 2);
  CHECK(r.n_items() == 2);
}

TEST_CASE("load_interactions on an empty file with declared dims") {
  const auto path = write_temp("empty.tsv", "");
  LoadOptions opts;
  opts.n_users = 3;
  opts.n_items = 4;
  const auto r = load_interactions(path, opts);
  CHECK(r.n_users() == 3);
  CHECK(r.n_items() == 4);
  CHECK(r.nnz() == 0);
}

TEST_CASE("load_interactions maps positive ratings to 1 and drops non-positive") {
  const auto path = write_temp("ratings.tsv", "0\t0\t4\n0\t1\t0\n1\t2\t2.5\n");
  const auto r = load_interactions(path);
  CHECK(r.nnz() == 2);
  CHECK(r.sparse().coeff(0, 0) == 1.0);
  CHECK(r.sparse().coeff(1, 2) == 1.0);
  CHECK(r.sparse().coeff(0, 1) == 0.0);
}

TEST_CASE("load_interactions reports malformed lines with their number") {
  const auto path = write_temp("bad.tsv", "0\t1\n0\tx\n");
  try {
    load_interactions(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("load_interactions rejects ids beyond declared dims") {
  const auto path = write_temp("overflow.tsv", "0\t5\n");
  LoadOptions opts;
  opts.n_items = 3;
  CHECK(kind_of([&] { load_interactions(path, opts); }) == ErrorKind::kDimension);
}

TEST_CASE("load_social drops self-loops and symmetrizes") {
  const auto path = write_temp("social.tsv", "0\t1\n2\t2\n");
  const auto s = load_social(path);
  CHECK(s.n_users() == 3);
  CHECK(s.nnz() == 2);
  CHECK(s.sparse().coeff(0, 1) == 1.0);
  CHECK(s.sparse().coeff(1, 0) == 1.0);
  CHECK(s.sparse().coeff(2, 2) == 0.0);

  LoadOptions directed;
  directed.symmetrize = false;
  const auto d = load_social(path, directed);
  CHECK(d.nnz() == 1);
  CHECK(d.sparse().coeff(1, 0) == 0.0);
}

TEST_CASE("split partitions a 10-item user 8/1/1 deterministically") {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < 10; ++i) pairs.emplace_back(0, i);
  const auto r = InteractionMatrix::from_pairs(1, 10, pairs);
  const auto a = split(r, {}, 42);
  const auto b = split(r, {}, 42);
  CHECK(a.train.nnz() == 8);
  CHECK(a.valid.nnz() == 1);
  CHECK(a.test.nnz() == 1);
  CHECK(a.train.pairs() == b.train.pairs());
  CHECK(a.valid.pairs() == b.valid.pairs());
  CHECK(a.test.pairs() == b.test.pairs());
}

TEST_CASE("split keeps users with fewer than 3 items entirely in train") {
  const auto r = InteractionMatrix::from_pairs(2, 4, {{0, 2}, {1, 0}, {1, 3}});
  const auto b = split(r, {}, 1);
  CHECK(b.train.nnz() == 3);
  CHECK(b.valid.nnz() == 0);
  CHECK(b.test.nnz() == 0);
}

TEST_CASE("split rejects ratios that do not sum to one") {
  const auto r = InteractionMatrix::from_pairs(1, 2, {{0, 0}});
  CHECK(kind_of([&] { split(r, {0.8, 0.1, 0.2}, 0); }) == ErrorKind::kConfig);
}

TEST_CASE("split sizes follow the per-user rounding rule on a random corpus") {
  const auto r = random_binary(60, 40, 0.2, 3);
  const auto b = split(r, {}, 0);
  // Oracle: recompute per-user sizes independently of split_sizes().
  long expected_train = 0;
  for (int k : r.user_counts()) {
    if (k < 3) {
      expected_train += k;
      continue;
    }
    const int v = std::max(1, static_cast<int>(std::floor(k * 0.1 + 0.5)));
    expected_train += k - 2 * v;
  }
  CHECK(b.train.nnz() == expected_train);

  // Disjoint and covering.
  std::set<std::pair<int, int>> seen;
  for (const auto* part : {&b.train, &b.valid, &b.test})
    for (auto p : part->pairs()) CHECK(seen.insert(p).second);
  const auto all = r.pairs();
  CHECK(seen == std::set<std::pair<int, int>>(all.begin(), all.end()));
}

TEST_CASE("split manifests are byte-identical for identical inputs") {
  const auto r = random_binary(30, 20, 0.3, 9);
  auto a = split(r, {}, 5);
  auto b = split(r, {}, 5);
  a.debiased_test = build_debiased_test(a.test, std::nullopt, 1);
  b.debiased_test = build_debiased_test(b.test, std::nullopt, 1);
  CHECK(split_manifest(a).dump() == split_manifest(b).dump());
  auto c = split(r, {}, 6);
  CHECK(split_manifest(c).dump() != split_manifest(a).dump());
}

TEST_CASE("build_debiased_test with an exact cap") {
  const auto test = with_item_counts({5, 5, 1});
  const auto d = build_debiased_test(test, 5, 0);
  const auto counts = d.item_counts();
  CHECK(counts == std::vector<int>{5, 5, 0});
}

TEST_CASE("build_debiased_test is the identity when every count equals the cap") {
  const auto test = InteractionMatrix::from_pairs(3, 3, {{0, 0}, {1, 1}, {2, 2}});
  const auto d = build_debiased_test(test, 1, 0);
  CHECK(d.pairs() == test.pairs());
}

TEST_CASE("build_debiased_test samples down to the cap") {
  const auto test = with_item_counts({4, 7, 9});
  const auto d = build_debiased_test(test, 4, 11);
  // Counting oracle over the output, and every kept pair exists in test.
  std::map<int, int> per_item;
  const auto src = test.pairs();
  const std::set<std::pair<int, int>> source(src.begin(), src.end());
  for (auto p : d.pairs()) {
    ++per_item[p.second];
    CHECK(source.count(p) == 1);
  }
  CHECK(per_item == std::map<int, int>{{0, 4}, {1, 4}, {2, 4}});
}

TEST_CASE("build_debiased_test fails when no item reaches the cap") {
  const auto test = with_item_counts({1, 2});
  CHECK(kind_of([&] { build_debiased_test(test, 3, 0); }) == ErrorKind::kData);
}

TEST_CASE("auto debias cap keeps at least 30% of test items") {
  // counts 1..10: cap c keeps 11 - c items; largest c with 11 - c >= 3 is 8.
  std::vector<int> counts(10);
  std::iota(counts.begin(), counts.end(), 1);
  CHECK(auto_debias_cap(with_item_counts(counts)) == 8);
}

TEST_CASE("debiased test has equal per-item counts on random data") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto test = random_binary(40, 25, 0.15, seed);
    const auto d = build_debiased_test(test, std::nullopt, seed);
    std::vector<int> kept;
    for (int c : d.item_counts())
      if (c > 0) kept.push_back(c);
    REQUIRE(!kept.empty());
    CHECK(*std::max_element(kept.begin(), kept.end()) -
              *std::min_element(kept.begin(), kept.end()) ==
          0);
  }
}

TEST_CASE("partition_items sizes and ties") {
  SUBCASE("ceil arithmetic") {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < 100; ++i) pairs.emplace_back(0, i);
    const auto g = partition_items(InteractionMatrix::from_pairs(1, 100, pairs), 0.05);
    CHECK(g.hot.size() == 5);
    CHECK(g.tail.size() == 95);
  }
  SUBCASE("sort and take") {
    const auto g = partition_items(with_item_counts({9, 9, 1}), 0.34);
    CHECK(g.hot == std::vector<int>{0, 1});
    CHECK(g.tail == std::vector<int>{2});
  }
  SUBCASE("equal counts break ties by id") {
    const auto g = partition_items(with_item_counts({2, 2, 2, 2}), 0.5);
    CHECK(g.hot == std::vector<int>{0, 1});
  }
  SUBCASE("popular late ids come first") {
    const auto g = partition_items(with_item_counts({1, 3, 2}), 0.3);
    CHECK(g.hot == std::vector<int>{1});
  }
  CHECK_THROWS_AS(partition_items(with_item_counts({1}), 1.0), Error);
}

TEST_CASE("longtail_submatrix masks hot columns") {
  const auto r = InteractionMatrix::from_pairs(2, 2, {{0, 0}, {0, 1}, {1, 0}});
  ItemGroups none;
  none.is_hot = {false, false};
  CHECK(dense(longtail_submatrix(r, none).sparse()) == dense(r.sparse()));
  ItemGroups all;
  all.is_hot = {true, true};
  CHECK(longtail_submatrix(r, all).nnz() == 0);
  ItemGroups first;
  first.is_hot = {true, false};
  const auto rl = longtail_submatrix(r, first);
  CHECK(rl.row_items(0) == std::vector<int>{1});
  CHECK(rl.row_items(1).empty());
}

TEST_CASE("copurchase examples") {
  const auto rl = InteractionMatrix::from_pairs(2, 2, {{0, 0}, {0, 1}, {1, 0}});
  MatrixXd expected(2, 2);
  expected << 2, 1, 1, 1;
  CHECK(dense(copurchase(rl).sparse()) == expected);
  CHECK(copurchase(InteractionMatrix(2, 2)).nnz() == 0);
  const auto eye = InteractionMatrix::from_pairs(2, 2, {{0, 0}, {1, 1}});
  CHECK(dense(copurchase(eye).sparse()) == MatrixXd::Identity(2, 2));
}

TEST_CASE("copurchase is symmetric and matches a dense product") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rl = random_binary(50, 80, 0.05, 100 + seed);
    const MatrixXd got = dense(copurchase(rl).sparse());
    const MatrixXd r = dense(rl.sparse());
    MatrixXd brute = MatrixXd::Zero(50, 50);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j)
        for (int k = 0; k < 80; ++k) brute(i, j) += r(i, k) * r(j, k);
    CHECK(got == brute);
    CHECK(got == got.transpose());
  }
}

TEST_CASE("social_condition examples") {
  const auto s = SocialMatrix::from_edges(2, {{0, 1}}, true);
  const auto scpl = copurchase(InteractionMatrix::from_pairs(2, 2, {{0, 0}, {0, 1}, {1, 0}}));
  CHECK(dense(social_condition(s, scpl, 0.0).sparse()) == dense(s.sparse()));
  MatrixXd expected(2, 2);
  expected << 1, 1.5, 1.5, 0.5;
  CHECK(dense(social_condition(s, scpl, 0.5).sparse()) == expected);
  CHECK(dense(social_condition(SocialMatrix(2), scpl, 1.0).sparse()) == dense(scpl.sparse()));
  CHECK(kind_of([&] { social_condition(s, scpl, -0.1); }) == ErrorKind::kConfig);
}

TEST_CASE("social_preference examples") {
  const auto r = InteractionMatrix::from_pairs(2, 2, {{0, 0}, {1, 0}, {1, 1}});
  const auto eye = SocialMatrix(SparseRows(MatrixXd::Identity(2, 2).sparseView()));
  CHECK(dense(social_preference(eye, r).sparse()) == dense(r.sparse()));
  const auto s = SocialMatrix::from_edges(2, {{0, 1}}, true);
  MatrixXd expected(2, 2);
  expected << 1, 1, 1, 0;
  CHECK(dense(social_preference(s, r).sparse()) == expected);
  CHECK(social_preference(SocialMatrix(2), r).nnz() == 0);
}

TEST_CASE("social_preference counts neighbours who interacted") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 12, n = 9;
    std::vector<std::pair<int, int>> edges;
    std::bernoulli_distribution coin(0.3);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        if (a != b && coin(rng)) edges.emplace_back(a, b);
    const auto s = SocialMatrix::from_edges(m, edges, false);
    const auto r = random_binary(m, n, 0.3, 200 + trial);
    const MatrixXd got = dense(social_preference(s, r).sparse());
    const MatrixXd sd = dense(s.sparse()), rd = dense(r.sparse());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        int count = 0;
        for (int k = 0; k < m; ++k) count += (sd(i, k) == 1 && rd(k, j) == 1) ? 1 : 0;
        CHECK(got(i, j) == count);
      }
  }
}

TEST_CASE("invert_preference examples and involution") {
  CHECK(invert_preference(2.0) == 0.5);
  CHECK(invert_preference(0.0) == 0.0);
  CHECK(invert_preference(1.0) == 1.0);
  for (double x : {0.5, 1.0, 2.0, 4.0, 8.0, 0.25})
    CHECK(invert_preference(invert_preference(x)) == x);

  SparseRows m(1, 3);
  m.insert(0, 0) = 2.0;
  m.insert(0, 2) = 4.0;
  const auto inv = invert_preference(InteractionMatrix(m));
  CHECK(inv.nnz() == 2);
  CHECK(inv.sparse().coeff(0, 0) == 0.5);
  CHECK(inv.sparse().coeff(0, 2) == 0.25);
}

TEST_CASE("item_condition examples") {
  const auto r = InteractionMatrix::from_pairs(1, 2, {{0, 1}});
  SparseRows rs(1, 2);
  rs.insert(0, 0) = 4.0;
  rs.insert(0, 1) = 1.0;
  const InteractionMatrix rsm(rs);
  CHECK(dense(item_condition(r, rsm, 0.0).sparse()) == dense(r.sparse()));

  SparseRows only(1, 1);
  only.insert(0, 0) = 4.0;
  CHECK(item_condition(InteractionMatrix(1, 1), InteractionMatrix(only), 1.0).sparse().coeff(0, 0) ==
        0.25);
  CHECK(item_condition(r, rsm, 2.0).sparse().coeff(0, 1) == 3.0);
  CHECK(kind_of([&] { item_condition(r, rsm, -1.0); }) == ErrorKind::kConfig);
}
