// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsorec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "cgsorec/error.hpp"
#include "cgsorec/random.hpp"

namespace cgsorec {

SyntheticCorpus make_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  require(spec.n_users >= 2 && spec.n_items >= 2 && spec.n_communities >= 1, ErrorKind::kConfig,
          "synthetic corpus needs >= 2 users, >= 2 items and >= 1 community");
  require(spec.n_communities * spec.niche_pool <= spec.n_items / 2, ErrorKind::kConfig,
          "niche pools must fit in the lower half of the popularity ranking");
  Rng rng(derive_seed(seed, "synthetic"));

  // Item i has Zipf weight 1 / (i + 1)^s; niche pools come from the tail.
  std::vector<double> weights(static_cast<std::size_t>(spec.n_items));
  for (int i = 0; i < spec.n_items; ++i) weights[i] = std::pow(i + 1.0, -spec.zipf_exponent);
  std::discrete_distribution<int> zipf(weights.begin(), weights.end());

  std::vector<std::vector<int>> pools(static_cast<std::size_t>(spec.n_communities));
  int next_tail = spec.n_items - 1;
  for (auto& pool : pools)
    for (int k = 0; k < spec.niche_pool; ++k) pool.push_back(next_tail--);

  SyntheticCorpus out;
  out.community.resize(static_cast<std::size_t>(spec.n_users));
  for (int u = 0; u < spec.n_users; ++u) out.community[u] = u % spec.n_communities;

  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < spec.n_users; ++u) {
    std::set<int> items;
    while (static_cast<int>(items.size()) < spec.popular_per_user) items.insert(zipf(rng));
    const auto& pool = pools[out.community[u]];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const int want = std::min<int>(spec.niche_per_user, static_cast<int>(pool.size()));
    std::set<int> niche;
    while (static_cast<int>(niche.size()) < want) niche.insert(pool[pick(rng)]);
    items.insert(niche.begin(), niche.end());
    for (int i : items) pairs.emplace_back(u, i);
  }
  out.interactions = InteractionMatrix::from_pairs(spec.n_users, spec.n_items, pairs);

  std::vector<std::vector<int>> members(static_cast<std::size_t>(spec.n_communities));
  for (int u = 0; u < spec.n_users; ++u) members[out.community[u]].push_back(u);
  std::vector<std::pair<int, int>> edges;
  std::uniform_int_distribution<int> any_user(0, spec.n_users - 1);
  for (int u = 0; u < spec.n_users; ++u) {
    const auto& group = members[out.community[u]];
    std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
    const int want = std::min<int>(spec.friends_in_community, static_cast<int>(group.size()) - 1);
    std::set<int> friends;
    while (static_cast<int>(friends.size()) < want) {
      const int v = group[pick(rng)];
      if (v != u) friends.insert(v);
    }
    for (int k = 0; k < spec.friends_random; ++k) {
      const int v = any_user(rng);
      if (v != u) friends.insert(v);
    }
    for (int v : friends) edges.emplace_back(u, v);
  }
  out.social = SocialMatrix::from_edges(spec.n_users, edges, /*symmetrize=*/true);
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec,
                     std::uint64_t seed) {
  const auto corpus = make_synthetic(spec, seed);
  std::filesystem::create_directories(dir);
  std::ofstream r(dir / "interactions.tsv");
  for (auto [u, i] : corpus.interactions.pairs()) r << u << '\t' << i << '\n';
  std::ofstream s(dir / "social.tsv");
  for (int u = 0; u < corpus.social.n_users(); ++u)
    for (SparseRows::InnerIterator it(corpus.social.sparse(), u); it; ++it)
      if (u < it.col()) s << u << '\t' << it.col() << '\n';
  require(static_cast<bool>(r) && static_cast<bool>(s), ErrorKind::kIo,
          "cannot write synthetic corpus to " + dir.string());
}

}  // namespace cgsorec
