// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "cgsorec/corpus.hpp"

namespace cgsorec {

/// Planted popularity-bias corpus: item popularity follows a Zipf law, users
/// belong to communities, and each community shares a pool of long-tail
/// niche items. Friends are drawn mostly inside a user's community, so the
/// items a user's friends rarely share are exactly the community niche.
struct SyntheticSpec {
  int n_users = 200;
  int n_items = 300;
  int n_communities = 10;
  double zipf_exponent = 1.1;
  int popular_per_user = 10;   // draws from the global Zipf law
  int niche_per_user = 8;      // draws from the community pool
  int niche_pool = 15;         // niche items per community
  int friends_in_community = 5;
  int friends_random = 1;
};

struct SyntheticCorpus {
  InteractionMatrix interactions;
  SocialMatrix social;
  std::vector<int> community;  // per user
};

SyntheticCorpus make_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Writes interactions.tsv and social.tsv (each edge once) into dir.
void write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec,
                     std::uint64_t seed);

}  // namespace cgsorec
