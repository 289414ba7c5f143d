// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgsorec/corpus.hpp"

namespace cgsorec {

struct RankedList {
  int user = 0;
  std::vector<int> items;  // best first
  std::vector<double> scores;
};

/// Top-K items by score, skipping `mask` (sorted ascending), ties to the
/// lower item id.
RankedList rank_items(const VectorXd& scores, std::span<const int> mask, int k, int user = 0);

/// Ranks every row of `scores` (row r belongs to users[r]) masking that
/// user's train items.
std::vector<RankedList> rank_all(const MatrixXd& scores, std::span<const int> users,
                                 const InteractionMatrix& train, int k);

enum class RecallMode {
  kGlobalRatio,  // sum of hits over sum of test sizes
  kUserMean,     // mean of per-user hit ratios
};

/// Recall over the first k entries of each list. Users with no test items
/// are skipped; throws if none remain.
double recall_at_k(std::span<const RankedList> lists, const InteractionMatrix& test, int k,
                   RecallMode mode = RecallMode::kGlobalRatio);

/// Mean over users with test items of DCG@k / IDCG@k, log base 2.
double ndcg_at_k(std::span<const RankedList> lists, const InteractionMatrix& test, int k);

struct GroupMetrics {
  std::map<int, double> recall;
  std::map<int, double> ndcg;
};

/// Metrics with test sets restricted to each group. A group with no test
/// interactions maps to nullopt and its name is appended to `notices`.
struct HotTailMetrics {
  std::optional<GroupMetrics> hot;
  std::optional<GroupMetrics> tail;
  std::vector<std::string> notices;
};
HotTailMetrics group_metrics(std::span<const RankedList> lists, const InteractionMatrix& test,
                             const ItemGroups& groups, std::span<const int> ks,
                             RecallMode mode = RecallMode::kGlobalRatio);

struct FrequencyBucket {
  std::string label;
  int n_items = 0;
  long total = 0;
  double mean_frequency = 0.0;
};

struct FrequencyHistogram {
  std::vector<long> item_counts;         // appearances of each item in the top-K lists
  std::vector<FrequencyBucket> deciles;  // D1 = most popular tenth of items
  FrequencyBucket hot;
  FrequencyBucket tail;
  long total = 0;  // == K * |lists|
};

/// Counts item appearances over the first k entries of every list and
/// averages them per train-popularity decile and per hot/tail group.
FrequencyHistogram frequency_histogram(std::span<const RankedList> lists,
                                       const InteractionMatrix& train, const ItemGroups& groups,
                                       int k);

struct EvalReport {
  std::vector<int> ks;
  std::map<int, double> recall;
  std::map<int, double> ndcg;
  HotTailMetrics groups;
  FrequencyHistogram freq;
};

EvalReport evaluate(std::span<const RankedList> lists, const InteractionMatrix& train,
                    const InteractionMatrix& test, const ItemGroups& groups,
                    std::span<const int> ks, RecallMode mode = RecallMode::kGlobalRatio);

}  // namespace cgsorec
